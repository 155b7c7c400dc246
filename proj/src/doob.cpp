#include "qsdlab/doob.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

constexpr double kNegativeTolerance = 1e-10;
constexpr double kMassTolerance = 1e-10;
const double kLogUnderflow = std::log(1e-290);

// Tridiagonal matrix acting on densities (already transposed).
struct DensityMatrix {
    std::span<const double> lower;
    std::span<const double> diag;
    std::span<const double> upper;
};

std::size_t step_count(double interval, double dt) {
    const double k = std::ceil(interval / dt - 1e-9);
    return static_cast<std::size_t>(std::max(1.0, k));
}

// Advances p over `interval` under A + shift, renormalizing to unit mass after
// every (sub)step. `on_step(mass, tau)` sees the pre-normalization mass.
template <typename OnStep>
void evolve_interval(const DensityMatrix& a, double shift, double h, std::vector<double>& p,
                     double interval, double dt, bool smoothing, OnStep on_step) {
    if (interval < 0.0 || !std::isfinite(interval)) {
        throw ValidationError("evolution time must be finite and >= 0");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ValidationError("time step must be finite and > 0");
    }
    if (interval == 0.0) return;
    const std::size_t k = step_count(interval, dt);
    const double tau = interval / static_cast<double>(k);
    const double c1 = 0.5 * tau;
    const double c0 = 1.0 - 0.5 * tau * shift;
    const std::size_t n = p.size();

    auto normalize = [&](double sub_tau) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] < -kNegativeTolerance) {
                std::ostringstream msg;
                msg << "time step rejected: density " << p[i] << " at node " << i
                    << "; reduce dt";
                throw NumericalError(msg.str());
            }
            mass += p[i];
        }
        mass *= h;
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            throw NumericalError("evolved density lost all mass");
        }
        for (double& v : p) v /= mass;
        on_step(mass, sub_tau);
    };

    std::size_t done = 0;
    if (smoothing) {
        // Backward Euler with tau/2 uses the same matrix as Crank-Nicolson with tau.
        const std::size_t halves = std::min<std::size_t>(4, 2 * k);
        for (std::size_t j = 0; j < halves; ++j) {
            p = solve_shifted(a.lower, a.diag, a.upper, c0, c1, p);
            normalize(0.5 * tau);
        }
        done = halves / 2;
    }
    std::vector<double> rhs(n);
    for (; done < k; ++done) {
        for (std::size_t i = 0; i < n; ++i) {
            double ap = (a.diag[i] + shift) * p[i];
            if (i > 0) ap += a.lower[i - 1] * p[i - 1];
            if (i + 1 < n) ap += a.upper[i] * p[i + 1];
            rhs[i] = p[i] + c1 * ap;
        }
        p = solve_shifted(a.lower, a.diag, a.upper, c0, c1, rhs);
        normalize(tau);
    }
}

GridMeasure clamp_to_measure(const Grid1D& grid, std::vector<double> p) {
    for (double& v : p) v = std::max(v, 0.0);
    return GridMeasure::from_density(grid, std::move(p));
}

}  // namespace

std::vector<double> TransformedOperator::apply(std::span<const double> f) const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * f[i];
        if (i > 0) s += lower[i - 1] * f[i - 1];
        if (i + 1 < n) s += upper[i] * f[i + 1];
        out[i] = s;
    }
    return out;
}

std::vector<double> TransformedOperator::apply_transpose(std::span<const double> p) const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * p[i];
        if (i > 0) s += upper[i - 1] * p[i - 1];
        if (i + 1 < n) s += lower[i] * p[i + 1];
        out[i] = s;
    }
    return out;
}

double TransformedOperator::symmetry_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < size(); ++i) {
        const double a = beta[i] * upper[i];
        const double b = beta[i + 1] * lower[i];
        const double ref = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
        worst = std::max(worst, std::abs(a - b) / ref);
    }
    return worst;
}

double TransformedOperator::invariance_residual() const {
    const auto r = apply_transpose(beta);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        num = std::max(num, std::abs(r[i]));
        den = std::max(den, std::abs(beta[i]));
    }
    return num / den;
}

GridMeasure TransformedOperator::invariant_measure() const {
    return GridMeasure::from_density(grid, beta);
}

TransformedOperator doob_generator(const TridiagonalOperator& op, const EigenPair& eigen) {
    const std::size_t n = op.size();
    if (eigen.eta.size() != n) {
        throw ValidationError("doob_generator: eigenvector length does not match the operator");
    }
    for (double e : eigen.eta) {
        if (!(e > 0.0)) {
            throw ValidationError("doob_generator: eta must be positive at every interior node");
        }
    }
    const auto& eta = eigen.eta;
    TransformedOperator t(op.grid);
    t.lambda0 = eigen.lambda0;
    t.diag.assign(n, 0.0);
    t.upper.resize(n - 1);
    t.lower.resize(n - 1);
    t.beta.resize(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        t.upper[i] = op.upper[i] * eta[i + 1] / eta[i];
        t.lower[i] = op.lower[i] * eta[i] / eta[i + 1];
        t.diag[i] -= t.upper[i];
        t.diag[i + 1] -= t.lower[i];
    }
    for (std::size_t i = 0; i < n; ++i) t.beta[i] = eta[i] * eta[i] * op.gamma[i];
    return t;
}

double default_time_step(const Grid1D& grid, double lambda0) {
    if (!(lambda0 > 0.0)) {
        throw ValidationError("default_time_step: lambda0 must be > 0");
    }
    return std::min(grid.spacing(), 0.01 / lambda0);
}

GridMeasure evolve_transformed(const TransformedOperator& tilde, const GridMeasure& nu, double t,
                               double dt, bool smoothing) {
    if (!(nu.grid() == tilde.grid)) {
        throw ValidationError("evolve_transformed: measure and operator use different grids");
    }
    if (t == 0.0) return nu;
    std::vector<double> p(nu.density().begin(), nu.density().end());
    // Density side: the transpose swaps the roles of upper and lower.
    const DensityMatrix a{tilde.upper, tilde.diag, tilde.lower};
    double drift = 0.0;
    evolve_interval(a, 0.0, tilde.grid.spacing(), p, t, dt, smoothing, [&](double mass, double) {
        drift = std::max(drift, std::abs(mass - 1.0));
    });
    if (drift > kMassTolerance) {
        std::ostringstream msg;
        msg << "transformed evolution lost mass conservation (drift " << drift << ")";
        throw NumericalError(msg.str());
    }
    return clamp_to_measure(tilde.grid, std::move(p));
}

FlowState continue_flow(const TridiagonalOperator& op, const FlowState& from, double interval,
                        double dt, const FlowOptions& options) {
    if (!(from.mu_t.grid() == op.grid)) {
        throw ValidationError("conditioned_flow: measure and operator use different grids");
    }
    if (interval == 0.0) return from;
    std::vector<double> p(from.mu_t.density().begin(), from.mu_t.density().end());
    const DensityMatrix a{op.upper, op.diag, op.lower};
    double log_survival = from.log_survival;
    evolve_interval(a, options.shift, op.grid.spacing(), p, interval, dt, options.smoothing,
                    [&](double mass, double tau) {
                        log_survival += std::log(mass) - options.shift * tau;
                    });
    if (log_survival < kLogUnderflow) {
        throw NumericalError(
            "survival weight fell below 1e-290; restart the flow from the normalized state");
    }
    return FlowState{from.t + interval, clamp_to_measure(op.grid, std::move(p)),
                     std::exp(log_survival), log_survival, std::nullopt};
}

FlowState conditioned_flow(const TridiagonalOperator& op, const GridMeasure& mu, double t,
                           double dt, const FlowOptions& options) {
    const FlowState start{0.0, mu, 1.0, 0.0, std::nullopt};
    return continue_flow(op, start, t, dt, options);
}

GridMeasure beta_measure(const TridiagonalOperator& op, const EigenPair& eigen) {
    std::vector<double> d(op.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = eigen.eta[i] * eigen.eta[i] * op.gamma[i];
    return GridMeasure::from_density(op.grid, std::move(d));
}

GridMeasure alpha_measure(const TridiagonalOperator& op, const EigenPair& eigen) {
    std::vector<double> d(op.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = eigen.eta[i] * op.gamma[i];
    return GridMeasure::from_density(op.grid, std::move(d));
}

std::vector<FlowState> flow_series(const TridiagonalOperator& op, const GridMeasure& mu,
                                   std::span<const double> times, double dt,
                                   const FlowOptions& options, const EigenPair* eigen) {
    std::vector<FlowState> out;
    out.reserve(times.size());
    std::optional<GridMeasure> beta;
    if (eigen != nullptr) beta = beta_measure(op, *eigen);

    FlowState state{0.0, mu, 1.0, 0.0, std::nullopt};
    bool first = true;
    for (double t : times) {
        if (!(t >= state.t)) {
            throw ValidationError("flow times must be nonnegative and nondecreasing");
        }
        FlowOptions leg = options;
        leg.smoothing = options.smoothing && first && t > 0.0;
        if (t > state.t) {
            state = continue_flow(op, state, t - state.t, dt, leg);
            first = false;
        }
        FlowState snapshot = state;
        if (beta) snapshot.chi2_to_beta = chi2_divergence(tilt(eigen->eta, snapshot.mu_t), *beta);
        out.push_back(std::move(snapshot));
    }
    return out;
}

double checkpoint_residual(const TridiagonalOperator& op, const EigenPair& eigen,
                           const GridMeasure& mu, double t, double dt) {
    FlowOptions matched;
    matched.shift = eigen.lambda0;
    const FlowState flow = conditioned_flow(op, mu, t, dt, matched);
    const GridMeasure left = tilt(eigen.eta, flow.mu_t);
    const GridMeasure right =
        evolve_transformed(doob_generator(op, eigen), tilt(eigen.eta, mu), t, dt);
    return tv_distance(left, right);
}

std::vector<Chi2Point> chi2_decay_curve(const TridiagonalOperator& op, const EigenPair& eigen,
                                        const GridMeasure& mu, std::span<const double> times,
                                        double dt) {
    const auto states = flow_series(op, mu, times, dt, {}, &eigen);
    std::vector<Chi2Point> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back({s.t, *s.chi2_to_beta});
    return out;
}

void write_curves_csv(std::ostream& out, std::span<const CurveRow> rows) {
    out << "t,tv,w1,chi2,survival_weight,log_survival\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.tv, r.w1,
                      r.chi2, r.survival_weight, r.log_survival);
        out << line;
    }
}

}  // namespace qsd
