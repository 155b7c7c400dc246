#include "qsdlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

double gamma_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a[i] * b[i];
    return s;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void scale(std::vector<double>& v, double c) {
    for (double& x : v) x *= c;
}

// Shared inverse-iteration loop. `deflate` (possibly empty) is removed in the
// gamma inner product after every solve.
double inverse_iteration(const TridiagonalOperator& op, std::vector<double>& x,
                         std::span<const double> deflate, const EigenOptions& options,
                         const char* what) {
    const auto& w = op.gamma;
    const double deflate_norm2 = deflate.empty() ? 0.0 : gamma_dot(w, deflate, deflate);
    auto project = [&](std::vector<double>& v) {
        if (deflate.empty()) return;
        const double c = gamma_dot(w, v, deflate) / deflate_norm2;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * deflate[i];
    };
    project(x);
    scale(x, 1.0 / std::sqrt(gamma_dot(w, x, x)));

    // The vector test uses the max norm: small gamma weights would let a
    // weighted norm accept vectors that are still off where V is large.
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double previous_change = std::numeric_limits<double>::infinity();
    for (int it = 0; it < options.max_iterations; ++it) {
        auto y = solve_shifted(op.lower, op.diag, op.upper, 0.0, 1.0, x);
        project(y);
        const double yy = gamma_dot(w, y, y);
        const double next = gamma_dot(w, y, x) / yy;
        scale(y, 1.0 / std::sqrt(yy));
        double change = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) change = std::max(change, std::abs(y[i] - x[i]));
        change /= max_abs(y);
        const bool settled = std::abs(next - lambda) <= options.tolerance * std::abs(next);
        const bool stalled = change <= 1e-9 && change >= 0.5 * previous_change;
        x = std::move(y);
        lambda = next;
        previous_change = change;
        if (settled && (change <= 1e-12 || stalled)) return lambda;
    }
    std::ostringstream msg;
    msg << what << ": inverse iteration did not converge in " << options.max_iterations
        << " iterations";
    throw NumericalError(msg.str());
}

std::vector<double> node_potentials(const PotentialSpec& spec, const Grid1D& grid) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        v[i] = spec.evaluate(grid.node(i)).v;
        if (!std::isfinite(v[i])) {
            throw NumericalError("potential is not finite at an interior node");
        }
    }
    return v;
}

}  // namespace

std::vector<double> TridiagonalOperator::apply(std::span<const double> f) const {
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

std::vector<double> TridiagonalOperator::apply_transpose(std::span<const double> p) const {
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

double TridiagonalOperator::symmetry_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < size(); ++i) {
        const double a = gamma[i] * upper[i];
        const double b = gamma[i + 1] * lower[i];
        const double ref = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
        worst = std::max(worst, std::abs(a - b) / ref);
    }
    return worst;
}

TridiagonalOperator assemble_generator(const PotentialSpec& spec, const Grid1D& grid) {
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    const double c = 1.0 / (2.0 * h * h);

    const auto v = node_potentials(spec, grid);
    std::vector<double> vm(n + 1);  // vm[k] = V at x_min + (k + 1/2) h
    for (std::size_t k = 0; k <= n; ++k) {
        vm[k] = spec.evaluate(grid.x_min() + (static_cast<double>(k) + 0.5) * h).v;
        if (!std::isfinite(vm[k])) {
            throw NumericalError("potential is not finite at a cell midpoint");
        }
    }

    TridiagonalOperator op(grid);
    op.diag.resize(n);
    op.upper.resize(n - 1);
    op.lower.resize(n - 1);
    op.gamma.resize(n);
    op.gamma_shift = *std::min_element(v.begin(), v.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double right = c * std::exp(v[i] - vm[i + 1]);
        const double left = c * std::exp(v[i] - vm[i]);
        op.diag[i] = -(left + right);
        if (i + 1 < n) {
            op.upper[i] = right;
            op.lower[i] = c * std::exp(v[i + 1] - vm[i + 1]);
        }
        op.gamma[i] = std::exp(-(v[i] - op.gamma_shift));
        if (!std::isfinite(op.diag[i])) {
            throw NumericalError("generator coefficients overflow; refine the grid");
        }
    }
    return op;
}

std::vector<double> solve_shifted(std::span<const double> lower, std::span<const double> diag,
                                  std::span<const double> upper, double c0, double c1,
                                  std::span<const double> b) {
    const std::size_t n = diag.size();
    std::vector<double> cp(n);
    std::vector<double> x(n);
    double denom = c0 - c1 * diag[0];
    cp[0] = n > 1 ? -c1 * upper[0] / denom : 0.0;
    x[0] = b[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        const double a = -c1 * lower[i - 1];
        denom = (c0 - c1 * diag[i]) - a * cp[i - 1];
        cp[i] = i + 1 < n ? -c1 * upper[i] / denom : 0.0;
        x[i] = (b[i] - a * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= cp[i] * x[i + 1];
    return x;
}

EigenPair principal_eigenpair(const TridiagonalOperator& op, const EigenOptions& options) {
    const std::size_t n = op.size();
    std::vector<double> x(n, 1.0);
    const double lambda0 = inverse_iteration(op, x, {}, options, "principal_eigenpair");

    if (x[n / 2] < 0.0) scale(x, -1.0);
    double first_moment = 0.0;
    for (std::size_t i = 0; i < n; ++i) first_moment += op.gamma[i] * x[i];
    scale(x, first_moment / gamma_dot(op.gamma, x, x));
    for (double e : x) {
        if (!(e > 0.0)) {
            throw NumericalError("principal eigenvector changes sign; the discretization is faulty");
        }
    }
    if (!(lambda0 > 0.0)) {
        throw NumericalError("principal eigenvalue is not positive");
    }
    EigenPair pair;
    pair.lambda0 = lambda0;
    pair.eta = std::move(x);
    pair.gamma_shift = op.gamma_shift;
    return pair;
}

SpectralGap spectral_gap(const TridiagonalOperator& op, const EigenOptions& options) {
    const EigenPair eigen = solve_eigen(op, options);
    return {eigen.lambda0, *eigen.lambda1};
}

EigenPair solve_eigen(const TridiagonalOperator& op, const EigenOptions& options) {
    EigenPair eigen = principal_eigenpair(op, options);
    const std::size_t n = op.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) - 0.5 * static_cast<double>(n - 1);
    const double lambda1 = inverse_iteration(op, x, eigen.eta, options, "spectral_gap");
    if (!(lambda1 > eigen.lambda0)) {
        throw NumericalError("second eigenvalue does not exceed the first");
    }
    eigen.lambda1 = lambda1;
    return eigen;
}

double eigen_residual(const TridiagonalOperator& op, const EigenPair& eigen) {
    auto r = op.apply(eigen.eta);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += eigen.lambda0 * eigen.eta[i];
    return max_abs(r) / max_abs(eigen.eta);
}

double normalization_defect(const TridiagonalOperator& op, const EigenPair& eigen) {
    double s1 = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) s1 += op.gamma[i] * eigen.eta[i];
    return gamma_dot(op.gamma, eigen.eta, eigen.eta) / s1 - 1.0;
}

GridMeasure qsd_from_eigen(const EigenPair& eigen, const PotentialSpec& spec, const Grid1D& grid) {
    if (eigen.eta.size() != grid.size()) {
        throw ValidationError("eigenvector length does not match the grid");
    }
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        d[i] = eigen.eta[i] * std::exp(-(spec.evaluate(grid.node(i)).v - eigen.gamma_shift));
    }
    return GridMeasure::from_density(grid, std::move(d));
}

GridMeasure beta_from_eigen(const EigenPair& eigen, const PotentialSpec& spec, const Grid1D& grid) {
    if (eigen.eta.size() != grid.size()) {
        throw ValidationError("eigenvector length does not match the grid");
    }
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        d[i] = eigen.eta[i] * eigen.eta[i] *
               std::exp(-(spec.evaluate(grid.node(i)).v - eigen.gamma_shift));
    }
    return GridMeasure::from_density(grid, std::move(d));
}

ProductEigenPair tensor_eigen(std::vector<EigenPair> factors) {
    if (factors.empty()) {
        throw ValidationError("tensor_eigen: empty factor list");
    }
    ProductEigenPair p;
    for (const auto& f : factors) p.lambda0_total += f.lambda0;
    p.factors = std::move(factors);
    return p;
}

IdentityResidual integral_identity_residual(const EigenPair& eigen, const PotentialSpec& spec,
                                            const Grid1D& grid, std::optional<double> probe_max) {
    if (grid.x_min() != 0.0 || !spec.cdfi()) {
        throw ValidationError(
            "integral identity needs a process coming down from infinity on (0, x_max)");
    }
    const std::size_t n = grid.size();
    if (eigen.eta.size() != n) {
        throw ValidationError("eigenvector length does not match the grid");
    }
    const double h = grid.spacing();
    const double l0 = eigen.lambda0;
    const auto& eta = eigen.eta;
    const double limit = probe_max.value_or(grid.x_min() + 0.75 * (grid.x_max() - grid.x_min()));

    std::vector<double> v(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = spec.evaluate(grid.node(i)).v;
        f[i] = eta[i] * std::exp(-v[i]);
    }

    // head[i] = int_0^{x_i} y f(y) dy, tail[i] = int_{x_i}^{x_max} f.
    std::vector<double> head(n), tail(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        head[i] = h * (acc + 0.5 * grid.node(i) * f[i]);
        acc += grid.node(i) * f[i];
    }
    acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        tail[i] = h * (acc + 0.5 * f[i]);
        acc += f[i];
    }

    // Scale function s' = e^V kept as sigma = s e^{-V} to avoid overflow.
    std::vector<double> sigma(n), scaled_tail(n);
    const double v0 = spec.evaluate(grid.x_min()).v;
    sigma[0] = 0.5 * h * (std::exp(v0 - v[0]) + 1.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double r = std::exp(v[i - 1] - v[i]);
        sigma[i] = sigma[i - 1] * r + 0.5 * h * (r + 1.0);
    }
    // scaled_tail[i] = h sum_{j >= i} eta_j e^{V_i - V_j}
    scaled_tail[n - 1] = h * eta[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        scaled_tail[i] = h * eta[i] + std::exp(v[i] - v[i + 1]) * scaled_tail[i + 1];
    }

    auto ghost = [&](std::ptrdiff_t i) {
        return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : eta[static_cast<std::size_t>(i)];
    };
    std::vector<double> d1(n), d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::ptrdiff_t>(i);
        d1[i] = (ghost(k + 1) - ghost(k - 1)) / (2.0 * h);
        d2[i] = (ghost(k + 1) - 2.0 * eta[i] + ghost(k - 1)) / (h * h);
    }

    const double eta_sup = max_abs(eta);
    const double d1_sup = max_abs(d1);
    const double d2_sup = max_abs(d2);
    IdentityResidual r;
    r.probe_max = limit;
    double scale_head = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.node(i);
        const double scale_part = h * (scale_head + 0.5 * sigma[i] * eta[i]) +
                                  sigma[i] * (scaled_tail[i] - 0.5 * h * eta[i]);
        scale_head += sigma[i] * eta[i];
        if (x > limit) break;
        const double kernel = 4.0 * l0 * (head[i] + x * tail[i]);
        r.kernel = std::max(r.kernel, std::abs(eta[i] - kernel) / eta_sup);
        r.first = std::max(r.first, std::abs(d1[i] - 4.0 * l0 * tail[i]) / d1_sup);
        r.second = std::max(r.second, std::abs(d2[i] + 4.0 * l0 * f[i]) / d2_sup);
        r.scale_kernel = std::max(r.scale_kernel, std::abs(eta[i] - 2.0 * l0 * scale_part) / eta_sup);
    }
    return r;
}

void write_eigen_json(std::ostream& out, const EigenPair& eigen) {
    nlohmann::ordered_json j;
    j["lambda0"] = eigen.lambda0;
    j["lambda1"] = eigen.lambda1 ? nlohmann::ordered_json(*eigen.lambda1) : nlohmann::ordered_json();
    j["normalization"] = eigen.normalization;
    j["gamma_shift"] = eigen.gamma_shift;
    out << j.dump(2) << "\n";
}

void write_eta_csv(std::ostream& out, const EigenPair& eigen, const Grid1D& grid) {
    out << "x,eta\n";
    char line[96];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", grid.node(i), eigen.eta[i]);
        out << line;
    }
}

}  // namespace qsd
