// Acceptance checks: one PASS/FAIL line per criterion.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qsdlab/analytics.hpp"
#include "qsdlab/doob.hpp"
#include "qsdlab/montecarlo.hpp"
#include "qsdlab/spectral.hpp"
#include "support.hpp"

using namespace qsd;
using qsdtest::kPi;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Detail {
public:
    template <class T>
    Detail& add(const char* name, T value) {
        if (!s_.str().empty()) s_ << ", ";
        s_ << name << "=" << value;
        return *this;
    }
    std::string str() const { return s_.str(); }

private:
    std::ostringstream s_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double sup_rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome brownian_eigenpair() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid1D g = build_grid(-1.0, 1.0, 3999);
    const auto e = solve_eigen(assemble_generator(PotentialSpec::zero(), g));
    const double secs = seconds_since(t0);
    double eta_err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        eta_err = std::max(eta_err, std::abs(e.eta[i] - 4 / kPi * std::cos(kPi * g.node(i) / 2)));
    }
    const double l0 = sup_rel(e.lambda0, kPi * kPi / 8);
    const double gap = sup_rel(*e.lambda1 - e.lambda0, 3 * kPi * kPi / 8);
    Detail d;
    d.add("lambda0_rel", l0).add("gap_rel", gap).add("eta_sup", eta_err).add("seconds", secs);
    return {l0 <= 1e-5 && gap <= 1e-4 && eta_err <= 1e-4 && secs < 5.0, d.str()};
}

Outcome ou_eigenpair() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid1D g = build_grid(0.0, 8.0, 7999);
    const auto op = assemble_generator(PotentialSpec::quadratic(1.0), g);
    const auto e = principal_eigenpair(op);
    const auto alpha = alpha_measure(op, e);
    const double secs = seconds_since(t0);
    const double ref = e.eta[999] / g.node(999);
    double eta_err = 0.0, alpha_err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        if (x >= 0.1 && x <= 4.0) eta_err = std::max(eta_err, std::abs(e.eta[i] / x - ref) / ref);
        alpha_err = std::max(alpha_err, std::abs(alpha[i] - 2 * x * std::exp(-x * x)));
    }
    const double l0 = std::abs(e.lambda0 - 1.0);
    Detail d;
    d.add("lambda0_err", l0).add("eta_rel", eta_err).add("alpha_sup", alpha_err).add("seconds", secs);
    return {l0 <= 1e-3 && eta_err <= 1e-3 && alpha_err <= 1e-3 && secs < 5.0, d.str()};
}

Outcome constants() {
    bool ok = true;
    Detail d;
    for (double N : {1.0, 2.0}) {
        const Grid1D g = build_grid(-N, N, 3999);
        const auto cf = closed_form(ExampleId::brownian_hypercube, {N, 1.0, 1}, g);
        const auto bc = bound_constants(std::vector<double>(g.size(), 1.0), cf.eigen, cf.alpha);
        const double err = std::abs(bc.alpha_psi2_over_eta - kPi * kPi / 8);
        ok = ok && err <= 1e-6;
        d.add(N == 1.0 ? "alpha_inv_eta_err_N1" : "alpha_inv_eta_err_N2", err);
    }
    const double a_err = std::abs(bound_a() - (1 + 1 / (1 - std::sqrt(0.9))));
    const double b_err = std::abs(bound_b() - 19.486832980505138);
    ok = ok && a_err <= 1e-12 && b_err <= 1e-12 && std::abs(bound_a() - 20.486832980505138) <= 1e-12;
    d.add("a", bound_a()).add("b", bound_b());
    return {ok, d.str()};
}

Outcome checkpoint_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int example = 0; example < 2; ++example) {
        const Grid1D g = example == 0 ? build_grid(-1.0, 1.0, 999) : build_grid(0.0, 8.0, 1999);
        const auto spec = example == 0 ? PotentialSpec::zero() : PotentialSpec::quadratic(1.0);
        const auto op = assemble_generator(spec, g);
        const auto e = principal_eigenpair(op);
        const double mid = 0.5 * (g.x_min() + g.x_max());
        const double w = g.x_max() - g.x_min();
        std::vector<double> bimodal(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.node(i);
            bimodal[i] = std::exp(-std::pow((x - g.x_min() - 0.25 * w) / (0.08 * w), 2)) +
                         0.5 * std::exp(-std::pow((x - g.x_min() - 0.7 * w) / (0.1 * w), 2));
        }
        const std::vector<GridMeasure> inits = {qsdtest::uniform_measure(g),
                                                qsdtest::gaussian_measure(g, mid + 0.1 * w, 0.15 * w),
                                                GridMeasure::from_density(g, bimodal)};
        const double dt = default_time_step(g, e.lambda0);
        for (const auto& mu : inits) {
            for (double t : {0.1, 0.5, 1.0, 2.0}) {
                worst = std::max(worst, checkpoint_residual(op, e, mu, t, dt));
            }
        }
    }
    const double secs = seconds_since(t0);
    Detail d;
    d.add("max_residual", worst).add("cases", 24).add("seconds", secs);
    return {worst <= 1e-8 && secs < 30.0, d.str()};
}

DecayConfig brownian_report_config() {
    DecayConfig c;
    c.id = "brownian";
    c.spec = PotentialSpec::zero();
    c.grid = build_grid(-1.0, 1.0, 999);
    c.initial = qsdtest::gaussian_measure(c.grid, 0.4, 0.3);
    c.kappa_closed_form = std::pow(kPi / 2, 2);
    return c;
}

DecayConfig ou_report_config() {
    DecayConfig c;
    c.id = "ou";
    c.spec = PotentialSpec::quadratic(1.0);
    c.grid = build_grid(0.0, 8.0, 1599);
    c.initial = qsdtest::gaussian_measure(c.grid, 1.5, 0.5);
    c.kappa_closed_form = 2.0;
    return c;
}

Outcome chi2_decay() {
    const auto r = decay_report(brownian_report_config());
    double worst = 0.0;
    const double c0 = r.chi2.front();
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double bound = std::exp(-2 * r.gap * r.times[k]) * c0 * c0 * (1 + 1e-4);
        worst = std::max(worst, r.chi2[k] * r.chi2[k] / bound);
    }
    Detail d;
    d.add("max_ratio_to_bound", worst).add("fitted_chi2_rate", r.fit_chi2.rate).add("gap", r.gap);
    return {worst <= 1.0 && std::abs(r.fit_chi2.rate - r.gap) <= 0.02, d.str()};
}

Outcome bound_shape() {
    bool ok = true;
    Detail d;
    for (const auto& cfg : {brownian_report_config(), ou_report_config()}) {
        const auto r = decay_report(cfg);
        const double kappa = *cfg.kappa_closed_form;
        double worst = 0.0;
        for (std::size_t k = 0; k < r.times.size(); ++k) {
            if (r.times[k] < r.burn_in_time) continue;
            const double bound = r.tv_constants.c_psi * r.chi2_initial * std::exp(-kappa * r.times[k]);
            worst = std::max(worst, r.tv[k] / bound);
        }
        ok = ok && worst <= 1.0 && r.fit_tv.rate >= kappa && r.burn_in_reached;
        d.add((cfg.id + "_max_ratio").c_str(), worst)
            .add((cfg.id + "_fitted_tv_rate").c_str(), r.fit_tv.rate)
            .add((cfg.id + "_kappa").c_str(), kappa);
    }
    return {ok, d.str()};
}

Outcome kappa_tilde() {
    const auto spec = PotentialSpec::shifted_power(3.0);
    const Grid1D g = build_grid(0.0, 2.3, 4599);
    const double basic = cdfi_rate(spec, 1.0, g, CdfiForm::basic).value;
    const double refined = cdfi_rate(spec, 1.0, g, CdfiForm::refined).value;

    // Residual at a fixed probe window while the domain grows at fixed h.
    const double h = g.spacing();
    std::vector<double> kernel, scale;
    for (double x_max : {1.9, 2.3, 2.7}) {
        const auto n = static_cast<std::size_t>(std::lround(x_max / h)) - 1;
        const Grid1D gx = build_grid(0.0, x_max, n);
        const auto ex = principal_eigenpair(assemble_generator(spec, gx));
        const auto r = integral_identity_residual(ex, spec, gx, 1.4);
        kernel.push_back(r.kernel);
        scale.push_back(r.scale_kernel);
    }
    const bool decreasing = kernel[1] <= kernel[0] && kernel[2] <= kernel[1];

    DecayConfig c;
    c.id = "shifted-power";
    c.spec = spec;
    c.grid = build_grid(0.0, 2.3, 919);
    c.initial = qsdtest::gaussian_measure(c.grid, 0.6, 0.25);
    c.lambda0_lower = 1.0;
    const auto r = decay_report(c);

    Detail d;
    d.add("kappa_tilde_basic", basic)
        .add("kappa_tilde_refined", refined)
        .add("kernel_residual", kernel[1])
        .add("kernel_residual_trend", std::to_string(kernel[0]) + ">" + std::to_string(kernel[1]) + ">" +
                                          std::to_string(kernel[2]))
        .add("scale_kernel_residual", scale[1])
        .add("fitted_tv_rate", r.fit_tv.rate);
    const bool ok = refined >= basic && basic >= 6.0 && kernel[1] <= 5e-3 && decreasing &&
                    r.fit_tv.rate >= refined - 0.05;
    return {ok, d.str()};
}

Outcome tensorization() {
    bool ok = true;
    Detail d;
    std::vector<DecayConfig> factors = {ou_report_config(), ou_report_config()};
    factors[1].initial = qsdtest::gaussian_measure(factors[1].grid, 2.0, 0.7);
    const auto pr = product_report(factors);
    const double l0_err = std::abs(pr.lambda0_total - (pr.factors[0].lambda0 + pr.factors[1].lambda0));
    ok = ok && l0_err <= 1e-12 && pr.additive_bound_holds;

    qsdtest::Gen gen(8);
    const Grid1D g1 = build_grid(-1.0, 1.0, 301);
    const Grid1D g2 = build_grid(0.0, 4.0, 451);
    const auto m1 = qsdtest::random_measure(gen, g1), n1 = qsdtest::random_measure(gen, g1);
    const auto m2 = qsdtest::random_measure(gen, g2), n2 = qsdtest::random_measure(gen, g2);
    const double w_err = std::abs(w1_distance(ProductGridMeasure({m1, m2}), ProductGridMeasure({n1, n2})) -
                                  (w1_distance(m1, n1) + w1_distance(m2, n2)));
    ok = ok && w_err <= 1e-12;
    d.add("lambda0_total_err", l0_err).add("w1_identity_err", w_err).add("summed_chi2_bound_holds", pr.additive_bound_holds);
    return {ok, d.str()};
}

Outcome monte_carlo() {
    const Grid1D g = build_grid(-1.0, 1.0, 999);
    const auto mu = qsdtest::uniform_measure(g);
    const auto op = assemble_generator(PotentialSpec::zero(), g);
    const Grid1D coarse = build_grid(-1.0, 1.0, 5);
    const auto oracle = rebin(conditioned_flow(op, mu, 1.0, 1e-3).mu_t, coarse);

    SimConfig c;
    c.potentials = {PotentialSpec::zero()};
    c.domain = {{-1.0, 1.0}};
    c.dt = 1e-3;
    c.horizon = 1.0;
    c.n_particles = 100000;
    c.seed = 2024;
    const auto t0 = std::chrono::steady_clock::now();
    const auto ens = simulate(c, mu);
    const double secs = seconds_since(t0);
    const double tv = tv_distance(conditioned_empirical(ens, coarse), oracle);

    SimConfig fv = c;
    fv.resample = true;
    const auto fens = simulate(fv, mu);
    const double l0 = estimate_lambda0(fens.survival);
    const double l0_rel = sup_rel(l0, kPi * kPi / 8);

    c.threads = 1;
    const auto again = simulate(c, mu);
    const bool identical = again.positions == ens.positions && again.ids == ens.ids &&
                           again.log_survival_estimate == ens.log_survival_estimate;

    Detail d;
    d.add("tv", tv).add("lambda0_estimate", l0).add("lambda0_rel", l0_rel).add("seconds", secs).add("identical", identical);
    return {tv <= 0.02 && l0_rel <= 5e-2 && secs < 60.0 && identical, d.str()};
}

Outcome log_concavity() {
    double worst = -1e300;
    struct Case {
        PotentialSpec spec;
        Grid1D grid;
    };
    const std::vector<Case> cases = {{PotentialSpec::zero(), build_grid(-1.0, 1.0, 1999)},
                                     {PotentialSpec::quadratic(1.0), build_grid(0.0, 8.0, 3999)},
                                     {PotentialSpec::shifted_power(3.0), build_grid(0.0, 2.3, 2299)}};
    for (const auto& c : cases) {
        const auto e = principal_eigenpair(assemble_generator(c.spec, c.grid));
        const auto s = log_second_difference(e.eta, c.grid);
        for (std::size_t i = 1; i + 1 < s.size(); ++i) worst = std::max(worst, s[i]);
    }
    Detail d;
    d.add("max_log_eta_second_difference", worst);
    return {worst <= 1e-8, d.str()};
}

std::pair<double, double> dense_pair(const TridiagonalOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        S(i, i) = -op.diag[i];
        if (i + 1 < n) {
            const double r = std::sqrt(op.gamma[i] / op.gamma[i + 1]);
            S(i, i + 1) = -op.upper[i] * r;
            S(i + 1, i) = -op.lower[i] / r;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(1)};
}

GridMeasure matrix_exponential_flow(const TridiagonalOperator& op, const GridMeasure& mu, double t) {
    const auto n = static_cast<Eigen::Index>(op.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd root(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        root(i) = std::sqrt(op.gamma[i]);
        S(i, i) = op.diag[i];
        if (i + 1 < n) {
            const double r = std::sqrt(op.gamma[i] / op.gamma[i + 1]);
            S(i, i + 1) = op.upper[i] * r;
            S(i + 1, i) = op.lower[i] / r;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    const Eigen::VectorXd ex = (t * es.eigenvalues().array()).exp();
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = mu[static_cast<std::size_t>(i)] / root(i);
    const Eigen::VectorXd q =
        root.asDiagonal() * (es.eigenvectors() * (ex.asDiagonal() * (es.eigenvectors().transpose() * p)));
    std::vector<double> d(op.size());
    for (Eigen::Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = std::max(q(i), 0.0);
    return GridMeasure::from_density(op.grid, std::move(d));
}

Outcome small_n_oracles() {
    double worst = 0.0;
    const std::vector<std::pair<PotentialSpec, std::pair<double, double>>> cases = {
        {PotentialSpec::zero(), {-1.0, 1.0}},
        {PotentialSpec::quadratic(1.0), {0.0, 4.0}},
        {PotentialSpec::quadratic(3.0), {-1.0, 2.0}},
        {PotentialSpec::shifted_power(3.0), {0.0, 2.0}}};
    for (const auto& [spec, range] : cases) {
        for (std::size_t n : {3, 5, 10, 17, 31, 45, 60}) {
            const auto op = assemble_generator(spec, build_grid(range.first, range.second, n));
            const auto e = solve_eigen(op);
            const auto [d0, d1] = dense_pair(op);
            worst = std::max({worst, std::abs(e.lambda0 - d0) / std::max(1.0, d0),
                              std::abs(*e.lambda1 - d1) / std::max(1.0, d1)});
        }
    }
    const Grid1D g = build_grid(-1.0, 1.0, 200);
    const auto op = assemble_generator(PotentialSpec::zero(), g);
    const auto mu = qsdtest::uniform_measure(g);
    const auto cn = conditioned_flow(op, mu, 1.0, default_time_step(g, principal_eigenpair(op).lambda0));
    const double tv = tv_distance(cn.mu_t, matrix_exponential_flow(op, mu, 1.0));
    Detail d;
    d.add("max_eigenvalue_rel_err", worst).add("cn_vs_expm_tv", tv);
    return {worst <= 1e-10 && tv <= 1e-6, d.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Brownian eigenpair", brownian_eigenpair},
        {"OU eigenpair", ou_eigenpair},
        {"bound constants", constants},
        {"checkpoint identity", checkpoint_identity},
        {"chi2 decay", chi2_decay},
        {"TV bound shape", bound_shape},
        {"kappa tilde improvement", kappa_tilde},
        {"tensorization", tensorization},
        {"Monte Carlo cross-validation", monte_carlo},
        {"log-concavity of eta", log_concavity},
        {"small-n oracle equivalence", small_n_oracles},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
