#include "qsdlab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

using nlohmann::ordered_json;

constexpr double kFitFloor = 1e-12;
constexpr double kBoundSlack = 1e-3;

ordered_json optional_json(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json();
}

ordered_json fit_json(const RateFit& f) {
    ordered_json j;
    j["rate"] = f.rate;
    j["intercept"] = f.intercept;
    j["r_squared"] = f.r_squared;
    j["points"] = f.points;
    return j;
}

ordered_json constants_json(const BoundConstants& c) {
    ordered_json j;
    j["a"] = c.a;
    j["b"] = c.b;
    j["c_psi"] = c.c_psi;
    j["alpha_psi"] = c.alpha_psi;
    j["alpha_psi2_over_eta"] = c.alpha_psi2_over_eta;
    j["p3_finite"] = c.p3_finite;
    return j;
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Fit restricted to the window with values at or above the noise floor.
RateFit floored_fit(const std::vector<double>& times, const std::vector<double>& values,
                    double from, double to, const char* name, std::vector<std::string>& notes) {
    std::vector<double> t, v;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < from || times[i] > to) continue;
        if (!(values[i] >= kFitFloor) || !std::isfinite(values[i])) continue;
        t.push_back(times[i]);
        v.push_back(values[i]);
    }
    try {
        return fit_decay_rate(t, v, from, to);
    } catch (const ValidationError& e) {
        notes.push_back(std::string(name) + " rate not fitted: " + e.what());
        RateFit none;
        none.rate = std::numeric_limits<double>::quiet_NaN();
        return none;
    }
}

}  // namespace

ClosedForm closed_form(ExampleId id, const ClosedFormParams& params, const Grid1D& grid) {
    if (params.d < 1) {
        throw ValidationError("closed form: dimension d must be >= 1");
    }
    const double pi = std::numbers::pi;
    const auto d = static_cast<double>(params.d);
    const std::size_t n = grid.size();
    EigenPair eigen;
    std::vector<double> alpha(n);
    ClosedFormConstants c;
    PotentialSpec spec = PotentialSpec::zero();

    if (id == ExampleId::brownian_hypercube) {
        const double N = params.N;
        if (!(N > 0.0) || !std::isfinite(N)) {
            throw ValidationError("closed form: N must be > 0");
        }
        if (!near(grid.x_min(), -N) || !near(grid.x_max(), N)) {
            throw ValidationError("closed form: Brownian grid must span [-N, N]");
        }
        eigen.eta.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double cs = std::cos(pi * grid.node(i) / (2.0 * N));
            eigen.eta[i] = 4.0 / pi * cs;
            alpha[i] = pi / (4.0 * N) * cs;
        }
        c.lambda0_1d = pi * pi / (8.0 * N * N);
        c.kappa = std::pow(pi / (2.0 * N), 2);
        c.gap = 3.0 / 8.0 * std::pow(pi / N, 2);
        c.alpha_inv_eta = std::pow(pi * pi / 8.0, d);
    } else {
        const double l = params.lambda;
        spec = PotentialSpec::quadratic(l);
        if (grid.x_min() != 0.0) {
            throw ValidationError("closed form: OU grid must start at 0");
        }
        eigen.eta.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.node(i);
            eigen.eta[i] = 2.0 * std::sqrt(l / pi) * x;
            alpha[i] = 2.0 * l * x * std::exp(-l * x * x);
        }
        c.lambda0_1d = l;
        c.kappa = 2.0 * l;
        c.gap = 2.0 * l;
        c.alpha_inv_eta = std::pow(pi / 2.0, d);
        if (params.d >= 2) c.prefactor_cd = d * (d - 1.0) / (4.0 * l) * std::pow(pi / 2.0, d);
    }
    c.lambda0 = d * c.lambda0_1d;
    eigen.lambda0 = c.lambda0_1d;
    eigen.lambda1 = c.lambda0_1d + c.gap;
    eigen.gamma_shift = 0.0;
    eigen.normalization = "closed form, gamma(eta^2)=gamma(eta)";
    return ClosedForm{id, params, spec, std::move(eigen),
                      GridMeasure::from_density(grid, std::move(alpha)), c};
}

BoundConstants bound_constants(std::span<const double> psi, const EigenPair& eigen,
                               const GridMeasure& alpha) {
    const std::size_t n = alpha.size();
    if (psi.size() != n || eigen.eta.size() != n) {
        throw ValidationError("bound_constants: array lengths do not match the grid");
    }
    const Grid1D& g = alpha.grid();
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(psi[i] >= 1.0)) throw ValidationError("bound_constants: psi must be >= 1");
        if (!(eigen.eta[i] > 0.0)) throw ValidationError("bound_constants: eta must be positive");
        tmp[i] = eigen.eta[i] * alpha[i];
    }
    const double alpha_eta = quadrature(tmp, g);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] * alpha[i];
    BoundConstants c;
    c.a = bound_a();
    c.b = bound_b();
    c.alpha_psi = quadrature(tmp, g);
    for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = psi[i] * psi[i] * alpha[i] * alpha_eta / eigen.eta[i];
    }
    c.alpha_psi2_over_eta = quadrature_extrapolated(tmp, g);
    c.p3_finite = std::isfinite(c.alpha_psi2_over_eta) && c.alpha_psi2_over_eta > 0.0;
    c.c_psi = (c.a + c.b * c.alpha_psi) * std::sqrt(c.alpha_psi2_over_eta);
    return c;
}

BurnIn burn_in_from_curve(std::span<const double> times, std::span<const double> chi2,
                          double alpha_psi2_over_eta) {
    if (times.size() != chi2.size() || times.empty()) {
        throw ValidationError("burn_in: times and chi2 must be nonempty and of equal length");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (std::isfinite(chi2[i]) && alpha_psi2_over_eta * chi2[i] * chi2[i] < 0.9) {
            return {times[i], true};
        }
    }
    return {times.back(), false};
}

BurnIn burn_in_time(const TridiagonalOperator& op, const EigenPair& eigen,
                    std::span<const double> psi, const GridMeasure& mu, double horizon,
                    double step, double dt) {
    if (!(horizon >= 0.0) || !(step > 0.0)) {
        throw ValidationError("burn_in_time: horizon must be >= 0 and step > 0");
    }
    const GridMeasure alpha = alpha_measure(op, eigen);
    const BoundConstants c = bound_constants(psi, eigen, alpha);
    std::vector<double> times;
    const auto count = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
    for (std::size_t k = 0; k <= count; ++k) {
        times.push_back(std::min(horizon, static_cast<double>(k) * step));
    }
    const auto curve = chi2_decay_curve(op, eigen, mu, times, dt);
    std::vector<double> chi2;
    for (const auto& p : curve) chi2.push_back(p.chi2);
    return burn_in_from_curve(times, chi2, c.alpha_psi2_over_eta);
}

RateFit fit_decay_rate(std::span<const double> times, std::span<const double> values, double from,
                       double to) {
    if (times.size() != values.size()) {
        throw ValidationError("fit_decay_rate: times and values differ in length");
    }
    std::vector<double> t, y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < from || times[i] > to) continue;
        if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
            std::ostringstream msg;
            msg << "fit_decay_rate: nonpositive value " << values[i] << " at t = " << times[i];
            throw ValidationError(msg.str());
        }
        t.push_back(times[i]);
        y.push_back(std::log(values[i]));
    }
    if (t.size() < 5) {
        throw ValidationError("fit_decay_rate: fewer than 5 points in the window");
    }
    const auto m = static_cast<double>(t.size());
    double st = 0, sy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
    }
    const double tm = st / m;
    const double ym = sy / m;
    double stt = 0, sty = 0, syy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (!(stt > 0.0)) {
        throw ValidationError("fit_decay_rate: window has a single distinct time");
    }
    const double slope = sty / stt;
    RateFit fit;
    fit.rate = -slope;
    fit.intercept = ym - slope * tm;
    const double ss_res = std::max(0.0, syy - slope * sty);
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.points = t.size();
    return fit;
}

DecayReport decay_report(const DecayConfig& config) {
    if (!(config.initial.grid() == config.grid)) {
        throw ValidationError("decay_report: initial law is not on the report grid");
    }
    if (config.samples < 2) {
        throw ValidationError("decay_report: need at least 2 time samples");
    }
    DecayReport r;
    r.id = config.id;
    const Grid1D& grid = config.grid;
    const TridiagonalOperator op = assemble_generator(config.spec, grid);
    const EigenPair eigen = solve_eigen(op);
    r.lambda0 = eigen.lambda0;
    r.lambda1 = *eigen.lambda1;
    r.gap = r.lambda1 - r.lambda0;

    const double dt = config.dt > 0.0 ? config.dt : default_time_step(grid, eigen.lambda0);
    const double t_max = config.t_max > 0.0 ? config.t_max : 3.5 / r.gap;
    for (std::size_t k = 0; k < config.samples; ++k) {
        r.times.push_back(t_max * static_cast<double>(k) / static_cast<double>(config.samples - 1));
    }

    const GridMeasure alpha = alpha_measure(op, eigen);
    const auto states = flow_series(op, config.initial, r.times, dt, {}, &eigen);
    for (const auto& s : states) {
        r.tv.push_back(tv_distance(s.mu_t, alpha));
        r.w1.push_back(w1_distance(s.mu_t, alpha));
        r.chi2.push_back(*s.chi2_to_beta);
        r.survival_weight.push_back(s.survival_weight);
        r.log_survival.push_back(s.log_survival);
    }

    const auto w2 = effective_second_derivative(config.spec, eigen, grid);
    const Infimum inf_w = be_constant(w2);
    r.w_second_infimum = inf_w.value;
    r.w_second_argmin_x = grid.node(inf_w.index);
    r.kappa = 0.5 * inf_w.value;
    r.kappa_closed_form = config.kappa_closed_form;
    r.prefactor_cd = config.prefactor_cd;

    if (config.spec.cdfi()) {
        const double l0 = config.lambda0_lower.value_or(eigen.lambda0);
        const CdfiRate basic = cdfi_rate(config.spec, l0, grid, CdfiForm::basic,
                                         config.cdfi_probe_min, config.cdfi_probe_max);
        r.kappa_tilde_basic = basic.value;
        r.kappa_tilde_argmin_x = basic.x;
        try {
            r.kappa_tilde_refined = cdfi_rate(config.spec, l0, grid, CdfiForm::refined,
                                              config.cdfi_probe_min, config.cdfi_probe_max)
                                        .value;
        } catch (const ValidationError& e) {
            r.notes.push_back(std::string("refined kappa_tilde unavailable: ") + e.what());
        }
    }

    std::size_t mode = 0;
    for (std::size_t i = 1; i < alpha.size(); ++i) {
        if (alpha[i] > alpha[mode]) mode = i;
    }
    r.x0 = config.x0.value_or(grid.node(mode));
    std::vector<double> ones(grid.size(), 1.0);
    std::vector<double> dist(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) dist[i] = 1.0 + std::abs(grid.node(i) - r.x0);
    r.tv_constants = bound_constants(ones, eigen, alpha);
    r.w1_constants = bound_constants(dist, eigen, alpha);
    r.chi2_initial = chi2_divergence(tilt(eigen.eta, config.initial), beta_measure(op, eigen));

    const BurnIn b1 = burn_in_from_curve(r.times, r.chi2, r.tv_constants.alpha_psi2_over_eta);
    const BurnIn b2 = burn_in_from_curve(r.times, r.chi2, r.w1_constants.alpha_psi2_over_eta);
    r.burn_in_time = std::max(b1.t, b2.t);
    r.burn_in_reached = b1.reached && b2.reached;
    if (!r.burn_in_reached) {
        r.notes.push_back("burn-in threshold 0.9 not reached within the sampled horizon");
    }

    r.window_from = config.window_from.value_or(std::max(r.burn_in_time, 0.5 / r.gap));
    r.window_to = config.window_to.value_or(3.0 / r.gap);
    r.fit_tv = floored_fit(r.times, r.tv, r.window_from, r.window_to, "tv", r.notes);
    r.fit_w1 = floored_fit(r.times, r.w1, r.window_from, r.window_to, "w1", r.notes);
    r.fit_chi2 = floored_fit(r.times, r.chi2, r.window_from, r.window_to, "chi2", r.notes);

    r.bound_rate = config.kappa_closed_form.value_or(r.gap);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        if (!r.burn_in_reached || r.times[i] < r.burn_in_time) continue;
        const double decay = r.chi2_initial * std::exp(-r.bound_rate * r.times[i]) * (1.0 + kBoundSlack);
        if (r.tv[i] > r.tv_constants.c_psi * decay) r.tv_bound_holds = false;
        if (r.w1[i] > r.w1_constants.c_psi * decay) r.w1_bound_holds = false;
    }
    r.notes.push_back("eta is the tensor eigenfunction; the constant is the explicit "
                      "(a + b alpha(psi)) alpha(psi^2/eta)^{1/2}, not the unspecified C");
    return r;
}

ProductReport product_report(std::span<const DecayConfig> factors) {
    if (factors.empty()) {
        throw ValidationError("product_report: no factors");
    }
    ProductReport p;
    p.kappa = std::numeric_limits<double>::infinity();
    bool all_cdfi = true;
    double kt_min = std::numeric_limits<double>::infinity();
    for (const auto& cfg : factors) {
        p.factors.push_back(decay_report(cfg));
        const DecayReport& r = p.factors.back();
        if (!p.times.empty() && r.times != p.times) {
            throw ValidationError("product_report: factors use different time samples");
        }
        p.times = r.times;
        p.lambda0_total += r.lambda0;
        p.kappa = std::min(p.kappa, r.bound_rate);
        p.c_max = std::max(p.c_max, r.w1_constants.c_psi);
        p.chi2_sum += r.chi2_initial;
        p.burn_in_time = std::max(p.burn_in_time, r.burn_in_time);
        if (r.kappa_tilde_basic) {
            kt_min = std::min(kt_min, r.kappa_tilde_refined.value_or(*r.kappa_tilde_basic));
        } else {
            all_cdfi = false;
        }
    }
    if (all_cdfi) p.kappa_tilde_min = kt_min;
    p.w1_sum.assign(p.times.size(), 0.0);
    for (const auto& r : p.factors) {
        for (std::size_t i = 0; i < p.times.size(); ++i) p.w1_sum[i] += r.w1[i];
    }
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        p.bound.push_back(p.c_max * p.chi2_sum * std::exp(-p.kappa * p.times[i]));
        if (p.times[i] >= p.burn_in_time && p.w1_sum[i] > p.bound[i] * (1.0 + kBoundSlack)) {
            p.additive_bound_holds = false;
        }
    }
    return p;
}

namespace {

ordered_json report_to_json(const DecayReport& r) {
    ordered_json j;
    j["id"] = r.id;
    j["lambda0"] = r.lambda0;
    j["lambda1"] = r.lambda1;
    j["gap"] = r.gap;
    j["kappa"] = r.kappa;
    j["w_second_infimum"] = r.w_second_infimum;
    j["w_second_argmin_x"] = r.w_second_argmin_x;
    j["kappa_closed_form"] = optional_json(r.kappa_closed_form);
    j["kappa_tilde_basic"] = optional_json(r.kappa_tilde_basic);
    j["kappa_tilde_refined"] = optional_json(r.kappa_tilde_refined);
    j["kappa_tilde_argmin_x"] = optional_json(r.kappa_tilde_argmin_x);
    j["burn_in_time"] = r.burn_in_time;
    j["burn_in_reached"] = r.burn_in_reached;
    j["window"] = {r.window_from, r.window_to};
    j["fitted_rate_tv"] = fit_json(r.fit_tv);
    j["fitted_rate_w1"] = fit_json(r.fit_w1);
    j["fitted_rate_chi2"] = fit_json(r.fit_chi2);
    j["x0"] = r.x0;
    j["bound_constants_tv"] = constants_json(r.tv_constants);
    j["bound_constants_w1"] = constants_json(r.w1_constants);
    j["bound_constant"] = r.tv_constants.c_psi;
    j["chi2_initial"] = r.chi2_initial;
    j["bound_rate"] = r.bound_rate;
    j["tv_bound_holds"] = r.tv_bound_holds;
    j["w1_bound_holds"] = r.w1_bound_holds;
    j["prefactor_Cd"] = optional_json(r.prefactor_cd);
    j["times"] = r.times;
    j["tv"] = r.tv;
    j["w1"] = r.w1;
    j["chi2"] = r.chi2;
    j["survival_weight"] = r.survival_weight;
    j["log_survival"] = r.log_survival;
    j["notes"] = r.notes;
    return j;
}

}  // namespace

void write_report_json(std::ostream& out, const DecayReport& report) {
    out << report_to_json(report).dump(2) << "\n";
}

void write_product_report_json(std::ostream& out, const ProductReport& report) {
    ordered_json j;
    j["lambda0_total"] = report.lambda0_total;
    j["kappa"] = report.kappa;
    j["kappa_tilde_min"] = optional_json(report.kappa_tilde_min);
    j["c_max"] = report.c_max;
    j["chi2_sum"] = report.chi2_sum;
    j["burn_in_time"] = report.burn_in_time;
    j["additive_bound_holds"] = report.additive_bound_holds;
    j["times"] = report.times;
    j["w1_sum"] = report.w1_sum;
    j["bound"] = report.bound;
    ordered_json fs = ordered_json::array();
    for (const auto& f : report.factors) fs.push_back(report_to_json(f));
    j["factors"] = fs;
    out << j.dump(2) << "\n";
}

void write_report_curves_csv(std::ostream& out, const DecayReport& report) {
    std::vector<CurveRow> rows;
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        rows.push_back({report.times[i], report.tv[i], report.w1[i], report.chi2[i],
                        report.survival_weight[i], report.log_survival[i]});
    }
    write_curves_csv(out, rows);
}

}  // namespace qsd
