#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsdlab/doob.hpp"
#include "qsdlab/eigen_pair.hpp"
#include "qsdlab/grid_measure.hpp"
#include "qsdlab/potential.hpp"
#include "qsdlab/spectral.hpp"

namespace qsd {

enum class ExampleId { brownian_hypercube, ornstein_uhlenbeck };

struct ClosedFormParams {
    double N = 1.0;       // Brownian half-width
    double lambda = 1.0;  // OU stiffness
    int d = 1;
};

// Constants of the full d-dimensional example; per-coordinate values carry a _1d suffix.
struct ClosedFormConstants {
    double lambda0 = 0.0;
    double lambda0_1d = 0.0;
    double kappa = 0.0;
    double gap = 0.0;
    double alpha_inv_eta = 0.0;  // alpha(1/eta) = (per-coordinate value)^d
    std::optional<double> prefactor_cd;  // OU, d >= 2
};

struct ClosedForm {
    ExampleId id = ExampleId::brownian_hypercube;
    ClosedFormParams params;
    PotentialSpec spec = PotentialSpec::zero();
    EigenPair eigen;  // one coordinate, sampled on the grid
    GridMeasure alpha;
    ClosedFormConstants constants;
};

// The grid must be [-N, N] (Brownian) or start at 0 (OU).
ClosedForm closed_form(ExampleId id, const ClosedFormParams& params, const Grid1D& grid);

inline double bound_a() { return 1.0 + 1.0 / (1.0 - std::sqrt(0.9)); }
inline double bound_b() { return 1.0 / (1.0 - std::sqrt(0.9)); }

struct BoundConstants {
    double a = 0.0;
    double b = 0.0;
    double c_psi = 0.0;
    double alpha_psi = 0.0;
    double alpha_psi2_over_eta = 0.0;
    bool p3_finite = true;
};

// C_psi = (a + b alpha(psi)) alpha(psi^2 / eta_hat)^{1/2}, eta_hat = eta / alpha(eta).
BoundConstants bound_constants(std::span<const double> psi, const EigenPair& eigen,
                               const GridMeasure& alpha);

struct BurnIn {
    double t = 0.0;
    bool reached = true;
};

// Smallest sampled t with alpha(psi^2/eta_hat) chi2^2(eta * phi_t(mu) | beta) < 0.9,
// sampling every `step` up to `horizon`.
BurnIn burn_in_time(const TridiagonalOperator& op, const EigenPair& eigen,
                    std::span<const double> psi, const GridMeasure& mu, double horizon,
                    double step, double dt);

// First sampled time where the threshold holds on an already computed chi2 curve.
BurnIn burn_in_from_curve(std::span<const double> times, std::span<const double> chi2,
                          double alpha_psi2_over_eta);

struct RateFit {
    double rate = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

// Least squares of log(value) against t over [from, to]. Every value in the
// window must be > 0 and at least 5 points are needed.
RateFit fit_decay_rate(std::span<const double> times, std::span<const double> values,
                       double from, double to);

struct DecayConfig {
    std::string id;
    PotentialSpec spec = PotentialSpec::zero();
    Grid1D grid = build_grid(-1.0, 1.0, 3);
    GridMeasure initial = GridMeasure::from_density(build_grid(-1.0, 1.0, 3), {1.0, 1.0, 1.0});
    double t_max = 0.0;          // 0: 3.5 / gap
    std::size_t samples = 141;   // equally spaced times in [0, t_max]
    double dt = 0.0;             // 0: min(h, 0.01 / lambda0)
    std::optional<double> window_from;
    std::optional<double> window_to;
    std::optional<double> x0;    // centre of psi = 1 + |x - x0|; default argmax alpha
    std::optional<double> kappa_closed_form;
    std::optional<double> lambda0_lower;  // lambda0 used in kappa_tilde; default computed
    std::optional<double> cdfi_probe_min;
    std::optional<double> cdfi_probe_max;
    std::optional<double> prefactor_cd;   // copied into the report
};

struct DecayReport {
    std::string id;
    std::vector<double> times;
    std::vector<double> tv;
    std::vector<double> w1;
    std::vector<double> chi2;
    std::vector<double> survival_weight;
    std::vector<double> log_survival;

    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double gap = 0.0;
    double kappa = 0.0;               // inf W'' / 2 on the grid
    double w_second_infimum = 0.0;
    double w_second_argmin_x = 0.0;
    std::optional<double> kappa_closed_form;
    std::optional<double> kappa_tilde_basic;
    std::optional<double> kappa_tilde_refined;
    std::optional<double> kappa_tilde_argmin_x;

    double burn_in_time = 0.0;
    bool burn_in_reached = true;
    double window_from = 0.0;
    double window_to = 0.0;
    RateFit fit_tv;
    RateFit fit_w1;
    RateFit fit_chi2;

    BoundConstants tv_constants;   // psi = 1
    BoundConstants w1_constants;   // psi = 1 + |x - x0|
    double x0 = 0.0;
    double chi2_initial = 0.0;     // chi2(eta * mu | beta)
    double bound_rate = 0.0;       // rate used in the bound checks
    bool tv_bound_holds = true;    // TV <= C_1 chi2_0 e^{-rate t} (1 + 1e-3) after burn-in
    bool w1_bound_holds = true;    // W1 <= C_psi chi2_0 e^{-rate t} (1 + 1e-3) after burn-in
    std::optional<double> prefactor_cd;
    std::vector<std::string> notes;
};

DecayReport decay_report(const DecayConfig& config);

struct ProductReport {
    std::vector<DecayReport> factors;
    double lambda0_total = 0.0;
    double kappa = 0.0;          // min over factors of the bound rate
    double c_max = 0.0;          // max over factors of C_psi (psi = 1 + |x - x0|)
    double chi2_sum = 0.0;       // sum of initial marginal chi2 values
    std::vector<double> times;
    std::vector<double> w1_sum;  // W1 of the product law = sum of marginals
    std::vector<double> bound;   // c_max chi2_sum e^{-kappa t}
    double burn_in_time = 0.0;
    bool additive_bound_holds = true;
    std::optional<double> kappa_tilde_min;  // min over factors when every factor is CDFI
};

// Factors must share the same time samples.
ProductReport product_report(std::span<const DecayConfig> factors);

void write_report_json(std::ostream& out, const DecayReport& report);
void write_product_report_json(std::ostream& out, const ProductReport& report);
void write_report_curves_csv(std::ostream& out, const DecayReport& report);

}  // namespace qsd
