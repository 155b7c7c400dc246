#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qsdlab/eigen_pair.hpp"
#include "qsdlab/grid_measure.hpp"
#include "qsdlab/spectral.hpp"

namespace qsd {

/**
 * Doob transform of L by eta: Lt f = (1/eta) (L + lambda0)(eta f).
 *
 * Off-diagonals are conjugated exactly; the diagonal is minus the
 * off-diagonal row sum, so constants are annihilated to rounding.
 * beta[i] = eta_i^2 gamma_i is reversible for Lt.
 */
struct TransformedOperator {
    explicit TransformedOperator(const Grid1D& g) : grid(g) {}

    Grid1D grid;
    std::vector<double> diag;
    std::vector<double> upper;
    std::vector<double> lower;
    std::vector<double> beta;
    double lambda0 = 0.0;

    std::size_t size() const { return diag.size(); }
    std::vector<double> apply(std::span<const double> f) const;
    std::vector<double> apply_transpose(std::span<const double> p) const;
    double symmetry_residual() const;
    // max |beta Lt| / max |beta| (beta as a row vector).
    double invariance_residual() const;
    GridMeasure invariant_measure() const;
};

TransformedOperator doob_generator(const TridiagonalOperator& op, const EigenPair& eigen);

// min(h, 0.01 / lambda0).
double default_time_step(const Grid1D& grid, double lambda0);

/**
 * nu Pt_t by Crank-Nicolson on the density side.
 *
 * Each interval uses ceil(t / dt) equal steps. With `smoothing`, the first
 * two steps are replaced by four backward-Euler half steps (Rannacher start).
 * Throws NumericalError if a density drops below -1e-10 or mass drifts by
 * more than 1e-10.
 */
GridMeasure evolve_transformed(const TransformedOperator& tilde, const GridMeasure& nu, double t,
                               double dt, bool smoothing = true);

struct FlowState {
    double t = 0.0;
    GridMeasure mu_t;
    double survival_weight = 1.0;
    double log_survival = 0.0;
    std::optional<double> chi2_to_beta;
};

struct FlowOptions {
    // Steps L^T + shift; the shift is removed again from the survival weight.
    // Passing lambda0 makes the stepping identical to the transformed side.
    double shift = 0.0;
    bool smoothing = true;
};

// phi_t(mu) with survival weight mu P_t 1, renormalized every step.
FlowState conditioned_flow(const TridiagonalOperator& op, const GridMeasure& mu, double t,
                           double dt, const FlowOptions& options = {});

// Advances a state by `interval`, accumulating t and log survival.
FlowState continue_flow(const TridiagonalOperator& op, const FlowState& from, double interval,
                        double dt, const FlowOptions& options = {});

// States at increasing `times` by checkpointed restarts. Smoothing, if
// requested, applies only to the first interval out of t = 0. When `eigen`
// is given, each state carries chi2(eta * mu_t | beta).
std::vector<FlowState> flow_series(const TridiagonalOperator& op, const GridMeasure& mu,
                                   std::span<const double> times, double dt,
                                   const FlowOptions& options = {},
                                   const EigenPair* eigen = nullptr);

// TV( eta * phi_t(mu), (eta * mu) Pt_t ) with matched stepping.
double checkpoint_residual(const TridiagonalOperator& op, const EigenPair& eigen,
                           const GridMeasure& mu, double t, double dt);

struct Chi2Point {
    double t = 0.0;
    double chi2 = 0.0;
};

std::vector<Chi2Point> chi2_decay_curve(const TridiagonalOperator& op, const EigenPair& eigen,
                                        const GridMeasure& mu, std::span<const double> times,
                                        double dt);

// beta = eta^2 gamma on the operator's grid.
GridMeasure beta_measure(const TridiagonalOperator& op, const EigenPair& eigen);
// alpha = eta gamma on the operator's grid.
GridMeasure alpha_measure(const TridiagonalOperator& op, const EigenPair& eigen);

struct CurveRow {
    double t = 0.0;
    double tv = 0.0;
    double w1 = 0.0;
    double chi2 = 0.0;
    double survival_weight = 1.0;
    double log_survival = 0.0;
};

// CSV `t,tv,w1,chi2,survival_weight,log_survival`.
void write_curves_csv(std::ostream& out, std::span<const CurveRow> rows);

}  // namespace qsd
