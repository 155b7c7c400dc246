#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qsdlab/eigen_pair.hpp"
#include "qsdlab/grid_measure.hpp"
#include "qsdlab/potential.hpp"

namespace qsd {

/**
 * Tridiagonal discretization of L = (1/2) f'' - (1/2) V' f' with Dirichlet
 * rows at both ends.
 *
 * Row i reads  lower[i-1] f_{i-1} + diag[i] f_i + upper[i] f_{i+1}.
 * gamma[i] = exp(-(V_i - gamma_shift)) with gamma_shift = min V over the nodes.
 */
struct TridiagonalOperator {
    explicit TridiagonalOperator(const Grid1D& g) : grid(g) {}

    Grid1D grid;
    std::vector<double> diag;
    std::vector<double> upper;
    std::vector<double> lower;
    std::vector<double> gamma;
    double gamma_shift = 0.0;

    std::size_t size() const { return diag.size(); }
    std::vector<double> apply(std::span<const double> f) const;
    // Transpose action, i.e. the generator acting on densities.
    std::vector<double> apply_transpose(std::span<const double> p) const;
    // max_i |gamma_i upper_i - gamma_{i+1} lower_i| / max(|gamma_i upper_i|, tiny).
    double symmetry_residual() const;
};

// Midpoint potentials are evaluated exactly; coefficients use exponent differences only.
TridiagonalOperator assemble_generator(const PotentialSpec& spec, const Grid1D& grid);

// Solves (c0 I - c1 A) x = b for tridiagonal A given by (lower, diag, upper).
// Used with A = L (eigensolves) and A = L^T (time stepping). No pivoting: the
// matrices involved are diagonally dominant M-matrices.
std::vector<double> solve_shifted(std::span<const double> lower, std::span<const double> diag,
                                  std::span<const double> upper, double c0, double c1,
                                  std::span<const double> b);

struct EigenOptions {
    double tolerance = 1e-13;
    int max_iterations = 500;
};

// Inverse iteration with shift 0. eta is positive, sign fixed at the central node.
EigenPair principal_eigenpair(const TridiagonalOperator& op, const EigenOptions& options = {});

struct SpectralGap {
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double gap() const { return lambda1 - lambda0; }
};

// lambda1 by inverse iteration deflated against eta in the gamma inner product.
SpectralGap spectral_gap(const TridiagonalOperator& op, const EigenOptions& options = {});

// Both eigenvalues, with lambda1 stored on the pair.
EigenPair solve_eigen(const TridiagonalOperator& op, const EigenOptions& options = {});

// max |L eta + lambda0 eta| / max |eta|.
double eigen_residual(const TridiagonalOperator& op, const EigenPair& eigen);

// sum gamma eta^2 / sum gamma eta - 1, which vanishes under the stored normalization.
double normalization_defect(const TridiagonalOperator& op, const EigenPair& eigen);

// alpha = eta * gamma.
GridMeasure qsd_from_eigen(const EigenPair& eigen, const PotentialSpec& spec, const Grid1D& grid);

// beta = eta^2 * gamma, the invariant law of the transformed semigroup.
GridMeasure beta_from_eigen(const EigenPair& eigen, const PotentialSpec& spec, const Grid1D& grid);

struct ProductEigenPair {
    std::vector<EigenPair> factors;
    double lambda0_total = 0.0;
};

ProductEigenPair tensor_eigen(std::vector<EigenPair> factors);

/**
 * Residuals of the integral relations satisfied by eta on (0, infinity).
 *
 * kernel:        eta(x) = 4 lambda0 int (x ^ y) eta(y) e^{-V(y)} dy
 * first:         eta'(x) = 4 lambda0 int_x^inf eta e^{-V}
 * second:        eta''(x) = -4 lambda0 eta(x) e^{-V(x)}
 * scale_kernel:  eta(x) = 2 lambda0 int (s(x) ^ s(y)) eta(y) e^{-V(y)} dy, s' = e^{V}
 *
 * Each value is a sup over nodes x <= probe_max, scaled by the sup of the
 * left-hand side over all nodes.
 */
struct IdentityResidual {
    double kernel = 0.0;
    double first = 0.0;
    double second = 0.0;
    double scale_kernel = 0.0;
    double probe_max = 0.0;
};

// Requires x_min == 0 and spec.cdfi(). probe_max defaults to 75% of the way to x_max.
IdentityResidual integral_identity_residual(const EigenPair& eigen, const PotentialSpec& spec,
                                            const Grid1D& grid,
                                            std::optional<double> probe_max = std::nullopt);

// JSON object {lambda0, lambda1, normalization}.
void write_eigen_json(std::ostream& out, const EigenPair& eigen);
// CSV `x,eta`.
void write_eta_csv(std::ostream& out, const EigenPair& eigen, const Grid1D& grid);

}  // namespace qsd
