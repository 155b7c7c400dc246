#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qsd {

/**
 * Uniform grid of n interior nodes on (x_min, x_max).
 *
 * Both endpoints are absorbing: functions and densities living on the grid
 * are implicitly extended by zero there, so the endpoints carry no mass.
 * node(i) = x_min + (i + 1) h with h = (x_max - x_min) / (n + 1).
 */
class Grid1D {
public:
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return n_; }
    double spacing() const { return h_; }
    double node(std::size_t i) const { return x_min_ + static_cast<double>(i + 1) * h_; }
    std::vector<double> nodes() const;

    bool operator==(const Grid1D&) const = default;

private:
    friend Grid1D build_grid(double x_min, double x_max, std::size_t n);
    Grid1D(double x_min, double x_max, std::size_t n);

    double x_min_ = 0.0;
    double x_max_ = 1.0;
    std::size_t n_ = 3;
    double h_ = 0.25;
};

// Throws ValidationError when n < 3, endpoints are non-finite or x_min >= x_max.
Grid1D build_grid(double x_min, double x_max, std::size_t n);

/// Probability density (w.r.t. Lebesgue) sampled at the interior nodes of a grid.
class GridMeasure {
public:
    /// Normalizes `density` to unit mass. Rejects negative, non-finite or zero-mass input.
    static GridMeasure from_density(const Grid1D& grid, std::vector<double> density);

    const Grid1D& grid() const { return grid_; }
    std::span<const double> density() const { return density_; }
    double operator[](std::size_t i) const { return density_[i]; }
    std::size_t size() const { return density_.size(); }

    /// Mass carried by node i (density times spacing).
    double mass(std::size_t i) const { return density_[i] * grid_.spacing(); }

private:
    GridMeasure(const Grid1D& grid, std::vector<double> density)
        : grid_(grid), density_(std::move(density)) {}

    Grid1D grid_;
    std::vector<double> density_;
};

/// Product law mu_1 x ... x mu_d, kept factorized.
class ProductGridMeasure {
public:
    explicit ProductGridMeasure(std::vector<GridMeasure> factors);

    std::size_t dimension() const { return factors_.size(); }
    const GridMeasure& factor(std::size_t i) const { return factors_[i]; }
    const std::vector<GridMeasure>& factors() const { return factors_; }

private:
    std::vector<GridMeasure> factors_;
};

// Trapezoid rule with zero values at both absorbing endpoints, i.e. h * sum(values).
double quadrature(std::span<const double> values, const Grid1D& grid);

// Trapezoid rule whose endpoint values are linearly extrapolated from the two
// nearest interior nodes. For integrands that do not vanish at the boundary,
// such as ratios alpha / eta.
double quadrature_extrapolated(std::span<const double> values, const Grid1D& grid);

/// f * mu: the measure with density proportional to f times the density of mu.
GridMeasure tilt(std::span<const double> f, const GridMeasure& mu);

/// Total variation as a supremum over |f| <= 1, so the range is [0, 2].
double tv_distance(const GridMeasure& mu, const GridMeasure& nu);

/// sup over |f| <= psi of |mu(f) - nu(f)|. Requires psi >= 1.
double weighted_tv(const GridMeasure& mu, const GridMeasure& nu, std::span<const double> psi);

/// 1-Wasserstein distance: integral of |F_mu - F_nu| with cumulative-trapezoid CDFs.
double w1_distance(const GridMeasure& mu, const GridMeasure& nu);

/// Product version under the L1 ground metric: the sum of marginal distances.
double w1_distance(const ProductGridMeasure& mu, const ProductGridMeasure& nu);

/// Densities of nu below this value count as zero for absolute continuity.
inline constexpr double kAbsoluteContinuityFloor = 1e-300;
/// ... and mu-densities above this value on such nodes break absolute continuity.
inline constexpr double kSupportTolerance = 1e-14;

/**
 * chi_2(mu | nu) = sqrt( int (dmu/dnu - 1)^2 dnu ).
 *
 * This is the square root of the usual chi-square divergence. Returns
 * +infinity when mu has mass on nodes where nu is below the floor.
 */
double chi2_divergence(const GridMeasure& mu, const GridMeasure& nu);

/// Relative entropy int log(dmu/dnu) dmu; +infinity on absolute-continuity failure.
double entropy(const GridMeasure& mu, const GridMeasure& nu);

/// Cumulative-trapezoid CDF at the interior nodes.
std::vector<double> cumulative_distribution(const GridMeasure& mu);

/**
 * Masses of mu on the cells of `coarse`, normalized to a density there.
 *
 * Cells are centered at the coarse nodes; the two extreme cells extend to
 * the interval endpoints. Requires the same (x_min, x_max).
 */
GridMeasure rebin(const GridMeasure& mu, const Grid1D& coarse);

// CSV with header `x,density`, 17 significant digits.
void write_measure_csv(std::ostream& out, const GridMeasure& mu);
// Reads a uniform-grid CSV written by write_measure_csv and renormalizes it.
GridMeasure read_measure_csv(std::istream& in);

}  // namespace qsd
