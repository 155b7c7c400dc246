#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsdlab/eigen_pair.hpp"
#include "qsdlab/grid_measure.hpp"

namespace qsd {

enum class PotentialFamily { zero, quadratic, shifted_power, tabulated };

struct PotentialValue {
    double v = 0.0;
    double dv = 0.0;
    double d2v = 0.0;
};

/**
 * Potential V of the drift -V'/2.
 *
 * zero:          V = 0 (Brownian motion)
 * quadratic:     V = lambda x^2 (Ornstein-Uhlenbeck), lambda > 0
 * shifted_power: V = (x + 1)^delta on x >= -1, delta > 2
 * tabulated:     V, V', V'' read from a table and interpolated
 */
class PotentialSpec {
public:
    static PotentialSpec zero();
    static PotentialSpec quadratic(double lambda);
    static PotentialSpec shifted_power(double delta);
    // Rows must have strictly increasing x; at least two rows.
    static PotentialSpec tabulated(std::vector<double> x, std::vector<double> v,
                                   std::vector<double> dv, std::vector<double> d2v);
    // CSV with header `x,V,Vp,Vpp`.
    static PotentialSpec read_table_csv(std::istream& in);

    PotentialFamily family() const { return family_; }
    // lambda for quadratic, delta for shifted_power, 0 otherwise.
    double parameter() const { return parameter_; }
    double domain_min() const { return domain_min_; }
    double domain_max() const { return domain_max_; }
    std::string name() const;

    // User assertion that the process comes down from infinity.
    // shifted_power sets it by default.
    bool cdfi() const { return cdfi_; }
    PotentialSpec with_cdfi(bool on) const;

    // Throws ValidationError outside [domain_min, domain_max].
    PotentialValue evaluate(double x) const;

private:
    PotentialSpec() = default;
    PotentialValue interpolate(double x) const;

    PotentialFamily family_ = PotentialFamily::zero;
    double parameter_ = 0.0;
    double domain_min_ = 0.0;
    double domain_max_ = 0.0;
    bool cdfi_ = false;
    std::vector<double> tx_, tv_, tdv_, td2v_;
};

struct Infimum {
    double value = 0.0;
    std::size_t index = 0;
};

// Minimum sample and where it occurs. Throws on empty input.
Infimum be_constant(std::span<const double> second_derivatives);

/// W = V - 2 log eta sampled on the grid.
struct EffectivePotential {
    std::vector<double> log_eta;
    std::vector<double> w_second;
};

// Second differences of s = log eta: central in the interior, one-sided
// second-order at the two extreme nodes. With n = 3 every node takes the
// single central value.
std::vector<double> log_second_difference(std::span<const double> eta, const Grid1D& grid);

EffectivePotential effective_potential(const PotentialSpec& spec, const EigenPair& eigen,
                                       const Grid1D& grid);

// W'' = V'' - 2 (log eta)''. Throws ValidationError if eta <= 0 anywhere.
std::vector<double> effective_second_derivative(const PotentialSpec& spec, const EigenPair& eigen,
                                                const Grid1D& grid);

enum class CdfiForm { basic, refined };

struct CdfiRate {
    double value = 0.0;
    std::size_t index = 0;
    double x = 0.0;
};

/**
 * Improved rate for processes coming down from infinity.
 *
 * basic:   inf V'' + 8 lambda0 e^{-V}
 * refined: inf V'' + 8 lambda0 e^{-V} + 8 lambda0^2 ((1 - 2 e^{-V}) / V')^2, needs V' > 0
 *
 * The infimum runs over grid nodes inside [probe_min, probe_max] when given.
 */
CdfiRate cdfi_rate(const PotentialSpec& spec, double lambda0, const Grid1D& grid, CdfiForm form,
                   std::optional<double> probe_min = std::nullopt,
                   std::optional<double> probe_max = std::nullopt);

}  // namespace qsd
