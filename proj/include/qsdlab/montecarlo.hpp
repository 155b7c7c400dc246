#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qsdlab/grid_measure.hpp"
#include "qsdlab/potential.hpp"

namespace qsd {

// Open interval; either bound may be infinite.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SimConfig {
    std::vector<PotentialSpec> potentials;  // one per coordinate
    std::vector<Interval> domain;           // one per coordinate
    double dt = 1e-3;
    double horizon = 1.0;
    std::size_t n_particles = 100000;
    std::uint64_t seed = 1;
    bool resample = false;
    // Kill a particle whose Brownian bridge between two steps crosses a finite
    // bound, not just particles found outside at step boundaries.
    bool bridge_correction = true;
    // 0: hardware concurrency, capped by QSD_LAB_THREADS when set.
    unsigned threads = 0;
};

// Throws ValidationError on an inconsistent configuration.
void validate_sim_config(const SimConfig& config);

struct SurvivalSample {
    double t = 0.0;
    double alive_fraction = 1.0;
    double log_survival = 0.0;
};

struct ParticleEnsemble {
    std::size_t dimension = 1;
    std::vector<double> positions;       // alive particles, row-major alive_count x dimension
    std::vector<std::uint64_t> ids;      // particle index of each alive row
    std::size_t alive_count = 0;
    std::size_t initial_count = 0;
    double t = 0.0;
    double log_survival_estimate = 0.0;
    bool all_absorbed = false;           // horizon not reached with survivors (resample off)
    std::vector<SurvivalSample> survival;  // one sample per step, plus t = 0
};

// Counter-based uniform in (0, 1) keyed by (seed, particle, step, lane).
double counter_uniform(std::uint64_t seed, std::uint64_t particle, std::uint64_t step,
                       std::uint64_t lane);

// Inverse-CDF draw from the piecewise-linear density (zero at both endpoints).
double sample_piecewise_linear(const GridMeasure& mu, std::span<const double> node_cdf, double u);

/**
 * Euler-Maruyama for dX = dB - (1/2) grad V(X) dt, absorbed when a coordinate
 * leaves its interval. `initial` holds one law per coordinate (product start).
 * Results do not depend on the thread count.
 */
ParticleEnsemble simulate(const SimConfig& config, std::span<const GridMeasure> initial);
ParticleEnsemble simulate(const SimConfig& config, const GridMeasure& initial);

/**
 * Histogram of survivors on cells centered at the grid nodes; the two extreme
 * cells reach the interval ends. A point on a cell edge goes to the lower cell.
 */
GridMeasure conditioned_empirical(const ParticleEnsemble& ensemble, const Grid1D& grid,
                                  std::size_t coordinate = 0);
ProductGridMeasure conditioned_empirical(const ParticleEnsemble& ensemble,
                                         std::span<const Grid1D> grids);

struct TimeWindow {
    double from = 0.0;
    double to = 0.0;
};

// Least-squares slope of -log survival against t over the window. Defaults to
// the second half of the recorded horizon.
double estimate_lambda0(std::span<const SurvivalSample> curve,
                        std::optional<TimeWindow> window = std::nullopt);

// CSV `t,alive_fraction,log_survival`.
void write_survival_csv(std::ostream& out, std::span<const SurvivalSample> curve);
// CSV `particle_id,x1[,x2,...]`.
void write_positions_csv(std::ostream& out, const ParticleEnsemble& ensemble);

}  // namespace qsd
