#include "qsdlab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Lane layout: coordinate c uses 4c (Box-Muller radius), 4c + 1 (angle),
// 4c + 2 (bridge test). Lane 3 is the resampling choice. Step 0 is the
// initial draw, steps 1..K the moves.
constexpr std::uint64_t kResampleLane = 3;

double standard_normal(std::uint64_t seed, std::uint64_t particle, std::uint64_t step,
                       std::size_t coordinate) {
    const double u1 = counter_uniform(seed, particle, step, 4 * coordinate);
    const double u2 = counter_uniform(seed, particle, step, 4 * coordinate + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

unsigned resolve_threads(unsigned requested) {
    unsigned t = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QSD_LAB_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) t = std::min<unsigned>(t, static_cast<unsigned>(cap));
    }
    return std::max(1u, t);
}

template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
    if (threads <= 1 || n < 2048) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t begin = std::min(n, w * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        if (begin == end) break;
        pool.emplace_back([=] { body(begin, end); });
    }
    for (auto& th : pool) th.join();
}

// Probability that a Brownian bridge of variance dt from x to y touches `bound`.
double crossing_probability(double x, double y, double bound, double dt) {
    if (!std::isfinite(bound)) return 0.0;
    return std::exp(-2.0 * (x - bound) * (y - bound) / dt);
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t particle, std::uint64_t step,
                       std::uint64_t lane) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ particle);
    h = mix64(h ^ step);
    h = mix64(h ^ lane);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double sample_piecewise_linear(const GridMeasure& mu, std::span<const double> node_cdf, double u) {
    const std::size_t n = mu.size();
    const double h = mu.grid().spacing();
    const double total = node_cdf[n - 1] + 0.5 * h * mu[n - 1];
    const double target = u * total;
    // Segment k joins node k-1 and node k (endpoints for k = 0 and k = n).
    std::size_t k = static_cast<std::size_t>(
        std::lower_bound(node_cdf.begin(), node_cdf.end(), target) - node_cdf.begin());
    const double base = k == 0 ? 0.0 : node_cdf[k - 1];
    const double left = k == 0 ? 0.0 : mu[k - 1];
    const double right = k == n ? 0.0 : mu[k];
    const double r = std::max(0.0, target - base);
    const double a = (right - left) / (2.0 * h);
    const double disc = std::max(0.0, left * left + 4.0 * a * r);
    const double denom = left + std::sqrt(disc);
    double s = denom > 0.0 ? 2.0 * r / denom : 0.5 * h;
    s = std::clamp(s, 0.0, h);
    const double x = mu.grid().x_min() + static_cast<double>(k) * h + s;
    // Keep draws strictly inside the open interval.
    return std::clamp(x, std::nextafter(mu.grid().x_min(), mu.grid().x_max()),
                      std::nextafter(mu.grid().x_max(), mu.grid().x_min()));
}

void validate_sim_config(const SimConfig& c) {
    if (c.potentials.empty() || c.potentials.size() != c.domain.size()) {
        throw ValidationError("simulation needs one potential and one interval per coordinate");
    }
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) {
        throw ValidationError("mc.dt must be > 0");
    }
    if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) {
        throw ValidationError("mc.horizon must be > 0");
    }
    if (c.dt > c.horizon) {
        throw ValidationError("mc.dt must not exceed mc.horizon");
    }
    if (c.n_particles < 100) {
        throw ValidationError("mc.particles must be >= 100");
    }
    for (std::size_t k = 0; k < c.domain.size(); ++k) {
        const Interval& iv = c.domain[k];
        if (!(iv.lo < iv.hi)) {
            throw ValidationError("simulation interval must satisfy lo < hi");
        }
        if (iv.lo < c.potentials[k].domain_min() || iv.hi > c.potentials[k].domain_max()) {
            throw ValidationError("simulation interval leaves the potential's domain");
        }
    }
}

ParticleEnsemble simulate(const SimConfig& config, const GridMeasure& initial) {
    return simulate(config, std::span<const GridMeasure>(&initial, 1));
}

ParticleEnsemble simulate(const SimConfig& config, std::span<const GridMeasure> initial) {
    validate_sim_config(config);
    const std::size_t d = config.domain.size();
    if (initial.size() != d) {
        throw ValidationError("simulate: need one initial law per coordinate");
    }
    for (std::size_t c = 0; c < d; ++c) {
        const Grid1D& g = initial[c].grid();
        if (g.x_min() < config.domain[c].lo || g.x_max() > config.domain[c].hi) {
            throw ValidationError("simulate: initial law is not supported inside the domain");
        }
    }

    const std::size_t n = config.n_particles;
    const std::uint64_t seed = config.seed;
    const unsigned threads = resolve_threads(config.threads);
    const auto steps = static_cast<std::size_t>(
        std::max(1.0, std::ceil(config.horizon / config.dt - 1e-9)));
    const double tau = config.horizon / static_cast<double>(steps);
    const double root_tau = std::sqrt(tau);

    std::vector<double> pos(n * d);
    std::vector<std::uint8_t> alive(n, 1);
    for (std::size_t c = 0; c < d; ++c) {
        const auto cdf = cumulative_distribution(initial[c]);
        parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                pos[i * d + c] = sample_piecewise_linear(initial[c], cdf,
                                                         counter_uniform(seed, i, 0, 4 * c));
            }
        });
    }

    ParticleEnsemble out;
    out.dimension = d;
    out.initial_count = n;
    out.survival.reserve(steps + 1);
    out.survival.push_back({0.0, 1.0, 0.0});

    std::size_t alive_count = n;
    double log_survival = 0.0;
    std::vector<std::size_t> survivors;
    for (std::size_t k = 1; k <= steps; ++k) {
        parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                if (!alive[i]) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    const double x = pos[i * d + c];
                    const double drift = config.potentials[c].evaluate(x).dv;
                    const double y = x + root_tau * standard_normal(seed, i, k, c) - 0.5 * drift * tau;
                    const Interval& iv = config.domain[c];
                    bool dead = !(y > iv.lo && y < iv.hi);
                    if (!dead && config.bridge_correction) {
                        const double p_lo = crossing_probability(x, y, iv.lo, tau);
                        const double p_hi = crossing_probability(x, y, iv.hi, tau);
                        const double p = 1.0 - (1.0 - p_lo) * (1.0 - p_hi);
                        dead = counter_uniform(seed, i, k, 4 * c + 2) < p;
                    }
                    if (dead) {
                        alive[i] = 0;
                        break;
                    }
                    pos[i * d + c] = y;
                }
            }
        });

        survivors.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (alive[i]) survivors.push_back(i);
        }
        const std::size_t now = survivors.size();
        const double t = static_cast<double>(k) * tau;
        if (config.resample) {
            log_survival += now > 0 ? std::log(static_cast<double>(now) / static_cast<double>(n))
                                    : -std::numeric_limits<double>::infinity();
        } else {
            log_survival = now > 0 ? std::log(static_cast<double>(now) / static_cast<double>(n))
                                   : -std::numeric_limits<double>::infinity();
        }
        out.survival.push_back({t, static_cast<double>(now) / static_cast<double>(n), log_survival});
        alive_count = now;
        out.t = t;
        if (now == 0) {
            out.all_absorbed = true;
            break;
        }
        if (config.resample && now < n) {
            for (std::size_t j = 0; j < n; ++j) {
                if (alive[j]) continue;
                const double u = counter_uniform(seed, j, k, kResampleLane);
                const auto pick = std::min(now - 1, static_cast<std::size_t>(u * static_cast<double>(now)));
                const std::size_t src = survivors[pick];
                for (std::size_t c = 0; c < d; ++c) pos[j * d + c] = pos[src * d + c];
                alive[j] = 1;
            }
            alive_count = n;
        }
    }

    out.alive_count = alive_count;
    out.log_survival_estimate = log_survival;
    out.positions.reserve(alive_count * d);
    out.ids.reserve(alive_count);
    for (std::size_t i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        out.ids.push_back(i);
        for (std::size_t c = 0; c < d; ++c) out.positions.push_back(pos[i * d + c]);
    }
    return out;
}

GridMeasure conditioned_empirical(const ParticleEnsemble& ensemble, const Grid1D& grid,
                                  std::size_t coordinate) {
    if (ensemble.alive_count == 0) {
        throw NumericalError("conditioned_empirical: no surviving particles");
    }
    if (coordinate >= ensemble.dimension) {
        throw ValidationError("conditioned_empirical: coordinate out of range");
    }
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> counts(n, 0.0);
    for (std::size_t p = 0; p < ensemble.alive_count; ++p) {
        const double x = ensemble.positions[p * ensemble.dimension + coordinate];
        const double cell = std::ceil((x - grid.x_min()) / h - 1.5);
        const double clamped = std::clamp(cell, 0.0, static_cast<double>(n - 1));
        counts[static_cast<std::size_t>(clamped)] += 1.0;
    }
    const double scale = 1.0 / (static_cast<double>(ensemble.alive_count) * h);
    for (double& c : counts) c *= scale;
    return GridMeasure::from_density(grid, std::move(counts));
}

ProductGridMeasure conditioned_empirical(const ParticleEnsemble& ensemble,
                                         std::span<const Grid1D> grids) {
    if (grids.size() != ensemble.dimension) {
        throw ValidationError("conditioned_empirical: need one grid per coordinate");
    }
    std::vector<GridMeasure> factors;
    factors.reserve(grids.size());
    for (std::size_t c = 0; c < grids.size(); ++c) {
        factors.push_back(conditioned_empirical(ensemble, grids[c], c));
    }
    return ProductGridMeasure(std::move(factors));
}

double estimate_lambda0(std::span<const SurvivalSample> curve, std::optional<TimeWindow> window) {
    if (curve.empty()) {
        throw ValidationError("estimate_lambda0: empty survival curve");
    }
    const double t_end = curve.back().t;
    const TimeWindow w = window.value_or(TimeWindow{0.5 * t_end, t_end});
    double s1 = 0, st = 0, sy = 0, stt = 0, sty = 0;
    for (const auto& s : curve) {
        if (s.t < w.from || s.t > w.to || !std::isfinite(s.log_survival)) continue;
        const double y = -s.log_survival;
        s1 += 1;
        st += s.t;
        sy += y;
        stt += s.t * s.t;
        sty += s.t * y;
    }
    const double denom = s1 * stt - st * st;
    if (s1 < 5 || !(denom > 0.0)) {
        throw ValidationError("estimate_lambda0: fewer than 5 usable samples in the window");
    }
    return (s1 * sty - st * sy) / denom;
}

void write_survival_csv(std::ostream& out, std::span<const SurvivalSample> curve) {
    out << "t,alive_fraction,log_survival\n";
    char line[128];
    for (const auto& s : curve) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", s.t, s.alive_fraction,
                      s.log_survival);
        out << line;
    }
}

void write_positions_csv(std::ostream& out, const ParticleEnsemble& ensemble) {
    out << "particle_id";
    for (std::size_t c = 0; c < ensemble.dimension; ++c) out << ",x" << (c + 1);
    out << "\n";
    char cell[40];
    for (std::size_t p = 0; p < ensemble.alive_count; ++p) {
        out << ensemble.ids[p];
        for (std::size_t c = 0; c < ensemble.dimension; ++c) {
            std::snprintf(cell, sizeof cell, ",%.17g", ensemble.positions[p * ensemble.dimension + c]);
            out << cell;
        }
        out << "\n";
    }
}

}  // namespace qsd
