#include "qsdlab/grid_measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

void require_same_grid(const GridMeasure& mu, const GridMeasure& nu, const char* what) {
    if (!(mu.grid() == nu.grid())) {
        throw ValidationError(std::string(what) + ": measures live on different grids");
    }
}

// Exact CDF of the piecewise-linear density (zero at both endpoints) at x.
double cdf_at(const GridMeasure& mu, std::span<const double> node_cdf, double x) {
    const Grid1D& g = mu.grid();
    const double h = g.spacing();
    if (x <= g.x_min()) return 0.0;
    if (x >= g.x_max()) return 1.0;
    // Segment k spans [x_min + k h, x_min + (k+1) h]; node k-1 on the left.
    const double u = (x - g.x_min()) / h;
    auto k = static_cast<std::size_t>(std::floor(u));
    k = std::min(k, g.size());
    const double s = x - (g.x_min() + static_cast<double>(k) * h);
    const double left = k == 0 ? 0.0 : mu[k - 1];
    const double right = k == g.size() ? 0.0 : mu[k];
    const double base = k == 0 ? 0.0 : node_cdf[k - 1];
    return base + left * s + (right - left) * s * s / (2.0 * h);
}

}  // namespace

Grid1D::Grid1D(double x_min, double x_max, std::size_t n)
    : x_min_(x_min), x_max_(x_max), n_(n), h_((x_max - x_min) / static_cast<double>(n + 1)) {}

std::vector<double> Grid1D::nodes() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = node(i);
    return xs;
}

Grid1D build_grid(double x_min, double x_max, std::size_t n) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ValidationError("grid endpoints must be finite");
    }
    if (!(x_min < x_max)) {
        throw ValidationError("grid requires x_min < x_max");
    }
    if (n < 3) {
        throw ValidationError("grid.n must be >= 3");
    }
    return Grid1D(x_min, x_max, n);
}

GridMeasure GridMeasure::from_density(const Grid1D& grid, std::vector<double> density) {
    if (density.size() != grid.size()) {
        throw ValidationError("density length does not match the grid");
    }
    for (double v : density) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ValidationError("density values must be finite and nonnegative");
        }
    }
    const double mass = quadrature(density, grid);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw ValidationError("density has zero or non-finite mass");
    }
    for (double& v : density) v /= mass;
    return GridMeasure(grid, std::move(density));
}

ProductGridMeasure::ProductGridMeasure(std::vector<GridMeasure> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
        throw ValidationError("product measure needs at least one factor");
    }
}

double quadrature(std::span<const double> values, const Grid1D& grid) {
    if (values.size() != grid.size()) {
        throw ValidationError("quadrature: values length does not match the grid");
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    return grid.spacing() * sum;
}

double quadrature_extrapolated(std::span<const double> values, const Grid1D& grid) {
    const std::size_t n = grid.size();
    if (values.size() != n) {
        throw ValidationError("quadrature: values length does not match the grid");
    }
    const double left = 2.0 * values[0] - values[1];
    const double right = 2.0 * values[n - 1] - values[n - 2];
    return quadrature(values, grid) + 0.5 * grid.spacing() * (left + right);
}

GridMeasure tilt(std::span<const double> f, const GridMeasure& mu) {
    if (f.size() != mu.size()) {
        throw ValidationError("tilt: weight length does not match the grid");
    }
    std::vector<double> weighted(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(f[i] >= 0.0) || !std::isfinite(f[i])) {
            throw ValidationError("tilt: weight must be finite and nonnegative");
        }
        weighted[i] = f[i] * mu[i];
    }
    return GridMeasure::from_density(mu.grid(), std::move(weighted));
}

double tv_distance(const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu, nu, "tv_distance");
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) sum += std::abs(mu[i] - nu[i]);
    return mu.grid().spacing() * sum;
}

double weighted_tv(const GridMeasure& mu, const GridMeasure& nu, std::span<const double> psi) {
    require_same_grid(mu, nu, "weighted_tv");
    if (psi.size() != mu.size()) {
        throw ValidationError("weighted_tv: psi length does not match the grid");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(psi[i] >= 1.0)) {
            throw ValidationError("weighted_tv: psi must be >= 1 everywhere");
        }
        sum += psi[i] * std::abs(mu[i] - nu[i]);
    }
    return mu.grid().spacing() * sum;
}

std::vector<double> cumulative_distribution(const GridMeasure& mu) {
    const double h = mu.grid().spacing();
    std::vector<double> cdf(mu.size());
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        acc += 0.5 * h * (prev + mu[i]);
        cdf[i] = acc;
        prev = mu[i];
    }
    return cdf;
}

double w1_distance(const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu, nu, "w1_distance");
    const auto fm = cumulative_distribution(mu);
    const auto fn = cumulative_distribution(nu);
    // |F_mu - F_nu| vanishes at both endpoints, so the trapezoid is h * sum.
    double sum = 0.0;
    for (std::size_t i = 0; i < fm.size(); ++i) sum += std::abs(fm[i] - fn[i]);
    return mu.grid().spacing() * sum;
}

double w1_distance(const ProductGridMeasure& mu, const ProductGridMeasure& nu) {
    if (mu.dimension() != nu.dimension()) {
        throw ValidationError("w1_distance: product measures differ in dimension");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < mu.dimension(); ++k) {
        total += w1_distance(mu.factor(k), nu.factor(k));
    }
    return total;
}

double chi2_divergence(const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu, nu, "chi2_divergence");
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double q = nu[i];
        const double p = mu[i];
        if (q < kAbsoluteContinuityFloor) {
            if (p > kSupportTolerance) return std::numeric_limits<double>::infinity();
            continue;
        }
        const double d = p - q;
        sum += d * d / q;
    }
    return std::sqrt(mu.grid().spacing() * sum);
}

double entropy(const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu, nu, "entropy");
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double p = mu[i];
        const double q = nu[i];
        if (q < kAbsoluteContinuityFloor) {
            if (p > kSupportTolerance) return std::numeric_limits<double>::infinity();
            continue;
        }
        if (p > 0.0) sum += p * std::log(p / q);
    }
    return mu.grid().spacing() * sum;
}

GridMeasure rebin(const GridMeasure& mu, const Grid1D& coarse) {
    const Grid1D& fine = mu.grid();
    if (fine.x_min() != coarse.x_min() || fine.x_max() != coarse.x_max()) {
        throw ValidationError("rebin: grids cover different intervals");
    }
    const auto node_cdf = cumulative_distribution(mu);
    const std::size_t m = coarse.size();
    const double hc = coarse.spacing();
    std::vector<double> density(m);
    double lower = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double edge = j + 1 == m ? coarse.x_max() : coarse.x_min() + (static_cast<double>(j) + 1.5) * hc;
        const double upper = cdf_at(mu, node_cdf, edge);
        density[j] = std::max(0.0, upper - lower) / hc;
        lower = upper;
    }
    return GridMeasure::from_density(coarse, std::move(density));
}

void write_measure_csv(std::ostream& out, const GridMeasure& mu) {
    out << "x,density\n";
    char line[96];
    for (std::size_t i = 0; i < mu.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", mu.grid().node(i), mu[i]);
        out << line;
    }
}

GridMeasure read_measure_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,density", 0) != 0) {
        throw ValidationError("measure CSV must start with header `x,density`");
    }
    std::vector<double> xs;
    std::vector<double> ds;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ValidationError("measure CSV: malformed row `" + line + "`");
        }
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            ds.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ValidationError("measure CSV: non-numeric row `" + line + "`");
        }
    }
    if (xs.size() < 3) {
        throw ValidationError("measure CSV needs at least 3 rows");
    }
    const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (std::abs(xs[i] - xs[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h))) {
            throw ValidationError("measure CSV: nodes are not uniformly spaced");
        }
    }
    const Grid1D grid = build_grid(xs.front() - h, xs.back() + h, xs.size());
    return GridMeasure::from_density(grid, std::move(ds));
}

}  // namespace qsd
