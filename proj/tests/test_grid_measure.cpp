#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "qsdlab/errors.hpp"
#include "qsdlab/grid_measure.hpp"
#include "support.hpp"

using namespace qsd;
using qsdtest::Gen;
using qsdtest::kPi;

TEST_CASE("build_grid places interior nodes") {
    const Grid1D g = build_grid(-1.0, 1.0, 3);
    CHECK(g.spacing() == doctest::Approx(0.5));
    CHECK(g.node(0) == doctest::Approx(-0.5));
    CHECK(g.node(1) == doctest::Approx(0.0));
    CHECK(g.node(2) == doctest::Approx(0.5));

    const Grid1D ou = build_grid(0.0, 8.0, 7999);
    CHECK(ou.size() == 7999);
    CHECK(ou.spacing() == doctest::Approx(0.001).epsilon(1e-14));
    CHECK(ou.node(7998) == doctest::Approx(7.999));
}

TEST_CASE("build_grid rejects bad input") {
    CHECK_THROWS_AS(build_grid(1.0, 1.0, 10), ValidationError);
    CHECK_THROWS_AS(build_grid(2.0, 1.0, 10), ValidationError);
    CHECK_THROWS_AS(build_grid(0.0, 1.0, 2), ValidationError);
    CHECK_THROWS_AS(build_grid(0.0, std::numeric_limits<double>::infinity(), 10), ValidationError);
}

TEST_CASE("quadrature uses zero boundary values") {
    const Grid1D g = build_grid(-1.0, 1.0, 1999);
    const std::vector<double> one(g.size(), 1.0);
    CHECK(quadrature(one, g) == doctest::Approx(2.0 - g.spacing()).epsilon(1e-14));

    const Grid1D fine = build_grid(-1.0, 1.0, 3999);
    std::vector<double> c(fine.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::cos(kPi * fine.node(i) / 2.0);
    CHECK(std::abs(quadrature(c, fine) - 4.0 / kPi) < 1e-6);
}

TEST_CASE("quadrature_extrapolated integrates a linear function exactly") {
    const Grid1D g = build_grid(0.0, 2.0, 9);
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 + 3.0 * g.node(i);
    CHECK(quadrature_extrapolated(f, g) == doctest::Approx(2.0 + 6.0).epsilon(1e-13));
}

TEST_CASE("from_density normalizes and rejects invalid densities") {
    Gen gen(11);
    const Grid1D g = build_grid(-2.0, 3.0, 57);
    const GridMeasure mu = qsdtest::random_measure(gen, g);
    CHECK(quadrature(mu.density(), g) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(GridMeasure::from_density(g, std::vector<double>(g.size(), 0.0)),
                    ValidationError);
    std::vector<double> neg(g.size(), 1.0);
    neg[3] = -0.1;
    CHECK_THROWS_AS(GridMeasure::from_density(g, neg), ValidationError);
    CHECK_THROWS_AS(GridMeasure::from_density(g, std::vector<double>(4, 1.0)), ValidationError);
}

TEST_CASE("tilt by one leaves the measure unchanged") {
    Gen gen(3);
    const Grid1D g = build_grid(0.0, 1.0, 31);
    const GridMeasure mu = qsdtest::random_measure(gen, g);
    const GridMeasure t = tilt(std::vector<double>(g.size(), 1.0), mu);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(t[i] == doctest::Approx(mu[i]).epsilon(1e-14));
}

TEST_CASE("tilting Lebesgue by the Brownian eigenfunction gives the cosine law") {
    const double N = 1.5;
    const Grid1D g = build_grid(-N, N, 2999);
    std::vector<double> eta(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) eta[i] = (4.0 / kPi) * std::cos(kPi * g.node(i) / (2 * N));
    const GridMeasure alpha = tilt(eta, qsdtest::uniform_measure(g));
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        err = std::max(err, std::abs(alpha[i] - kPi / (4 * N) * std::cos(kPi * g.node(i) / (2 * N))));
    }
    CHECK(err < 1e-6);
}

TEST_CASE("tv_distance on hand-summed step densities") {
    const Grid1D g = build_grid(0.0, 5.0, 4);  // h = 1
    const GridMeasure mu = GridMeasure::from_density(g, {0.4, 0.4, 0.1, 0.1});
    const GridMeasure nu = GridMeasure::from_density(g, {0.1, 0.2, 0.3, 0.4});
    CHECK(tv_distance(mu, nu) == doctest::Approx(0.3 + 0.2 + 0.2 + 0.3).epsilon(1e-14));
    CHECK(tv_distance(mu, mu) == 0.0);

    const GridMeasure left = GridMeasure::from_density(g, {1.0, 1.0, 0.0, 0.0});
    const GridMeasure right = GridMeasure::from_density(g, {0.0, 0.0, 1.0, 1.0});
    CHECK(tv_distance(left, right) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("weighted_tv on a three-node grid") {
    const Grid1D g = build_grid(-1.0, 1.0, 3);  // nodes -0.5, 0, 0.5; h = 0.5
    const GridMeasure mu = GridMeasure::from_density(g, {1.0, 0.5, 0.5});
    const GridMeasure nu = GridMeasure::from_density(g, {0.5, 0.5, 1.0});
    // Densities after normalization: mu = (1, .5, .5), nu = (.5, .5, 1); x0 = 0.25.
    const std::vector<double> psi = {1.75, 1.25, 1.25};
    const double expected = 0.5 * (1.75 * 0.5 + 1.25 * 0.0 + 1.25 * 0.5);
    CHECK(weighted_tv(mu, nu, psi) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(weighted_tv(mu, nu, std::vector<double>(3, 1.0)) == doctest::Approx(tv_distance(mu, nu)));
    CHECK(weighted_tv(mu, mu, psi) == 0.0);
    CHECK_THROWS_AS(weighted_tv(mu, nu, std::vector<double>{1.0, 0.5, 1.0}), ValidationError);
}

TEST_CASE("w1_distance of nearly point masses is their separation") {
    const Grid1D g = build_grid(0.0, 1.0, 99);
    std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
    a[20] = 1.0;
    b[70] = 1.0;
    const double w = w1_distance(GridMeasure::from_density(g, a), GridMeasure::from_density(g, b));
    CHECK(std::abs(w - (g.node(70) - g.node(20))) <= g.spacing());
}

TEST_CASE("w1_distance between shifted uniform laws") {
    const Grid1D g = build_grid(-0.5, 2.0, 2499);
    std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        if (x > 0.0 && x < 1.0) a[i] = 1.0;
        if (x > 0.5 && x < 1.5) b[i] = 1.0;
    }
    const double w = w1_distance(GridMeasure::from_density(g, a), GridMeasure::from_density(g, b));
    CHECK(std::abs(w - 0.5) <= 2.0 * g.spacing());
}

TEST_CASE("w1_distance of product laws is the sum of marginals") {
    Gen gen(5);
    const Grid1D g1 = build_grid(-1.0, 1.0, 41);
    const Grid1D g2 = build_grid(0.0, 3.0, 63);
    const auto m1 = qsdtest::random_measure(gen, g1);
    const auto m2 = qsdtest::random_measure(gen, g2);
    const auto n1 = qsdtest::random_measure(gen, g1);
    const auto n2 = qsdtest::random_measure(gen, g2);
    const ProductGridMeasure mu({m1, m2});
    const ProductGridMeasure nu({n1, n2});
    CHECK(std::abs(w1_distance(mu, nu) - (w1_distance(m1, n1) + w1_distance(m2, n2))) <= 1e-12);
}

TEST_CASE("chi2 and entropy on a two-cell example") {
    const Grid1D g = build_grid(0.0, 5.0, 4);
    const GridMeasure mu = GridMeasure::from_density(g, {0.75, 0.75, 0.25, 0.25});
    const GridMeasure nu = GridMeasure::from_density(g, {0.5, 0.5, 0.5, 0.5});
    CHECK(chi2_divergence(mu, nu) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(entropy(mu, nu) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)).epsilon(1e-14));
    CHECK(chi2_divergence(mu, mu) == 0.0);
    CHECK(entropy(mu, mu) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("chi2 and entropy are infinite without absolute continuity") {
    const Grid1D g = build_grid(0.0, 5.0, 4);
    const GridMeasure mu = GridMeasure::from_density(g, {0.25, 0.25, 0.25, 0.25});
    const GridMeasure nu = GridMeasure::from_density(g, {0.5, 0.5, 0.0, 0.0});
    CHECK(std::isinf(chi2_divergence(mu, nu)));
    CHECK(std::isinf(entropy(mu, nu)));
    CHECK(std::isfinite(chi2_divergence(nu, mu)));
}

TEST_CASE("rebin conserves mass") {
    Gen gen(17);
    const Grid1D fine = build_grid(-1.0, 1.0, 399);
    const Grid1D coarse = build_grid(-1.0, 1.0, 7);
    const GridMeasure mu = qsdtest::random_measure(gen, fine);
    const GridMeasure r = rebin(mu, coarse);
    CHECK(quadrature(r.density(), coarse) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(rebin(mu, build_grid(-1.0, 2.0, 7)), ValidationError);
}

TEST_CASE("measure CSV round trip is exact") {
    Gen gen(23);
    const Grid1D g = build_grid(0.0, 2.5, 37);
    const GridMeasure mu = qsdtest::random_measure(gen, g);
    std::stringstream s;
    write_measure_csv(s, mu);
    const GridMeasure back = read_measure_csv(s);
    REQUIRE(back.size() == mu.size());
    CHECK(back.grid().x_min() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(back.grid().x_max() == doctest::Approx(2.5).epsilon(1e-12));
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(back[i] == doctest::Approx(mu[i]).epsilon(1e-14));
}

TEST_CASE("property: tv_distance is a metric") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed);
        const Grid1D g = build_grid(gen.uniform(-3, 0), gen.uniform(0.5, 3), 3 + gen.index(60));
        const auto a = qsdtest::random_measure(gen, g);
        const auto b = qsdtest::random_measure(gen, g);
        const auto c = qsdtest::random_measure(gen, g);
        CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)).epsilon(1e-15));
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-14);
        CHECK(tv_distance(a, b) >= 0.0);
        CHECK(tv_distance(a, b) <= 2.0 + 1e-14);
    }
}

TEST_CASE("property: weighted_tv dominates tv for psi >= 1") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 7);
        const Grid1D g = build_grid(-1.0, 1.0, 3 + gen.index(80));
        const auto a = qsdtest::random_measure(gen, g);
        const auto b = qsdtest::random_measure(gen, g);
        const double x0 = gen.uniform(-1, 1);
        std::vector<double> psi(g.size());
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = 1.0 + std::abs(g.node(i) - x0);
        CHECK(weighted_tv(a, b, psi) >= tv_distance(a, b) - 1e-15);
    }
}

TEST_CASE("property: W1 <= N TV on [-N, N]") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 13);
        const double N = gen.uniform(0.2, 4.0);
        const Grid1D g = build_grid(-N, N, 3 + gen.index(100));
        const auto a = qsdtest::random_measure(gen, g);
        const auto b = qsdtest::random_measure(gen, g);
        CHECK(w1_distance(a, b) <= N * tv_distance(a, b) + 1e-13);
    }
}

TEST_CASE("property: chi2 squared equals a brute-force cell sum on small grids") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 31);
        const std::size_t n = 3 + gen.index(6);
        const Grid1D g = build_grid(0.0, gen.uniform(0.5, 5.0), n);
        std::vector<double> p(n), q(n);
        double mp = 0.0, mq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = gen.uniform(0.01, 1.0);
            q[i] = gen.uniform(0.01, 1.0);
            mp += p[i];
            mq += q[i];
        }
        // Cell masses sum to one; the ratio of masses equals the ratio of densities.
        double brute = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = p[i] / mp;
            const double b = q[i] / mq;
            brute += (a / b - 1.0) * (a / b - 1.0) * b;
        }
        const double chi = chi2_divergence(GridMeasure::from_density(g, p), GridMeasure::from_density(g, q));
        CHECK(std::abs(chi * chi - brute) <= 1e-12 * std::max(1.0, brute));
    }
}

TEST_CASE("property: entropy is bounded by chi2 squared") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 37);
        const Grid1D g = build_grid(-2.0, 2.0, 3 + gen.index(50));
        const auto a = qsdtest::random_measure(gen, g);
        const auto b = qsdtest::random_measure(gen, g);
        const double chi = chi2_divergence(a, b);
        const double h = entropy(a, b);
        CHECK(h >= -1e-14);
        CHECK(h <= chi * chi + 1e-14);
    }
}

TEST_CASE("property: tilt keeps unit mass and composes") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 41);
        const Grid1D g = build_grid(-1.0, 2.0, 3 + gen.index(70));
        const auto mu = qsdtest::random_measure(gen, g);
        const auto f = qsdtest::random_density(gen, g);
        const auto h = qsdtest::random_density(gen, g);
        const GridMeasure once = tilt(f, mu);
        CHECK(quadrature(once.density(), g) == doctest::Approx(1.0).epsilon(1e-12));
        std::vector<double> fh(g.size());
        for (std::size_t i = 0; i < fh.size(); ++i) fh[i] = f[i] * h[i];
        const GridMeasure twice = tilt(f, tilt(h, mu));
        const GridMeasure joint = tilt(fh, mu);
        CHECK(tv_distance(twice, joint) <= 1e-12);
    }
}

TEST_CASE("property: rebin preserves coarse-edge CDF values") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        CAPTURE(seed);
        Gen gen(seed * 43);
        const Grid1D fine = build_grid(0.0, 1.0, 50 + gen.index(400));
        const Grid1D coarse = build_grid(0.0, 1.0, 3 + gen.index(10));
        const auto mu = qsdtest::random_measure(gen, fine);
        const GridMeasure r = rebin(mu, coarse);
        double total = 0.0;
        for (std::size_t j = 0; j < coarse.size(); ++j) {
            CHECK(r[j] >= 0.0);
            total += r.mass(j);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}
