#include <doctest.h>

#include <cmath>
#include <vector>

#include "gfrag/errors.hpp"
#include "gfrag/families.hpp"
#include "gfrag/interp.hpp"
#include "gfrag/spectral.hpp"
#include "oracles.hpp"

using namespace gfrag;

TEST_CASE("common random numbers make q -> L(q) nonincreasing and convex") {
    const ModelSpec m = make_family("hump");
    const auto batch = sample_hitting_batch(m, 1.0, 1.0, 64.0, 4000, {17, 1});
    double prev = kNever;
    std::vector<double> values;
    for (int k = 0; k <= 40; ++k) {
        const double q = 0.5 + 0.05 * k;
        const double v = batch.laplace(q).mean;
        CHECK(v <= prev);
        prev = v;
        values.push_back(v);
    }
    for (std::size_t i = 1; i + 1 < values.size(); ++i) CHECK(values[i - 1] + values[i + 1] - 2.0 * values[i] >= -1e-12);
}

TEST_CASE("envelope: lower is the mean; an upper bound exists only above gamma") {
    const ModelSpec m = make_family("hump");
    const auto batch = sample_hitting_batch(m, 1.0, 1.0, 16.0, 2000, {3, 1});
    const auto below = batch.laplace(1.0);
    CHECK(below.lower == below.mean);
    CHECK_FALSE(below.upper_available);
    const auto above = batch.laplace(2.0);
    CHECK(above.upper_available);
    CHECK(above.upper == doctest::Approx(above.mean + batch.truncated_fraction() * std::exp(-(2.0 - 1.5) * 16.0)));
}

TEST_CASE("pathwise derivative agrees with the central difference") {
    const ModelSpec m = make_family("hump");
    const auto batch = sample_hitting_batch(m, 1.0, 1.0, 64.0, 4000, {5, 1});
    const auto d = batch.derivative(1.1);
    const auto fd = batch.central_difference(1.1, 1e-4);
    CHECK(fd.mean == doctest::Approx(d.mean).epsilon(1e-6));
    CHECK(d.mean < 0.0);
}

TEST_CASE("batches are identical for any worker count") {
    const ModelSpec m = make_family("hump");
    const auto a = sample_hitting_batch(m, 1.0, 2.0, 32.0, 3000, {9, 1});
    const auto b = sample_hitting_batch(m, 1.0, 2.0, 32.0, 3000, {9, 4});
    CHECK(a.laplace(1.2).mean == b.laplace(1.2).mean);
    CHECK(a.truncated_fraction() == b.truncated_fraction());
}

TEST_CASE("linear model: the Malthus exponent is a and h(x)/x is flat") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}});
    MalthusOptions o;
    o.n = 20000;
    o.n_max = 80000;
    o.tolerance = 5e-3;
    const auto est = malthus_exponent(m, 1.0, o, {2024, 1});
    CHECK(std::abs(est.lambda - 0.7) <= std::max(5e-3, 3.0 * est.se));
    CHECK(est.bracket_lo <= est.lambda);
    CHECK(est.lambda <= est.bracket_hi);
    CHECK(est.bracket_hi <= m.gamma());

    const auto grid = log_grid(0.1, 10.0, 5);
    const auto h = estimate_h(m, est.lambda, 1.0, grid, 4000, est.horizon, {2024, 1});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CAPTURE(grid[i]);
        CHECK(std::abs(h.ell_values()[i] - 1.0) < 0.05);
    }
}

TEST_CASE("no fission: no return to x0 and no root") {
    const ModelSpec m = make_family("hump", {{"fission", "zero"}});
    MalthusOptions o;
    o.n = 200;
    o.n_max = 400;
    o.horizon_max = 128.0;
    CHECK_THROWS_AS(malthus_exponent(m, 1.0, o, {1, 1}), NoRootError);
}

TEST_CASE("log-trapezoid weights integrate power laws") {
    const auto grid = log_grid(0.1, 10.0, 201);
    const auto w = log_trapezoid_weights(grid);
    for (double k : {0.0, 1.0, -0.5, 2.0}) {
        double s = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) s += std::pow(grid[i], k) * grid[i] * w[i];
        const double exact = oracle::simpson([&](double x) { return std::pow(x, k); }, 0.1, 10.0, 200000);
        CAPTURE(k);
        CHECK(s == doctest::Approx(exact).epsilon(1e-3));
    }
}

TEST_CASE("harmonic estimate interpolates l in log-log and holds it constant outside") {
    const HarmonicEstimate h(1.0, 0.5, {0.1, 1.0, 10.0}, {2.0, 1.0, 0.5}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
    CHECK(h(1.0) == doctest::Approx(1.0));
    CHECK(h(10.0) == doctest::Approx(5.0));
    CHECK(h.ell(std::sqrt(10.0)) == doctest::Approx(std::sqrt(0.5)));
    CHECK(h.ell(1000.0) == doctest::Approx(0.5));
    CHECK(h.ell(1e-5) == doctest::Approx(2.0));
    CHECK_THROWS_AS(HarmonicEstimate(1.0, 0.5, {1.0, 2.0}, {1.0, 0.0}, {0, 0}, {0, 0}), InvalidHarmonic);
}

TEST_CASE("finite-difference profile is nonnegative and normalized against h") {
    const ModelSpec m = make_family("hump");
    const McContext ctx{31, 1};
    const double lambda = 1.0954;
    const auto hgrid = log_grid(0.1, 10.0, 9);
    const auto h = estimate_h(m, lambda, 1.0, hgrid, 2000, 256.0, ctx);
    const auto grid = log_grid(0.3, 3.0, 7);
    const auto nu = estimate_nu_fd(m, lambda, h, grid, 4000, 256.0, 2e-3, ctx, 1024.0);
    const auto w = log_trapezoid_weights(grid);
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(nu.nu[i] >= 0.0);
        mass += nu.nu[i] * h(grid[i]) * grid[i] * w[i];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(nu.pairing([&](double x) { return h(x); }) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("an insignificant derivative is reported as ill-conditioned") {
    const ModelSpec m = make_family("hump");
    const HarmonicEstimate h(1.0, 1.0, {0.1, 10.0}, {1.0, 1.0}, {0, 0}, {0, 0});
    const std::vector<double> grid{20.0, 30.0};
    // returns to a large mass within a short horizon essentially never happen
    CHECK_THROWS_AS(estimate_nu_fd(m, 1.0954, h, grid, 50, 2.0, 1e-3, {1, 1}), IllConditionedDerivative);
}
