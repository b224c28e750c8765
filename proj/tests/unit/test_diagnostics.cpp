#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "gfrag/diagnostics.hpp"
#include "gfrag/families.hpp"
#include "gfrag/interp.hpp"

using namespace gfrag;

namespace {

SpectralSolution linear_solution() {
    SpectralSolution s;
    s.model = "linear";
    s.malthus.lambda = 0.7;
    s.malthus.se = 1e-3;
    s.harmonic = HarmonicEstimate(1.0, 0.7, {0.01, 100.0}, {1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0});
    return s;
}

}  // namespace

TEST_CASE("bump is supported on [lo, hi] and peaks at the geometric mean") {
    const ScalarFn f = bump(0.5, 2.0, 3.0);
    CHECK(f(0.4) == 0.0);
    CHECK(f(2.5) == 0.0);
    CHECK(f(1.0) == doctest::Approx(3.0));
    CHECK(f(0.8) == doctest::Approx(f(1.25)));
    CHECK(f(0.7) > 0.0);
    CHECK(f(0.7) < 3.0);
    CHECK(standard_test_functions().size() == 4);
}

TEST_CASE("criterion: the hump certifies both sides") {
    const auto rep = lambda_criterion_check(make_family("hump"));
    CHECK(rep.verdict == Verdict::pass);
    CHECK(rep.statistic == 2.0);
    CHECK(rep.details["zero_side"]["certified"].get<bool>());
    CHECK(rep.details["infinity_side"]["certified"].get<bool>());
}

TEST_CASE("criterion: pure linear growth with equal halves fails on the infinity side only") {
    // g_inf = 0.7 q + 2^{-q} - 1 > 0 for every q > 0; g_zero = -0.7 q + 2^q - 1 < 0 for small q
    const auto rep = lambda_criterion_check(make_family("linear", {{"a", 0.7}, {"b", 1.0}, {"kernel", "half"}}));
    CHECK(rep.verdict == Verdict::fail);
    CHECK(rep.statistic == 1.0);
    CHECK_FALSE(rep.details["infinity_side"]["certified"].get<bool>());
    CHECK(rep.details["zero_side"]["certified"].get<bool>());
}

TEST_CASE("many-to-one is exact without fission") {
    const ModelSpec m = make_family("hump", {{"fission", "zero"}});
    ManyToOneOptions o;
    o.n = 50;
    const auto rep = many_to_one_check(m, 0.8, standard_test_functions(), o, {9, 1});
    CHECK(rep.verdict == Verdict::pass);
    CHECK(rep.statistic < 1e-3);
}

TEST_CASE("many-to-one holds for the saturating model at moderate n") {
    ManyToOneOptions o;
    // the f = 1 side carries the heavy 1/X weight, so small n understates its stderr
    o.n = 20000;
    o.times = {0.5, 1.5};
    const auto rep = many_to_one_check(make_family("saturating"), 1.0, standard_test_functions(), o, {10, 1});
    CHECK(rep.verdict == Verdict::pass);
    CHECK(rep.statistic <= rep.tolerance);
}

TEST_CASE("a check that hits the population cap is inconclusive, never pass") {
    ManyToOneOptions o;
    o.n = 200;
    o.cap = 3;
    o.times = {3.0};
    const auto rep = many_to_one_check(make_family("linear"), 1.0, standard_test_functions(), o, {11, 1});
    CHECK(rep.verdict == Verdict::inconclusive);
}

TEST_CASE("stopping line at the first fission matches the closed form") {
    // X_tau = e^{a tau}, tau ~ Exp(b): E[<Z_tau, 1>] = 2 and E[<Z_tau, Id>] = b / (b - a) = 2
    const ModelSpec m = make_family("linear", {{"a", 0.7}, {"b", 1.4}});
    StoppingLineOptions o;
    o.n = 20000;
    o.reference = {2.0, 2.0, std::nullopt, std::nullopt};
    const auto rep =
        stopping_line_check(m, 1.0, StoppingLine::jump_count(1), standard_test_functions(), o, {12, 1});
    CHECK(rep.verdict == Verdict::pass);
}

TEST_CASE("stopping line at a first-entrance line") {
    // from x0 = 8 the smaller daughter r x <= x/2 always lands in (0, 5] unless x > 10, so the
    // frozen population stays small
    StoppingLineOptions o;
    o.n = 4000;
    o.horizon = 200.0;
    const auto rep = stopping_line_check(make_family("hump"), 8.0, StoppingLine::first_entrance(1e-9, 5.0),
                                         standard_test_functions(), o, {13, 1});
    CHECK(rep.verdict == Verdict::pass);
}

TEST_CASE("linear martingale is constant but the report stays informational") {
    MartingaleOptions o;
    o.n = 200;
    o.times = {1.0, 2.0};
    const auto rep = martingale_check(make_family("linear"), linear_solution(), 1.0, o, {14, 1});
    CHECK(rep.verdict == Verdict::inconclusive);
    CHECK_FALSE(rep.notes.empty());
    CHECK(rep.details["condition_main"].get<std::string>() == "fail");
}

TEST_CASE("reports are deterministic and independent of the worker count") {
    ManyToOneOptions o;
    o.n = 300;
    o.times = {1.0};
    const auto a = many_to_one_check(make_family("hump"), 1.0, standard_test_functions(), o, {15, 1});
    const auto b = many_to_one_check(make_family("hump"), 1.0, standard_test_functions(), o, {15, 3});
    CHECK(a.statistic == b.statistic);
    CHECK(a.details == b.details);
    CHECK(a.inputs_digest == b.inputs_digest);
}
