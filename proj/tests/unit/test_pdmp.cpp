#include <doctest.h>

#include <cmath>
#include <vector>

#include "gfrag/families.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/stats.hpp"

using namespace gfrag;

TEST_CASE("the weight is (X_t/X_0) times the product of pre/post ratios") {
    const ModelSpec m = make_family("hump");
    for (std::uint64_t i = 0; i < 20; ++i) {
        RandomStream rng(3, StreamTag::tagged_path, i);
        auto state = WeightedPathState::start(0.7);
        while (step_pdmp(m, state, 10.0, rng) == StepOutcome::jumped) {
        }
        double expected = std::log(state.mass / 0.7);
        for (const auto& j : state.jumps) expected -= std::log(j.ratio);
        CHECK(state.log_weight == doctest::Approx(expected).epsilon(1e-12));
        CHECK(state.time == doctest::Approx(10.0));
    }
}

TEST_CASE("linear growth: the weight is e^{at} exactly") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}});
    RandomStream rng(4, StreamTag::tagged_path, 0);
    const std::vector<double> times{0.5, 1.0, 3.0};
    const auto samples = sample_at_times(m, 1.0, times, rng);
    for (std::size_t k = 0; k < times.size(); ++k) CHECK(samples[k].log_weight == doctest::Approx(0.7 * times[k]));
}

TEST_CASE("many-to-one with f = 1 recovers the Yule mean e^{bt}") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}, {"b", 1.0}, {"kernel", "half"}});
    const std::vector<double> times{1.0};
    std::vector<double> v;
    for (std::uint64_t i = 0; i < 50000; ++i) {
        RandomStream rng(5, StreamTag::tagged_path, i);
        const auto s = sample_at_times(m, 1.0, times, rng)[0];
        v.push_back(1.0 / s.mass * std::exp(s.log_weight));
    }
    const auto est = mean_stderr(v);
    CHECK(std::abs(est.mean - std::exp(1.0)) < 4.0 * est.se);
}

TEST_CASE("size-biased pick: the followed daughter is the small one with probability r") {
    // atoms kernel with r = 0.2: small daughter followed with probability 0.2
    const ModelSpec m = make_family("linear", {{"kernel", "atoms"}, {"atoms", {{0.2, 1.0}}}});
    std::size_t small = 0, total = 0;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        RandomStream rng(6, StreamTag::tagged_path, i);
        auto state = WeightedPathState::start(1.0);
        if (step_pdmp(m, state, 100.0, rng) == StepOutcome::jumped) {
            ++total;
            small += std::abs(state.jumps.back().ratio - 0.2) < 1e-12;
        }
    }
    const double p = static_cast<double>(small) / total;
    CHECK(std::abs(p - 0.2) < 4.0 * std::sqrt(0.2 * 0.8 / total));
}

TEST_CASE("hitting without fission is deterministic") {
    const ModelSpec m = make_family("hump", {{"fission", "zero"}});
    RandomStream rng(1, StreamTag::hitting, 0);
    const auto up = sample_hitting(m, 0.5, 2.0, 100.0, rng);
    CHECK(up.hit);
    CHECK(up.hitting_time == doctest::Approx(flow_time(m, 0.5, 2.0)));
    CHECK(up.log_weight_at_hit == doctest::Approx(std::log(4.0)));
    const auto down = sample_hitting(m, 2.0, 0.5, 100.0, rng);
    CHECK_FALSE(down.hit);
    CHECK_FALSE(down.truncated);
    // first return from x to itself needs a jump: never without fission
    const auto back = sample_hitting(m, 1.0, 1.0, 100.0, rng);
    CHECK_FALSE(back.hit);
    // a target beyond the horizon is truncated
    const auto late = sample_hitting(m, 0.5, 2.0, 0.5 * flow_time(m, 0.5, 2.0), rng);
    CHECK_FALSE(late.hit);
    CHECK(late.truncated);
}

TEST_CASE("first return happens strictly after time 0 and at the target mass") {
    const ModelSpec m = make_family("hump");
    for (std::uint64_t i = 0; i < 200; ++i) {
        RandomStream rng(7, StreamTag::hitting, i);
        const auto s = sample_hitting(m, 1.0, 1.0, 500.0, rng);
        if (s.hit) {
            CHECK(s.hitting_time > 0.0);
            CHECK(s.integrand(0.0) == doctest::Approx(std::exp(s.log_weight_at_hit)));
        }
    }
}

TEST_CASE("stopped path at the first jump matches the one-jump closed form") {
    // linear: X_tau = e^{a tau}, tau ~ Exp(b); weight at tau is e^{a tau}
    const ModelSpec m = make_family("linear", {{"a", 0.7}, {"b", 1.4}});
    std::vector<double> v;
    for (std::uint64_t i = 0; i < 40000; ++i) {
        RandomStream rng(8, StreamTag::stopped_path, i);
        const auto s = sample_stopped(m, 1.0, StoppingLine::jump_count(1), 500.0, rng);
        REQUIRE(s.stopped);
        v.push_back(1.0 / s.mass * std::exp(s.log_weight));
    }
    // x0 / X_tau * E_tau is 1 / ratio; E[1 / ratio] under the size-biased pick is 2 (two daughters)
    const auto est = mean_stderr(v);
    CHECK(std::abs(est.mean - 2.0) < 4.0 * est.se);
}

TEST_CASE("record_path starts at x0 and its last weight matches the identity") {
    const ModelSpec m = make_family("saturating");
    RandomStream rng(2, StreamTag::dump, 0);
    const auto path = record_path(m, 0.8, 6.0, rng);
    REQUIRE(path.size() >= 2);
    CHECK(path.front().mass == 0.8);
    CHECK(path.front().log_weight == 0.0);
    CHECK(path.back().time == doctest::Approx(6.0));
    double expected = std::log(path.back().mass / 0.8);
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (path[i].event == "jump") expected += std::log(path[i - 1].mass / path[i].mass);
    }
    CHECK(path.back().log_weight == doctest::Approx(expected).epsilon(1e-12));
}
