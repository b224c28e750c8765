#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gfrag/parallel.hpp"
#include "gfrag/rng.hpp"
#include "gfrag/stats.hpp"

using namespace gfrag;

// Known-answer vectors published with Random123 for philox4x32-10.
TEST_CASE("philox4x32-10 known answers") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and keyed by seed, tag and replicate") {
    auto draw = [](std::uint64_t seed, StreamTag tag, std::uint64_t rep) {
        RandomStream s(seed, tag, rep);
        std::vector<std::uint32_t> v;
        for (int i = 0; i < 16; ++i) v.push_back(s());
        return v;
    };
    CHECK(draw(7, StreamTag::population, 3) == draw(7, StreamTag::population, 3));
    CHECK(draw(7, StreamTag::population, 3) != draw(8, StreamTag::population, 3));
    CHECK(draw(7, StreamTag::population, 3) != draw(7, StreamTag::hitting, 3));
    CHECK(draw(7, StreamTag::population, 3) != draw(7, StreamTag::population, 4));
}

TEST_CASE("uniform draws lie in the open unit interval with the right moments") {
    RandomStream s(1, StreamTag::validation, 0);
    std::vector<double> xs(200000);
    for (double& x : xs) {
        x = s.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
    }
    const auto m = mean_stderr(xs);
    CHECK(std::abs(m.mean - 0.5) < 4.0 * m.se);
    std::vector<double> sq;
    for (double x : xs) sq.push_back(x * x);
    const auto m2 = mean_stderr(sq);
    CHECK(std::abs(m2.mean - 1.0 / 3.0) < 4.0 * m2.se);
}

TEST_CASE("exponential draws") {
    RandomStream s(2, StreamTag::validation, 0);
    std::vector<double> xs(200000);
    for (double& x : xs) x = s.exponential(2.5);
    const auto m = mean_stderr(xs);
    CHECK(std::abs(m.mean - 0.4) < 4.0 * m.se);
    CHECK(std::isinf(s.exponential(0.0)));
}

TEST_CASE("parallel_for results do not depend on the worker count") {
    auto run = [](unsigned workers) {
        std::vector<double> out(1000);
        parallel_for(out.size(), workers, [&](std::size_t i) {
            RandomStream s(99, StreamTag::validation, i);
            double acc = 0.0;
            for (int k = 0; k < 10; ++k) acc += s.uniform();
            out[i] = acc;
        });
        return out;
    };
    const auto one = run(1);
    CHECK(one == run(3));
    CHECK(one == run(8));
}

TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                     if (i == 37) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("mean_stderr matches hand computation") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const auto m = mean_stderr(xs);
    CHECK(m.mean == doctest::Approx(2.5));
    // sample variance 5/3, se = sqrt(5/3 / 4)
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 12.0)));
    CHECK(m.n == 4);
}
