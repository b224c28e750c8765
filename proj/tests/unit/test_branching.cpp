#include <doctest.h>

#include <cmath>
#include <vector>

#include "gfrag/branching.hpp"
#include "gfrag/errors.hpp"
#include "gfrag/families.hpp"
#include "gfrag/stats.hpp"

using namespace gfrag;

namespace {

SimulationOptions options(double horizon, std::vector<double> snaps = {}, std::size_t cap = 1'000'000) {
    SimulationOptions o;
    o.horizon = horizon;
    o.snapshot_times = std::move(snaps);
    o.cap = cap;
    return o;
}

}  // namespace

TEST_CASE("Ulam-Harris labels") {
    const Label root;
    const Label a = root.child(1).child(2);
    CHECK(root.str() == "root");
    CHECK(a.str() == "1.2");
    CHECK(Label::parse("1.2") == a);
    CHECK(Label::parse("root") == root);
    CHECK(root.is_prefix_of(a));
    CHECK(root.child(1).is_prefix_of(a));
    CHECK_FALSE(root.child(2).is_prefix_of(a));
    CHECK(a.generation() == 2);
    CHECK_THROWS_AS(Label::parse("1..2"), DomainError);
    CHECK_THROWS_AS(Label::parse("x"), DomainError);
}

TEST_CASE("without fission the snapshot is the flow of the initial mass") {
    const ModelSpec m = make_family("hump", {{"fission", "zero"}});
    RandomStream rng(1, StreamTag::population, 0);
    const auto run = simulate_population(m, 0.5, options(3.0, {1.0, 3.0}), rng);
    REQUIRE(run.snapshots.size() == 2);
    for (const auto& s : run.snapshots) {
        REQUIRE(s.atoms.size() == 1);
        CHECK(s.atoms[0].mass == doctest::Approx(flow(m, 0.5, s.time)).epsilon(1e-12));
        CHECK(s.atoms[0].label == Label());
    }
    CHECK(run.events.empty());
}

TEST_CASE("identical seeds give identical event logs") {
    const ModelSpec m = make_family("hump");
    auto run = [&](std::uint64_t seed) {
        RandomStream rng(seed, StreamTag::population, 4);
        return simulate_population(m, 1.0, options(4.0, {2.0, 4.0}), rng);
    };
    const auto a = run(11), b = run(11), c = run(12);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].label == b.events[i].label);
        CHECK(a.events[i].mass_before == b.events[i].mass_before);
        CHECK(a.events[i].ratio == b.events[i].ratio);
    }
    CHECK((a.events.size() != c.events.size() || a.events.front().time != c.events.front().time));
}

TEST_CASE("fissions conserve mass and events are time ordered") {
    const ModelSpec m = make_family("saturating");
    RandomStream rng(3, StreamTag::population, 0);
    const auto run = simulate_population(m, 1.0, options(5.0), rng);
    REQUIRE_FALSE(run.events.empty());
    for (std::size_t i = 1; i < run.events.size(); ++i) CHECK(run.events[i].time >= run.events[i - 1].time);
    // each individual's birth mass equals its parent's mass at fission times the ratio
    for (const auto& ind : run.individuals) {
        if (ind.parent < 0) continue;
        const auto& parent = run.individuals[static_cast<std::size_t>(ind.parent)];
        CHECK(ind.birth_time == parent.fission_time);
        const double parent_mass = flow(m, parent.birth_mass, parent.fission_time - parent.birth_time);
        CHECK(ind.birth_mass <= parent_mass * (1.0 + 1e-12));
        CHECK(ind.generation == parent.generation + 1);
    }
}

TEST_CASE("linear growth: total mass is x0 e^{at} on every path") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}});
    for (std::uint64_t i = 0; i < 50; ++i) {
        RandomStream rng(8, StreamTag::population, i);
        const auto run = simulate_population(m, 2.0, options(5.0, {1.0, 2.5, 5.0}), rng);
        for (const auto& s : run.snapshots) {
            CHECK(s.total_mass() == doctest::Approx(2.0 * std::exp(0.7 * s.time)).epsilon(1e-9));
        }
    }
}

TEST_CASE("Yule oracle: constant fission rate b gives E[N_t] = e^{bt}") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}, {"b", 1.0}, {"kernel", "half"}});
    std::vector<double> counts;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        RandomStream rng(21, StreamTag::population, i);
        SimulationOptions o = options(1.0, {1.0});
        o.record_events = false;
        o.record_labels = false;
        counts.push_back(static_cast<double>(simulate_population(m, 1.0, o, rng).snapshots[0].size()));
    }
    const auto est = mean_stderr(counts);
    CHECK(std::abs(est.mean - std::exp(1.0)) < 4.0 * est.se);
}

TEST_CASE("the population cap raises ExplosionError with the partial run") {
    const ModelSpec m = make_family("linear", {{"b", 5.0}});
    RandomStream rng(4, StreamTag::population, 0);
    try {
        simulate_population(m, 1.0, options(20.0, {}, 50), rng);
        FAIL("expected an explosion");
    } catch (const ExplosionError& e) {
        CHECK(e.time() < 20.0);
        CHECK(e.partial().peak_population > 50);
    }
}

TEST_CASE("jump-count stopping line freezes the two daughters of the first fission") {
    const ModelSpec m = make_family("linear", {{"a", 0.7}, {"b", 1.4}});
    std::vector<double> id;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        RandomStream rng(6, StreamTag::frozen, i);
        SimulationOptions o = options(200.0);
        o.record_events = false;
        const auto frozen = freeze_at(m, 1.0, StoppingLine::jump_count(1), o, rng);
        REQUIRE(frozen.atoms.size() == 2);
        CHECK(frozen.unfrozen == 0);
        CHECK(frozen.atoms[0].time == frozen.atoms[1].time);
        id.push_back(observe(frozen, [](double x) { return x; }));
    }
    // X_tau = e^{a tau} with tau ~ Exp(b): E = b / (b - a) = 2
    const auto est = mean_stderr(id);
    CHECK(std::abs(est.mean - 2.0) < 4.0 * est.se);
}

TEST_CASE("first-entrance line freezes cells entering the interval") {
    const ModelSpec m = make_family("hump");
    RandomStream rng(2, StreamTag::frozen, 0);
    const auto frozen = freeze_at(m, 0.5, StoppingLine::first_entrance(2.0), options(10.0), rng);
    REQUIRE_FALSE(frozen.atoms.empty());
    for (const auto& a : frozen.atoms) CHECK(a.mass >= 2.0 * (1.0 - 1e-12));
}

TEST_CASE("fixed-time line equals the snapshot") {
    const ModelSpec m = make_family("hump");
    RandomStream r1(5, StreamTag::population, 0), r2(5, StreamTag::population, 0);
    const auto frozen = freeze_at(m, 1.0, StoppingLine::fixed_time(2.0), options(10.0), r1);
    const auto run = simulate_population(m, 1.0, options(2.0, {2.0}), r2);
    const auto f = [](double x) { return x * x; };
    CHECK(observe(frozen, f) == doctest::Approx(observe(run.snapshots[0], f)).epsilon(1e-12));
}

TEST_CASE("invalid inputs are rejected") {
    const ModelSpec m = make_family("hump");
    RandomStream rng(1, StreamTag::population, 0);
    CHECK_THROWS_AS(simulate_population(m, -1.0, options(1.0), rng), DomainError);
    CHECK_THROWS_AS(simulate_population(m, 1.0, options(1.0, {2.0}), rng), DomainError);
    CHECK_THROWS_AS(StoppingLine::first_entrance(0.0), DomainError);
}
