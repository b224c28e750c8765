// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Expected values come from closed
// forms or from oracles in tests/unit/oracles.hpp, never from the library
// routine under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "../unit/oracles.hpp"
#include "gfrag/branching.hpp"
#include "gfrag/diagnostics.hpp"
#include "gfrag/families.hpp"
#include "gfrag/interp.hpp"
#include "gfrag/io.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"
#include "gfsim/app.hpp"

using namespace gfrag;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = false;
    std::string detail;
};

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Runs one criterion, enforcing its wall-clock budget, and prints the verdict line.
void criterion(int id, const std::string& title, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("threw: {}", e.what())};
    }
    const double elapsed = seconds_since(t0);
    const bool in_time = elapsed <= budget_seconds;
    const bool ok = o.ok && in_time;
    if (!ok) ++failures;
    std::printf("%s criterion %d: %s | %s | %.1f s (budget %.0f s)%s\n", ok ? "PASS" : "FAIL", id, title.c_str(),
                o.detail.c_str(), elapsed, budget_seconds, in_time ? "" : " over budget");
    std::fflush(stdout);
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string verdicts(const CheckReport& r) {
    return fmt::format("{} {:.3g}/{:.3g}", to_string(r.verdict), r.statistic, r.tolerance);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int gfsim(std::vector<std::string> args) {
    args.insert(args.begin(), "gfsim");
    std::ostringstream out, err;
    return gfsim::run_cli(args, out, err);
}

/// The hump solution shared by the long-time criteria.
const SpectralSolution& hump_solution() {
    static const SpectralSolution s = [] {
        const auto t0 = Clock::now();
        auto sol = solve_spectral(make_family("hump"), SpectralOptions{}, {2024, workers()});
        std::printf("# hump spectral solve: lambda %.5f (stderr %.1e) in %.1f s\n", sol.malthus.lambda, sol.malthus.se,
                    seconds_since(t0));
        return sol;
    }();
    return s;
}

Outcome degenerate_exactness() {
    const ModelSpec m = make_family("hump", {{"fission", "zero"}});
    const double x0 = 0.7;
    const std::vector<double> times{0.5, 1.0, 2.0};
    SimulationOptions o;
    o.horizon = 2.0;
    o.snapshot_times = times;
    RandomStream r1(1, StreamTag::population, 0), r2(1, StreamTag::tagged_path, 0);
    const auto run = simulate_population(m, x0, o, r1);
    const auto tagged = sample_at_times(m, x0, times, r2);
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = oracle::rk4_flow([&](double x) { return m.growth()(x); }, x0, times[k]);
        const auto& atoms = run.snapshots[k].atoms;
        if (atoms.size() != 1) return {false, fmt::format("{} atoms at t={}", atoms.size(), times[k])};
        worst = std::max(worst, std::abs(atoms[0].mass - expected) / expected);
        for (const auto& tf : standard_test_functions()) {
            const double lhs = tf.f(atoms[0].mass);
            const double rhs = x0 / tagged[k].mass * std::exp(tagged[k].log_weight) * tf.f(tagged[k].mass);
            if (lhs != 0.0 || rhs != 0.0) worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
        }
    }
    return {worst < 1e-8, fmt::format("max relative error {:.2e} (tol 1e-8)", worst)};
}

Outcome pathwise_mass_law() {
    const double a = 0.7, x0 = 1.0;
    const ModelSpec m = make_family("linear", {{"a", a}});
    std::vector<double> times;
    for (int i = 1; i <= 20; ++i) times.push_back(0.25 * i);
    SimulationOptions o;
    o.horizon = 5.0;
    o.snapshot_times = times;
    o.record_events = false;
    o.record_labels = false;
    double worst = 0.0;
    std::size_t capped = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        RandomStream rng(2, StreamTag::population, i);
        PopulationRun run;
        try {
            run = simulate_population(m, x0, o, rng);
        } catch (const ExplosionError& e) {
            run = e.partial();
            ++capped;
        }
        for (const auto& snap : run.snapshots) {
            const double expected = x0 * std::exp(a * snap.time);
            worst = std::max(worst, std::abs(observe(snap, [](double x) { return x; }) - expected) / expected);
        }
    }
    return {worst < 1e-6, fmt::format("max relative deviation {:.2e} over 1000 paths ({} capped)", worst, capped)};
}

Outcome linear_recovery() {
    const double a = 0.7;
    SpectralOptions o;
    o.malthus.n = 100'000;
    o.malthus.n_max = 100'000;
    o.h_grid = {0.1, 10.0, 16};
    o.n_h = 100'000;
    o.profile = false;
    const auto s = solve_spectral(make_family("linear", {{"a", a}}), o, {3, workers()});
    const double err = std::abs(s.malthus.lambda - a);
    const double tol = std::max(1e-3, 3.0 * s.malthus.se);
    const auto& ell = s.harmonic.ell_values();
    const auto [lo, hi] = std::minmax_element(ell.begin(), ell.end());
    const double spread = *hi / *lo - 1.0;
    return {err <= tol && spread <= 0.02,
            fmt::format("lambda {:.5f} (|err| {:.1e}, tol {:.1e}); h/x spread {:.2f}% (tol 2%)", s.malthus.lambda,
                        err, tol, 100 * spread)};
}

Outcome many_to_one() {
    ManyToOneOptions o;
    o.n = 100'000;
    o.times = {0.5, 1.0, 2.0};
    bool ok = true;
    std::string detail;
    for (const char* name : {"saturating", "hump"}) {
        const auto rep = many_to_one_check(make_family(name), 1.0, standard_test_functions(), o, {4, workers()});
        ok = ok && rep.verdict == Verdict::pass;
        detail += fmt::format("{}: {}; ", name, verdicts(rep));
    }
    return {ok, detail};
}

Outcome stopping_lines() {
    // One-jump closed form: tau ~ Exp(b), X_tau = e^{a tau}, ratio r uniform on (0, 1/2]:
    // E<Z,1> = 2, E<Z,Id> = b/(b-a), E<Z,x^2> = b/(b-2a) E[r^2 + (1-r)^2] = b/(b-2a) * 2/3.
    const double a = 0.7, b = 3.0;
    const ModelSpec lin = make_family("linear", {{"a", a}, {"b", b}});
    StoppingLineOptions o;
    o.n = 100'000;
    o.reference = {2.0, b / (b - a), b / (b - 2 * a) * 2.0 / 3.0, std::nullopt};
    const auto jump = stopping_line_check(lin, 1.0, StoppingLine::jump_count(1), standard_test_functions(), o,
                                          {5, workers()});
    // first entrance into (0, 5] from x0 = 8: frozen population against the stopped pdmp
    StoppingLineOptions e;
    e.n = 50'000;
    e.horizon = 200.0;
    const auto entrance = stopping_line_check(make_family("hump"), 8.0, StoppingLine::first_entrance(1e-9, 5.0),
                                              standard_test_functions(), e, {6, workers()});
    return {jump.verdict == Verdict::pass && entrance.verdict == Verdict::pass,
            fmt::format("jump_count(1): {}; first_entrance: {}", verdicts(jump), verdicts(entrance))};
}

Outcome martingale() {
    const auto& s = hump_solution();
    const auto cond = check_condition_main(make_family("hump"), s.malthus);
    MartingaleOptions o;
    o.n = 10'000;
    o.times = {1.0, 2.0, 4.0, 8.0};
    const auto rep = martingale_check(make_family("hump"), s, 1.0, o, {7, workers()});
    return {cond.verdict == Verdict::pass && rep.verdict == Verdict::pass,
            fmt::format("condition {}; martingale {}", to_string(cond.verdict), verdicts(rep))};
}

Outcome profile_cross_validation() {
    const auto& s = hump_solution();
    if (!s.profile) return {false, "no finite-difference profile"};
    const SpineModel spine = build_spine_model(make_family("hump"), s);
    const auto grid = s.options.nu_grid.masses();
    const auto sp = estimate_nu_spine(spine, 1.0, grid, SpineRunOptions{}, {8, workers()});
    // relative L1 on the interior points with an independent trapezoid rule in log y
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double w = 0.5 * std::log(grid[i + 1] / grid[i - 1]) * grid[i];
        num += std::abs(s.profile->nu[i] - sp.profile.nu[i]) * w;
        den += s.profile->nu[i] * w;
    }
    const double rel = num / den;
    return {rel <= 0.05, fmt::format("relative L1 {:.4f} (tol 0.05); spine escapes {}, half-run L1 {:.4f}", rel,
                                     sp.run.escapes, sp.run.half_run_l1)};
}

Outcome strong_malthus() {
    const auto& s = hump_solution();
    // a bump on [0.5, 2] scaled so that f <= h-hat everywhere
    const auto probe = log_grid(0.5, 2.0, 201);
    double hmin = s.harmonic(probe.front());
    for (double x : probe) hmin = std::min(hmin, s.harmonic(x));
    const std::vector<TestFunction> f{{"bump", bump(0.5, 2.0, 0.95 * hmin)}};
    StrongMalthusOptions o;
    o.n = 10'000;
    o.times = {2.0, 4.0, 8.0};
    const auto rep = strong_malthus_check(make_family("hump"), s, 1.0, f, o, {9, workers()});
    return {rep.verdict == Verdict::pass, fmt::format("E|R_8|/E[W_8] {}", verdicts(rep))};
}

Outcome criterion_checker() {
    const auto hump = lambda_criterion_check(make_family("hump"));
    const auto lin = lambda_criterion_check(make_family("linear", {{"a", 0.7}, {"b", 1.0}, {"kernel", "half"}}));
    const bool inf_fails = !lin.details["infinity_side"]["certified"].get<bool>();
    return {hump.verdict == Verdict::pass && lin.verdict == Verdict::fail && inf_fails,
            fmt::format("hump {}; pure linear {} with infinity side {}", verdicts(hump), verdicts(lin),
                        inf_fails ? "failing" : "certified")};
}

Outcome reproducibility() {
    const fs::path root = fs::temp_directory_path() / "gfrag_acceptance";
    fs::remove_all(root);
    const std::vector<std::string> sim{"run", "simulate", "--model", "hump", "--seed", "10", "simulate.horizon=4",
                                       "simulate.replicates=4"};
    auto run = [&](std::vector<std::string> args, const std::string& w, const fs::path& out) {
        args.insert(args.end(), {"--workers", w, "--out", out.string()});
        return gfsim(args);
    };
    if (run(sim, "1", root / "a") != 0 || run(sim, "1", root / "b") != 0 || run(sim, "8", root / "c") != 0)
        return {false, "simulate run failed"};
    std::size_t files = 0;
    for (int i = 0; i < 4; ++i) {
        for (const std::string base : {"events", "snapshots"}) {
            const std::string f = fmt::format("{}_{}.csv", base, i);
            const std::string ref = slurp(root / "a" / f);
            if (ref.empty() || ref != slurp(root / "b" / f) || ref != slurp(root / "c" / f))
                return {false, "CSV mismatch in " + f};
            ++files;
        }
    }
    const std::vector<std::string> chk{"check", "many-to-one", "--model", "hump", "--seed", "11", "check.n=2000"};
    if (run(chk, "1", root / "d") != 0 || run(chk, "8", root / "e") != 0) return {false, "check run failed"};
    auto aggregates = [](const fs::path& p) {
        auto r = read_json_file(p / "report.json");
        for (auto& item : r) item.erase("runtime_seconds");
        return r.dump();
    };
    const bool same = aggregates(root / "d") == aggregates(root / "e");
    fs::remove_all(root);
    return {same, fmt::format("{} CSVs bit-identical across reruns and worker counts; check aggregates {}", files,
                              same ? "identical" : "differ")};
}

}  // namespace

int main() {
    std::printf("# acceptance suite, %u worker(s)\n", workers());
    criterion(1, "degenerate exactness without fission", 1.0, degenerate_exactness);
    criterion(2, "pathwise mass law for linear growth", 30.0, pathwise_mass_law);
    criterion(3, "linear spectral recovery", 600.0, linear_recovery);
    criterion(4, "many-to-one agreement", 600.0, many_to_one);
    criterion(5, "stopping-line agreement", 300.0, stopping_lines);
    criterion(6, "intrinsic martingale", 900.0, martingale);
    criterion(7, "profile cross-validation", 900.0, profile_cross_validation);
    criterion(8, "strong Malthusian behaviour", 1200.0, strong_malthus);
    criterion(9, "criterion checker", 60.0, criterion_checker);
    criterion(10, "reproducibility", 300.0, reproducibility);
    std::printf("# %d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
