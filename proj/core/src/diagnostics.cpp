#include "gfrag/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "gfrag/errors.hpp"
#include "gfrag/parallel.hpp"
#include "gfrag/pdmp.hpp"

namespace gfrag {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json function_names(const std::vector<TestFunction>& fs) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& f : fs) names.push_back(f.name);
    return names;
}

nlohmann::json base_inputs(const ModelSpec& model, double x0, const McContext& ctx) {
    return {{"model", model.name()}, {"parameters", model.parameters()}, {"x0", x0}, {"seed", ctx.seed}};
}

/// |a - b| / (z * combined stderr + floor * scale); at most 1 means agreement
double discrepancy(double a, double sa, double b, double sb, double z, double floor) {
    const double slack = z * combined_stderr(sa, sb) + floor * std::max(std::abs(a), std::abs(b));
    const double gap = std::abs(a - b);
    if (slack <= 0.0) return gap == 0.0 ? 0.0 : kNever;
    return gap / slack;
}

std::vector<double> sorted_unique(std::vector<double> ts) {
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

const std::vector<double>& require_times(const std::vector<double>& ts, const char* who) {
    if (ts.empty()) throw DomainError(fmt::format("{}: empty time grid", who));
    if (!std::is_sorted(ts.begin(), ts.end())) throw DomainError(fmt::format("{}: times must be sorted", who));
    return ts;
}

}  // namespace

ScalarFn bump(double lo, double hi, double height) {
    if (!(lo > 0.0 && hi > lo)) throw DomainError("bump: need 0 < lo < hi");
    const double centre = std::log(lo * hi);
    const double width = std::log(hi / lo);
    return [=](double x) {
        const double u = (2.0 * std::log(x) - centre) / width;
        if (!(std::abs(u) < 1.0)) return 0.0;
        return height * std::exp(1.0 - 1.0 / (1.0 - u * u));
    };
}

std::vector<TestFunction> standard_test_functions() {
    return {{"one", [](double) { return 1.0; }},
            {"id", [](double x) { return x; }},
            {"square", [](double x) { return x * x; }},
            {"bump[0.5,2]", bump(0.5, 2.0)}};
}

MeanStderr PopulationFunctionals::column(std::size_t k) const {
    std::vector<double> col;
    col.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!capped[i]) col.push_back(values[i][k]);
    }
    return mean_stderr(col);
}

PopulationFunctionals population_functionals(const ModelSpec& model, double x0, const std::vector<double>& times,
                                             std::size_t n, std::size_t cap, const McContext& ctx, StreamTag tag,
                                             const SnapshotFunctional& functional) {
    SimulationOptions sim;
    sim.horizon = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
    sim.cap = cap;
    sim.snapshot_times = times;
    sim.record_events = false;
    sim.record_labels = false;
    PopulationFunctionals out;
    out.values.resize(n);
    std::vector<char> capped(n, 0);
    parallel_for(n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, tag, i);
        try {
            const PopulationRun run = simulate_population(model, x0, sim, rng);
            out.values[i] = functional(run.snapshots);
        } catch (const ExplosionError&) {
            capped[i] = 1;
        }
    });
    out.capped.assign(capped.begin(), capped.end());
    out.capped_count = static_cast<std::size_t>(std::count(capped.begin(), capped.end(), 1));
    return out;
}

nlohmann::json ManyToOneOptions::to_json() const {
    return {{"times", times}, {"n", n}, {"cap", cap}, {"z", z}, {"relative_floor", relative_floor},
            {"cap_rate_tolerance", cap_rate_tolerance}};
}

CheckReport many_to_one_check(const ModelSpec& model, double x0, const std::vector<TestFunction>& functions,
                              const ManyToOneOptions& options, const McContext& ctx) {
    const auto start = Clock::now();
    const auto& times = require_times(options.times, "many_to_one_check");
    const std::size_t nf = functions.size();

    const auto lhs = population_functionals(
        model, x0, times, options.n, options.cap, ctx, StreamTag::population,
        [&](const std::vector<PopulationSnapshot>& snaps) {
            std::vector<double> v;
            for (const auto& s : snaps) {
                for (const auto& f : functions) v.push_back(observe(s, f.f));
            }
            return v;
        });

    std::vector<std::vector<double>> rhs(options.n);
    parallel_for(options.n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, StreamTag::tagged_path, i);
        const auto samples = sample_at_times(model, x0, times, rng);
        auto& row = rhs[i];
        for (const auto& s : samples) {
            const double scale = x0 / s.mass * std::exp(s.log_weight);
            for (const auto& f : functions) row.push_back(scale * f.f(s.mass));
        }
    });

    CheckReport rep;
    rep.name = "many_to_one";
    nlohmann::json inputs = base_inputs(model, x0, ctx);
    inputs["options"] = options.to_json();
    inputs["functions"] = function_names(functions);
    rep.inputs_digest = digest(inputs);
    rep.statistic_label = "max |LHS-RHS| / (z combined stderr + relative floor)";
    rep.tolerance = 1.0;
    nlohmann::json items = nlohmann::json::array();
    double worst = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const std::size_t k = ti * nf + fi;
            const MeanStderr l = lhs.column(k);
            std::vector<double> col(options.n);
            for (std::size_t i = 0; i < options.n; ++i) col[i] = rhs[i][k];
            const MeanStderr r = mean_stderr(col);
            const double d = discrepancy(l.mean, l.se, r.mean, r.se, options.z, options.relative_floor);
            worst = std::max(worst, d);
            items.push_back({{"t", times[ti]},
                             {"f", functions[fi].name},
                             {"lhs", l.mean},
                             {"lhs_stderr", l.se},
                             {"rhs", r.mean},
                             {"rhs_stderr", r.se},
                             {"discrepancy", d},
                             {"pass", d <= 1.0}});
        }
    }
    rep.statistic = worst;
    rep.details = {{"items", items}, {"cap_rate", lhs.cap_rate()}};
    if (lhs.cap_rate() > options.cap_rate_tolerance) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back(fmt::format("population cap hit in {:.2f}% of runs", 100 * lhs.cap_rate()));
    } else {
        rep.verdict = worst <= rep.tolerance ? Verdict::pass : Verdict::fail;
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

nlohmann::json StoppingLineOptions::to_json() const {
    nlohmann::json ref = nlohmann::json::array();
    for (const auto& r : reference) ref.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
    return {{"n", n}, {"horizon", horizon}, {"cap", cap}, {"z", z}, {"relative_floor", relative_floor},
            {"cap_rate_tolerance", cap_rate_tolerance}, {"reference", ref}};
}

CheckReport stopping_line_check(const ModelSpec& model, double x0, const StoppingLine& line,
                                const std::vector<TestFunction>& functions, const StoppingLineOptions& options,
                                const McContext& ctx) {
    const auto start = Clock::now();
    const std::size_t nf = functions.size();
    if (!options.reference.empty() && options.reference.size() != nf) {
        throw DomainError("stopping_line_check: one reference value per test function");
    }

    SimulationOptions sim;
    sim.horizon = options.horizon;
    sim.cap = options.cap;
    sim.record_events = false;
    sim.record_labels = false;
    std::vector<std::vector<double>> lhs(options.n);
    std::vector<char> capped(options.n, 0), unfrozen(options.n, 0);
    parallel_for(options.n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, StreamTag::frozen, i);
        try {
            const FrozenMeasure m = freeze_at(model, x0, line, sim, rng);
            for (const auto& f : functions) lhs[i].push_back(observe(m, f.f));
            unfrozen[i] = m.unfrozen > 0;
        } catch (const ExplosionError&) {
            capped[i] = 1;
        }
    });
    std::vector<std::vector<double>> rhs(options.n);
    std::vector<char> truncated(options.n, 0);
    parallel_for(options.n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, StreamTag::stopped_path, i);
        const StoppedSample s = sample_stopped(model, x0, line, options.horizon, rng);
        truncated[i] = s.truncated;
        for (const auto& f : functions) {
            rhs[i].push_back(s.stopped ? x0 / s.mass * std::exp(s.log_weight) * f.f(s.mass) : 0.0);
        }
    });

    const auto rate = [&](const std::vector<char>& flags) {
        return static_cast<double>(std::count(flags.begin(), flags.end(), 1)) / static_cast<double>(options.n);
    };
    const double cap_rate = rate(capped);
    const double unfrozen_rate = rate(unfrozen);
    const double truncation_rate = rate(truncated);

    CheckReport rep;
    rep.name = "stopping_line";
    nlohmann::json inputs = base_inputs(model, x0, ctx);
    inputs["line"] = line.describe();
    inputs["options"] = options.to_json();
    inputs["functions"] = function_names(functions);
    rep.inputs_digest = digest(inputs);
    rep.statistic_label = "max pairwise |difference| / (z combined stderr + relative floor)";
    rep.tolerance = 1.0;
    nlohmann::json items = nlohmann::json::array();
    double worst = 0.0;
    for (std::size_t fi = 0; fi < nf; ++fi) {
        std::vector<double> lc, rc;
        for (std::size_t i = 0; i < options.n; ++i) {
            if (!capped[i]) lc.push_back(lhs[i][fi]);
            rc.push_back(rhs[i][fi]);
        }
        const MeanStderr l = mean_stderr(lc);
        const MeanStderr r = mean_stderr(rc);
        double d = discrepancy(l.mean, l.se, r.mean, r.se, options.z, options.relative_floor);
        nlohmann::json item = {{"f", functions[fi].name}, {"lhs", l.mean}, {"lhs_stderr", l.se},
                               {"rhs", r.mean},           {"rhs_stderr", r.se}, {"lhs_vs_rhs", d}};
        if (!options.reference.empty() && options.reference[fi]) {
            const double ref = *options.reference[fi];
            const double dl = discrepancy(l.mean, l.se, ref, 0.0, options.z, options.relative_floor);
            const double dr = discrepancy(r.mean, r.se, ref, 0.0, options.z, options.relative_floor);
            item["reference"] = ref;
            item["lhs_vs_reference"] = dl;
            item["rhs_vs_reference"] = dr;
            d = std::max({d, dl, dr});
        }
        item["pass"] = d <= 1.0;
        worst = std::max(worst, d);
        items.push_back(item);
    }
    rep.statistic = worst;
    rep.details = {{"line", line.describe()},
                   {"items", items},
                   {"cap_rate", cap_rate},
                   {"unfrozen_rate", unfrozen_rate},
                   {"truncation_rate", truncation_rate}};
    const double excess = std::max({cap_rate, unfrozen_rate, truncation_rate});
    if (excess > options.cap_rate_tolerance) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back(fmt::format("cap {:.2f}%, unfrozen {:.2f}%, truncated {:.2f}% of runs", 100 * cap_rate,
                                        100 * unfrozen_rate, 100 * truncation_rate));
    } else {
        rep.verdict = worst <= rep.tolerance ? Verdict::pass : Verdict::fail;
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

namespace {

double harmonic_stderr_at(const HarmonicEstimate& h, double x) {
    const auto& grid = h.grid();
    const auto it = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
        return std::abs(std::log(a / x)) < std::abs(std::log(b / x));
    });
    return x * h.ell_se()[static_cast<std::size_t>(it - grid.begin())];
}

/// Precondition shared by the long-time checks: reports stay informational
/// unless the boundary growth condition passes.
bool condition_holds(const ModelSpec& model, const SpectralSolution& solution, CheckReport& rep) {
    const CheckReport cond = check_condition_main(model, solution.malthus);
    rep.details["condition_main"] = std::string(to_string(cond.verdict));
    if (cond.verdict != Verdict::pass) {
        rep.notes.push_back(fmt::format("boundary growth condition verdict is {}; report is informational",
                                        to_string(cond.verdict)));
        return false;
    }
    return true;
}

}  // namespace

nlohmann::json MartingaleOptions::to_json() const {
    return {{"times", times}, {"n", n}, {"cap", cap}, {"z", z}, {"plateau_tolerance", plateau_tolerance},
            {"cap_rate_tolerance", cap_rate_tolerance}};
}

CheckReport martingale_check(const ModelSpec& model, const SpectralSolution& solution, double x0,
                             const MartingaleOptions& options, const McContext& ctx) {
    const auto start = Clock::now();
    const auto& times = require_times(options.times, "martingale_check");
    const HarmonicEstimate& h = solution.harmonic;
    const double lambda = solution.malthus.lambda;

    const auto runs = population_functionals(model, x0, times, options.n, options.cap, ctx, StreamTag::martingale,
                                             [&](const std::vector<PopulationSnapshot>& snaps) {
                                                 std::vector<double> v;
                                                 for (const auto& s : snaps) {
                                                     const double w = std::exp(-lambda * s.time) * observe(s, h);
                                                     v.push_back(w);
                                                     v.push_back(w * w);
                                                 }
                                                 return v;
                                             });

    CheckReport rep;
    rep.name = "martingale";
    nlohmann::json inputs = base_inputs(model, x0, ctx);
    inputs["options"] = options.to_json();
    inputs["lambda"] = lambda;
    rep.inputs_digest = digest(inputs);
    rep.statistic_label =
        "max(|E W_t - h(x0)| / (z combined stderr), second-moment drift / (plateau tolerance + z slack))";
    rep.tolerance = 1.0;
    const bool informational = !condition_holds(model, solution, rep);

    const double h0 = h(x0);
    const double se_h0 = harmonic_stderr_at(h, x0);
    nlohmann::json items = nlohmann::json::array();
    double worst = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const MeanStderr w = runs.column(2 * ti);
        const MeanStderr w2 = runs.column(2 * ti + 1);
        const double se = std::sqrt(w.se * w.se + std::pow(times[ti] * w.mean * solution.malthus.se, 2) + se_h0 * se_h0);
        const double d = se > 0.0 ? std::abs(w.mean - h0) / (options.z * se) : (w.mean == h0 ? 0.0 : kNever);
        worst = std::max(worst, d);
        items.push_back({{"t", times[ti]},
                         {"mean_w", w.mean},
                         {"stderr_w", w.se},
                         {"combined_stderr", se},
                         {"second_moment", w2.mean},
                         {"second_moment_stderr", w2.se},
                         {"discrepancy", d}});
    }
    double drift = 0.0, slack = 0.0;
    if (times.size() >= 2) {
        const MeanStderr a = runs.column(2 * (times.size() - 2) + 1);
        const MeanStderr b = runs.column(2 * (times.size() - 1) + 1);
        drift = a.mean > 0.0 ? std::abs(b.mean - a.mean) / a.mean : 0.0;
        slack = a.mean > 0.0 ? options.z * combined_stderr(a.se, b.se) / a.mean : 0.0;
        worst = std::max(worst, drift / (options.plateau_tolerance + slack));
    }
    rep.statistic = worst;
    rep.details["items"] = items;
    rep.details["h_x0"] = h0;
    rep.details["h_x0_stderr"] = se_h0;
    rep.details["lambda_stderr"] = solution.malthus.se;
    rep.details["plateau_drift"] = drift;
    rep.details["plateau_slack"] = slack;
    rep.details["cap_rate"] = runs.cap_rate();
    if (runs.cap_rate() > options.cap_rate_tolerance) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back(fmt::format("population cap hit in {:.2f}% of runs", 100 * runs.cap_rate()));
    } else if (informational) {
        rep.verdict = Verdict::inconclusive;
    } else {
        rep.verdict = worst <= rep.tolerance ? Verdict::pass : Verdict::fail;
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

nlohmann::json StrongMalthusOptions::to_json() const {
    return {{"times", times}, {"n", n}, {"cap", cap}, {"z", z}, {"final_tolerance", final_tolerance},
            {"cap_rate_tolerance", cap_rate_tolerance}};
}

CheckReport strong_malthus_check(const ModelSpec& model, const SpectralSolution& solution, double x0,
                                 const std::vector<TestFunction>& functions, const StrongMalthusOptions& options,
                                 const McContext& ctx) {
    const auto start = Clock::now();
    const auto& times = require_times(options.times, "strong_malthus_check");
    if (!solution.profile) throw DomainError("strong_malthus_check: the spectral solution has no profile");
    const HarmonicEstimate& h = solution.harmonic;
    const double lambda = solution.malthus.lambda;

    CheckReport rep;
    rep.name = "strong_malthus";
    nlohmann::json inputs = base_inputs(model, x0, ctx);
    inputs["options"] = options.to_json();
    inputs["functions"] = function_names(functions);
    inputs["lambda"] = lambda;
    rep.inputs_digest = digest(inputs);
    rep.statistic_label = "max over f of E|R_T| / E[W_T] at the last time";
    rep.tolerance = options.final_tolerance;
    const bool informational = !condition_holds(model, solution, rep);

    // only test functions dominated by h are covered by the convergence statement
    std::vector<TestFunction> used;
    std::vector<double> pairing;
    const auto probe = log_grid(h.grid().front() / 100.0, h.grid().back() * 100.0, 400);
    for (const auto& f : functions) {
        double ratio = 0.0;
        for (double x : probe) ratio = std::max(ratio, std::abs(f.f(x)) / h(x));
        if (ratio > 1.0 + 1e-12) {
            rep.notes.push_back(fmt::format("{} skipped: sup |f/h| = {:.4g} > 1", f.name, ratio));
            continue;
        }
        used.push_back(f);
        pairing.push_back(solution.profile->pairing(f.f));
    }
    const std::size_t nf = used.size();
    const std::size_t stride = 1 + nf;

    const auto runs = population_functionals(model, x0, times, options.n, options.cap, ctx,
                                             StreamTag::strong_malthus,
                                             [&](const std::vector<PopulationSnapshot>& snaps) {
                                                 std::vector<double> v;
                                                 for (const auto& s : snaps) {
                                                     const double disc = std::exp(-lambda * s.time);
                                                     const double w = disc * observe(s, h);
                                                     v.push_back(w);
                                                     for (std::size_t k = 0; k < nf; ++k) {
                                                         v.push_back(std::abs(disc * observe(s, used[k].f) - pairing[k] * w));
                                                     }
                                                 }
                                                 return v;
                                             });

    nlohmann::json items = nlohmann::json::array();
    double worst = 0.0;
    bool decreasing = true;
    for (std::size_t k = 0; k < nf; ++k) {
        nlohmann::json series = nlohmann::json::array();
        double previous = kNever, final_ratio = 0.0;
        bool dec = true;
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const MeanStderr w = runs.column(ti * stride);
            const MeanStderr r = runs.column(ti * stride + 1 + k);
            const double ratio = w.mean > 0.0 ? r.mean / w.mean : kNever;
            series.push_back({{"t", times[ti]}, {"mean_abs_r", r.mean}, {"stderr", r.se}, {"ratio", ratio}});
            if (!(r.mean < previous)) dec = false;
            previous = r.mean;
            final_ratio = ratio;
        }
        decreasing = decreasing && dec;
        worst = std::max(worst, final_ratio);
        items.push_back({{"f", used[k].name},
                         {"nu_pairing", pairing[k]},
                         {"series", series},
                         {"decreasing", dec},
                         {"final_ratio", final_ratio}});
    }
    rep.statistic = worst;
    rep.details["items"] = items;
    rep.details["decreasing"] = decreasing;
    rep.details["cap_rate"] = runs.cap_rate();
    if (nf == 0) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back("no admissible test function");
    } else if (runs.cap_rate() > options.cap_rate_tolerance) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back(fmt::format("population cap hit in {:.2f}% of runs", 100 * runs.cap_rate()));
    } else if (informational) {
        rep.verdict = Verdict::inconclusive;
    } else {
        rep.verdict = (worst <= rep.tolerance && decreasing) ? Verdict::pass : Verdict::fail;
        if (!decreasing) rep.notes.push_back("E|R_t| is not decreasing along the time grid");
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

nlohmann::json CriterionOptions::to_json() const {
    return {{"q_min", q_min}, {"q_max", q_max}, {"q_points", q_points}, {"x_min", x_min},
            {"x_max", x_max}, {"x_points", x_points}, {"min_decades", min_decades}};
}

CheckReport lambda_criterion_check(const ModelSpec& model, const CriterionOptions& options,
                                   const MalthusEstimate* lambda) {
    const auto start = Clock::now();
    const auto qs = log_grid(options.q_min, options.q_max, options.q_points);
    const auto xs = log_grid(options.x_min, options.x_max, options.x_points);
    const std::size_t m = xs.size();

    struct Side {
        bool found = false;
        double q = 0.0;
        double x = 0.0;
        double decades = 0.0;
    };
    Side inf_side, zero_side;
    for (double q : qs) {
        std::vector<double> g_inf(m), g_zero(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double x = xs[i];
            const double ratio = model.growth_ratio(x);
            const double b = model.fission()(x);
            const double up = b == 0.0 ? 0.0 : model.kernel().expect(x, [q](double r) { return std::pow(r, q) - 1.0; });
            const double down =
                b == 0.0 ? 0.0 : model.kernel().expect(x, [q](double r) { return std::pow(1.0 - r, -q) - 1.0; });
            g_inf[i] = q * ratio + b * up;
            g_zero[i] = -q * ratio + b * down;
        }
        if (!inf_side.found) {
            std::size_t j = m;
            while (j > 0 && g_inf[j - 1] <= 0.0) --j;
            if (j < m) {
                const double decades = std::log10(options.x_max / xs[j]);
                if (decades >= options.min_decades) inf_side = {true, q, xs[j], decades};
            }
        }
        if (!zero_side.found) {
            std::size_t j = 0;
            while (j < m && g_zero[j] <= 0.0) ++j;
            if (j > 0) {
                const double decades = std::log10(xs[j - 1] / options.x_min);
                if (decades >= options.min_decades) zero_side = {true, q, xs[j - 1], decades};
            }
        }
        if (inf_side.found && zero_side.found) break;
    }

    CheckReport rep;
    rep.name = "lambda_criterion";
    rep.inputs_digest = digest({{"model", model.name()}, {"parameters", model.parameters()}, {"options", options.to_json()}});
    rep.statistic_label = "number of certified sides (zero, infinity)";
    rep.statistic = static_cast<double>(inf_side.found) + static_cast<double>(zero_side.found);
    rep.tolerance = 2.0;
    auto side_json = [](const Side& s) {
        if (!s.found) return nlohmann::json{{"certified", false}};
        return nlohmann::json{{"certified", true}, {"q", s.q}, {"x", s.x}, {"decades", s.decades}};
    };
    rep.details = {{"zero_side", side_json(zero_side)}, {"infinity_side", side_json(inf_side)}};
    if (inf_side.found && zero_side.found) {
        rep.verdict = Verdict::pass;
        rep.notes.push_back("lambda > 0 certified (up to grid resolution)");
    } else {
        rep.verdict = Verdict::fail;
        if (!zero_side.found) rep.notes.push_back("zero side: no (q_0, x_0) found on the grid");
        if (!inf_side.found) rep.notes.push_back("infinity side: no (q_inf, x_inf) found on the grid");
    }
    if (lambda != nullptr) {
        const bool positive = lambda->ci_lower() > 0.0;
        rep.details["lambda"] = lambda->lambda;
        rep.details["lambda_positive"] = positive;
        if (rep.verdict == Verdict::pass && !positive) {
            rep.notes.push_back("inconsistent: criterion certifies lambda > 0 but the estimate's CI reaches 0");
        }
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

nlohmann::json TightnessOptions::to_json() const {
    return {{"times", times}, {"n", n}, {"cap", cap}, {"epsilon", epsilon}, {"z", z}, {"levels", levels},
            {"cap_rate_tolerance", cap_rate_tolerance}};
}

CheckReport tightness_probe(const ModelSpec& model, const SpectralSolution& solution, double x0,
                            const TightnessOptions& options, const McContext& ctx) {
    const auto start = Clock::now();
    const auto times = sorted_unique(options.times);
    require_times(times, "tightness_probe");
    if (!solution.profile) throw DomainError("tightness_probe: the spectral solution has no profile");
    const HarmonicEstimate& h = solution.harmonic;
    const ProfileEstimate& nu = *solution.profile;
    const double lambda = solution.malthus.lambda;

    // nested compacts: central quantile ranges of the probability nu(dy) h(y)
    const auto w = log_trapezoid_weights(nu.grid);
    std::vector<double> cdf(nu.grid.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < nu.grid.size(); ++i) {
        acc += nu.nu[i] * h(nu.grid[i]) * nu.grid[i] * w[i];
        cdf[i] = acc;
    }
    for (double& c : cdf) c /= acc;
    auto quantile = [&](double p) {
        if (p <= cdf.front()) return nu.grid.front();
        for (std::size_t i = 1; i < cdf.size(); ++i) {
            if (p <= cdf[i]) {
                const double u = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
                return std::exp(std::log(nu.grid[i - 1]) + u * std::log(nu.grid[i] / nu.grid[i - 1]));
            }
        }
        return nu.grid.back();
    };
    struct Compact {
        double level, lo, hi;
        bool contains(double x) const { return x >= lo && x <= hi; }
    };
    std::vector<Compact> compacts;
    for (double p : options.levels) compacts.push_back({p, quantile((1.0 - p) / 2.0), quantile((1.0 + p) / 2.0)});
    const std::size_t nk = compacts.size();

    const auto pop = population_functionals(model, x0, times, options.n, options.cap, ctx, StreamTag::tightness,
                                            [&](const std::vector<PopulationSnapshot>& snaps) {
                                                std::vector<double> v(snaps.size() * nk, 0.0);
                                                for (std::size_t ti = 0; ti < snaps.size(); ++ti) {
                                                    const double disc = std::exp(-lambda * snaps[ti].time);
                                                    for (const auto& a : snaps[ti].atoms) {
                                                        const double ha = disc * h(a.mass);
                                                        for (std::size_t k = 0; k < nk; ++k) {
                                                            if (!compacts[k].contains(a.mass)) v[ti * nk + k] += ha;
                                                        }
                                                    }
                                                }
                                                return v;
                                            });

    const SpineModel spine = build_spine_model(model, solution);
    const double h0 = h(x0);
    std::vector<std::vector<double>> sp(options.n);
    parallel_for(options.n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, StreamTag::tightness_spine, i);
        const auto masses = spine_at_times(spine, x0, times, rng);
        sp[i].assign(times.size() * nk, 0.0);
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            for (std::size_t k = 0; k < nk; ++k) {
                // an escaped spine is outside every compact
                const bool outside = std::isnan(masses[ti]) || !compacts[k].contains(masses[ti]);
                sp[i][ti * nk + k] = outside ? h0 : 0.0;
            }
        }
    });

    CheckReport rep;
    rep.name = "tightness";
    nlohmann::json inputs = base_inputs(model, x0, ctx);
    inputs["options"] = options.to_json();
    inputs["lambda"] = lambda;
    rep.inputs_digest = digest(inputs);
    rep.statistic_label = "max population-vs-spine |difference| / (z combined stderr)";
    rep.tolerance = 1.0;
    const bool informational = !condition_holds(model, solution, rep);

    nlohmann::json items = nlohmann::json::array();
    nlohmann::json smallest = nlohmann::json::array();
    double worst = 0.0;
    std::optional<double> uniform_level;
    std::vector<bool> level_ok(nk, true);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::optional<double> best;
        for (std::size_t k = 0; k < nk; ++k) {
            const MeanStderr p = pop.column(ti * nk + k);
            std::vector<double> col(options.n);
            for (std::size_t i = 0; i < options.n; ++i) col[i] = sp[i][ti * nk + k];
            const MeanStderr s = mean_stderr(col);
            const double d = discrepancy(p.mean, p.se, s.mean, s.se, options.z, 0.0);
            worst = std::max(worst, d);
            const double fraction = p.mean / h0;
            if (fraction <= options.epsilon && !best) best = compacts[k].level;
            if (fraction > options.epsilon) level_ok[k] = false;
            items.push_back({{"t", times[ti]},
                             {"level", compacts[k].level},
                             {"K", {compacts[k].lo, compacts[k].hi}},
                             {"population", p.mean},
                             {"population_stderr", p.se},
                             {"spine", s.mean},
                             {"spine_stderr", s.se},
                             {"outside_fraction", fraction},
                             {"discrepancy", d}});
        }
        smallest.push_back({{"t", times[ti]}, {"level", best ? nlohmann::json(*best) : nlohmann::json(nullptr)}});
    }
    for (std::size_t k = 0; k < nk; ++k) {
        if (level_ok[k]) {
            uniform_level = compacts[k].level;
            rep.details["K"] = {compacts[k].lo, compacts[k].hi};
            break;
        }
    }
    rep.statistic = worst;
    rep.details["items"] = items;
    rep.details["smallest_level_per_time"] = smallest;
    rep.details["uniform_level"] = uniform_level ? nlohmann::json(*uniform_level) : nlohmann::json(nullptr);
    rep.details["cap_rate"] = pop.cap_rate();
    if (pop.cap_rate() > options.cap_rate_tolerance) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back(fmt::format("population cap hit in {:.2f}% of runs", 100 * pop.cap_rate()));
    } else if (informational) {
        rep.verdict = Verdict::inconclusive;
    } else {
        rep.verdict = (worst <= rep.tolerance && uniform_level) ? Verdict::pass : Verdict::fail;
        if (!uniform_level) rep.notes.push_back("no compact reaches the epsilon level at every time");
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

}  // namespace gfrag
