#include "gfsim/app.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gfrag/branching.hpp"
#include "gfrag/diagnostics.hpp"
#include "gfrag/errors.hpp"
#include "gfrag/families.hpp"
#include "gfrag/io.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/report.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"

#ifndef GFRAG_VERSION
#define GFRAG_VERSION "unknown"
#endif

namespace gfsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

/// Progress lines go to the caller's stream and to log.txt in the run directory.
class RunLog {
public:
    explicit RunLog(std::ostream& sink) : sink_(sink) {}

    template <class... Args>
    void info(fmt::format_string<Args...> format, Args&&... args) {
        const std::string line = fmt::format(format, std::forward<Args>(args)...);
        sink_ << line << '\n';
        text_ += line + '\n';
    }
    const std::string& text() const { return text_; }

private:
    std::ostream& sink_;
    std::string text_;
};

/// Output directory bookkeeping: artifact names and per-stage runtimes.
class RunDir {
public:
    explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    void csv(const std::string& name, const std::function<void(std::ostream&)>& writer) {
        auto out = gfrag::open_output(root_ / name);
        writer(out);
        if (!out) throw gfrag::IoError("failed writing " + (root_ / name).string());
        artifacts_.push_back(name);
    }
    void json_file(const std::string& name, const json& document) {
        gfrag::write_json_file(root_ / name, document);
        artifacts_.push_back(name);
    }
    void text(const std::string& name, const std::string& body) {
        auto out = gfrag::open_output(root_ / name);
        out << body;
        artifacts_.push_back(name);
    }

    template <class F>
    auto timed(const std::string& stage, F&& f) {
        const auto start = Clock::now();
        auto result = f();
        runtimes_[stage] = std::chrono::duration<double>(Clock::now() - start).count();
        return result;
    }

    const fs::path& root() const { return root_; }
    const std::vector<std::string>& artifacts() const { return artifacts_; }
    const json& runtimes() const { return runtimes_; }

private:
    fs::path root_;
    std::vector<std::string> artifacts_;
    json runtimes_ = json::object();
};

json versions() {
    return {{"gfrag", GFRAG_VERSION},
            {"compiler", __VERSION__},
            {"fmt", FMT_VERSION},
            {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                          NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION}};
}

/// Hash of everything that determines the artifacts: the resolved config
/// without the output directory and the worker count.
std::string config_hash(const json& resolved) {
    json keyed = resolved;
    keyed.erase("output");
    keyed.erase("workers");
    return gfrag::digest(keyed);
}

void write_spectral(RunDir& dir, const gfrag::SpectralSolution& s, const std::string& hash) {
    json doc = s.to_json();
    doc["config_hash"] = hash;
    dir.json_file("spectral.json", doc);
    dir.csv("harmonic.csv", [&](std::ostream& o) { gfrag::write_harmonic_csv(o, s.harmonic); });
    if (s.profile) dir.csv("profile.csv", [&](std::ostream& o) { gfrag::write_profile_csv(o, *s.profile); });
}

int task_simulate(const ExperimentConfig& cfg, RunDir& dir, RunLog& log, json& summary) {
    gfrag::SimulationOptions sim;
    sim.horizon = cfg.simulate.horizon;
    sim.cap = cfg.simulate.cap;
    sim.snapshot_times = cfg.simulate.snapshots;
    json runs = json::array();
    for (std::size_t i = 0; i < cfg.simulate.replicates; ++i) {
        gfrag::RandomStream rng(cfg.seed, gfrag::StreamTag::population, i);
        const std::string suffix = cfg.simulate.replicates == 1 ? "" : fmt::format("_{}", i);
        gfrag::PopulationRun run;
        bool capped = false;
        try {
            run = gfrag::simulate_population(cfg.model, cfg.x0, sim, rng);
        } catch (const gfrag::ExplosionError& e) {
            run = e.partial();
            capped = true;
            log.info("replicate {}: population cap {} reached at t = {:.6g}", i, sim.cap, e.time());
        }
        dir.csv("events" + suffix + ".csv", [&](std::ostream& o) { gfrag::write_event_log(o, run.events); });
        dir.csv("snapshots" + suffix + ".csv", [&](std::ostream& o) { gfrag::write_snapshots_csv(o, run.snapshots); });
        json snaps = json::array();
        for (const auto& s : run.snapshots) {
            snaps.push_back({{"time", s.time}, {"size", s.size()}, {"total_mass", s.total_mass()}});
        }
        runs.push_back({{"replicate", i},
                        {"fissions", run.fissions},
                        {"peak_population", run.peak_population},
                        {"capped", capped},
                        {"snapshots", snaps}});
        log.info("replicate {}: {} fissions, peak population {}", i, run.fissions, run.peak_population);
    }
    summary["runs"] = runs;
    return kOk;
}

int task_spectral(const ExperimentConfig& cfg, RunDir& dir, RunLog& log, json& summary, const std::string& hash) {
    const auto s = dir.timed("spectral", [&] { return gfrag::solve_spectral(cfg.model, cfg.spectral, cfg.context()); });
    log.info("lambda = {:.6f} (stderr {:.2e}, bracket [{:.6f}, {:.6f}], n {}, horizon {})", s.malthus.lambda,
             s.malthus.se, s.malthus.bracket_lo, s.malthus.bracket_hi, s.malthus.n, s.malthus.horizon);
    if (s.malthus.budget_exhausted) log.info("warning: the bisection budget was exhausted");
    write_spectral(dir, s, hash);
    summary["lambda"] = s.malthus.lambda;
    summary["lambda_stderr"] = s.malthus.se;
    summary["budget_exhausted"] = s.malthus.budget_exhausted;
    return kOk;
}

int task_spine(const ExperimentConfig& cfg, RunDir& dir, RunLog& log, json& summary, const std::string& hash) {
    auto options = cfg.spectral;
    const auto s = dir.timed("spectral", [&] { return gfrag::solve_spectral(cfg.model, options, cfg.context()); });
    log.info("lambda = {:.6f} (stderr {:.2e})", s.malthus.lambda, s.malthus.se);
    write_spectral(dir, s, hash);
    const gfrag::SpineModel spine = gfrag::build_spine_model(cfg.model, s);
    const auto grid = cfg.spectral.nu_grid.masses();
    const auto sp = dir.timed("spine", [&] {
        return gfrag::estimate_nu_spine(spine, cfg.x0, grid, cfg.spine, cfg.context());
    });
    dir.json_file("spine.json", {{"spine_model", spine.to_json()},
                                 {"options", cfg.spine.to_json()},
                                 {"run", sp.run.summary()},
                                 {"profile", sp.profile.to_json()}});
    dir.csv("occupation.csv", [&](std::ostream& o) { gfrag::write_occupation_csv(o, sp.run.occupation); });
    dir.csv("spine_profile.csv", [&](std::ostream& o) { gfrag::write_profile_csv(o, sp.profile); });
    log.info("spine: {} replicates, {} escapes, half-run L1 {:.4f}{}", sp.run.replicates, sp.run.escapes,
             sp.run.half_run_l1, sp.run.mixing_warning ? " (mixing warning)" : "");
    summary["spine"] = sp.run.summary();
    if (s.profile) {
        const auto w = gfrag::log_trapezoid_weights(grid);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            num += std::abs(s.profile->nu[i] - sp.profile.nu[i]) * grid[i] * w[i];
            den += s.profile->nu[i] * grid[i] * w[i];
        }
        summary["profile_relative_l1"] = den > 0.0 ? num / den : 0.0;
        log.info("relative L1 between the two profile estimates: {:.4f}", num / den);
    }
    return kOk;
}

struct CheckContext {
    const ExperimentConfig& cfg;
    RunDir& dir;
    RunLog& log;
    const std::string& hash;
    std::optional<gfrag::SpectralSolution> solution;

    const gfrag::SpectralSolution& spectral() {
        if (!solution) {
            auto options = cfg.spectral;
            options.profile = true;
            solution = dir.timed("spectral", [&] { return gfrag::solve_spectral(cfg.model, options, cfg.context()); });
            log.info("lambda = {:.6f} (stderr {:.2e})", solution->malthus.lambda, solution->malthus.se);
            write_spectral(dir, *solution, hash);
        }
        return *solution;
    }
};

template <class Options>
void apply_check_settings(const CheckSettings& c, Options& o) {
    if (c.n) o.n = *c.n;
    if (c.times) o.times = *c.times;
    o.cap = c.cap;
    o.z = c.z;
}

gfrag::CheckReport run_suite(const std::string& suite, CheckContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& c = cfg.check;
    const auto mc = cfg.context();
    const auto functions = gfrag::standard_test_functions();
    if (suite == "many-to-one") {
        gfrag::ManyToOneOptions o;
        apply_check_settings(c, o);
        return gfrag::many_to_one_check(cfg.model, cfg.x0, functions, o, mc);
    }
    if (suite == "stopping-line") {
        gfrag::StoppingLineOptions o;
        if (c.n) o.n = *c.n;
        o.cap = c.cap;
        o.z = c.z;
        o.horizon = c.horizon;
        return gfrag::stopping_line_check(cfg.model, cfg.x0, c.line, functions, o, mc);
    }
    if (suite == "criterion") {
        const gfrag::MalthusEstimate* lambda = ctx.solution ? &ctx.solution->malthus : nullptr;
        return gfrag::lambda_criterion_check(cfg.model, {}, lambda);
    }
    if (suite == "condition") return gfrag::check_condition_main(cfg.model, ctx.spectral().malthus);
    if (suite == "martingale") {
        gfrag::MartingaleOptions o;
        apply_check_settings(c, o);
        return gfrag::martingale_check(cfg.model, ctx.spectral(), cfg.x0, o, mc);
    }
    if (suite == "strong-malthus") {
        gfrag::StrongMalthusOptions o;
        apply_check_settings(c, o);
        return gfrag::strong_malthus_check(cfg.model, ctx.spectral(), cfg.x0, functions, o, mc);
    }
    if (suite == "tightness") {
        gfrag::TightnessOptions o;
        apply_check_settings(c, o);
        o.epsilon = c.epsilon;
        return gfrag::tightness_probe(cfg.model, ctx.spectral(), cfg.x0, o, mc);
    }
    throw gfrag::ConfigError("suite", "unknown suite " + suite);
}

int task_check(const ExperimentConfig& cfg, RunDir& dir, RunLog& log, json& summary, const std::string& hash) {
    std::vector<std::string> suites;
    if (cfg.check.suite == "all") {
        suites = {"many-to-one", "stopping-line", "condition", "criterion", "martingale", "strong-malthus", "tightness"};
    } else {
        suites = {cfg.check.suite};
    }
    CheckContext ctx{cfg, dir, log, hash, std::nullopt};
    json reports = json::array();
    std::string text;
    gfrag::Verdict overall = gfrag::Verdict::pass;
    for (const auto& suite : suites) {
        const auto report = dir.timed("check:" + suite, [&] { return run_suite(suite, ctx); });
        overall = gfrag::combine(overall, report.verdict);
        reports.push_back(report.to_json());
        text += report.text() + "\n";
        log.info("{}", report.text());
    }
    dir.json_file("report.json", reports);
    dir.text("report.txt", text);
    summary["verdict"] = gfrag::to_string(overall);
    switch (overall) {
        case gfrag::Verdict::pass: return kOk;
        case gfrag::Verdict::fail: return kCheckFailed;
        case gfrag::Verdict::inconclusive: return kInconclusive;
    }
    return kOk;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& sink) {
    RunLog log(sink);
    RunDir dir(cfg.output);
    const std::string hash = config_hash(cfg.resolved);
    const auto start = Clock::now();
    log.info("gfsim {} task={} model={} seed={} workers={} -> {}", GFRAG_VERSION, to_string(cfg.task),
             cfg.model.name(), cfg.seed, cfg.workers, cfg.output);
    json summary = json::object();
    int code = kOk;
    switch (cfg.task) {
        case Task::simulate: code = task_simulate(cfg, dir, log, summary); break;
        case Task::spectral: code = task_spectral(cfg, dir, log, summary, hash); break;
        case Task::spine: code = task_spine(cfg, dir, log, summary, hash); break;
        case Task::check: code = task_check(cfg, dir, log, summary, hash); break;
    }
    dir.json_file("summary.json", summary);
    const double total = std::chrono::duration<double>(Clock::now() - start).count();
    log.info("done in {:.2f} s, exit code {}", total, code);
    dir.text("log.txt", log.text());
    json runtimes = dir.runtimes();
    runtimes["total"] = total;
    json artifacts = dir.artifacts();
    artifacts.push_back("manifest.json");
    gfrag::write_json_file(dir.root() / "manifest.json", {{"tool", "gfsim"},
                                                           {"config", cfg.resolved},
                                                           {"config_hash", hash},
                                                           {"seed", cfg.seed},
                                                           {"versions", versions()},
                                                           {"runtimes", runtimes},
                                                           {"artifacts", artifacts},
                                                           {"exit_code", code}});
    return code;
}

namespace {

struct CommonFlags {
    std::string config;
    std::string manifest;
    std::string model;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out;
    std::vector<std::string> positional;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment config (JSON)");
    cmd->add_option("--manifest", f.manifest, "re-run the config recorded in a manifest.json");
    cmd->add_option("--model", f.model, "model family (linear | saturating | hump)");
    cmd->add_option("--seed", f.seed, "master seed (required unless given by the config)");
    cmd->add_option("--workers", f.workers, "worker threads");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("args", f.positional, "task, suite and key=value overrides");
}

/// Builds the config tree from files, flags and overrides. Positional words
/// without '=' are consumed by `words` (task / suite names).
json assemble(const CommonFlags& f, const std::function<void(json&, const std::string&)>& words) {
    json cfg = json::object();
    if (!f.config.empty() && !f.manifest.empty()) throw gfrag::ConfigError("--manifest", "use either --config or --manifest");
    if (!f.config.empty()) cfg = gfrag::read_json_file(f.config);
    if (!f.manifest.empty()) {
        const json m = gfrag::read_json_file(f.manifest);
        if (!m.contains("config")) throw gfrag::ConfigError(f.manifest, "not a manifest (no `config` entry)");
        cfg = m.at("config");
    }
    if (!cfg.is_object()) throw gfrag::ConfigError(f.config, "top level must be an object");
    if (!f.model.empty()) {
        const bool same = cfg.contains("model") && cfg["model"].is_object() && cfg["model"].value("family", "") == f.model;
        if (!same) cfg["model"] = {{"family", f.model}};
    }
    if (f.seed) cfg["seed"] = *f.seed;
    if (f.workers) cfg["workers"] = *f.workers;
    if (!f.out.empty()) cfg["output"] = f.out;
    for (const auto& arg : f.positional) {
        if (arg.find('=') == std::string::npos) {
            words(cfg, arg);
        } else {
            apply_override(cfg, arg);
        }
    }
    return cfg;
}

int list_models(std::ostream& out, bool as_json) {
    if (as_json) {
        json all = json::array();
        for (const auto& f : gfrag::model_registry()) {
            json params = json::array();
            for (const auto& p : f.parameters) params.push_back({{"key", p.key}, {"meaning", p.meaning}, {"default", p.default_value}});
            all.push_back({{"name", f.name},
                           {"growth", f.growth},
                           {"summary", f.summary},
                           {"condition_note", f.condition_note},
                           {"parameters", params}});
        }
        out << all.dump(2) << '\n';
        return kOk;
    }
    for (const auto& f : gfrag::model_registry()) {
        out << f.name << ": " << f.growth << '\n';
        out << "  " << f.summary << '\n';
        out << "  condition: " << f.condition_note << '\n';
        for (const auto& p : f.parameters) {
            out << fmt::format("    {:<8} {} (default {})\n", p.key, p.meaning, p.default_value.dump());
        }
    }
    return kOk;
}

int dump_path(const CommonFlags& f, double horizon, double x0, std::ostream& out) {
    json cfg = assemble(f, [](json&, const std::string& word) {
        throw gfrag::ConfigError(word, "dump-path takes only key=value overrides");
    });
    if (!cfg.contains("seed") || cfg["seed"].is_null()) throw gfrag::ConfigError("seed", "a seed is required (no unseeded runs)");
    cfg["x0"] = x0;
    const ExperimentConfig parsed = load_config(cfg);
    if (!(horizon > 0.0)) throw gfrag::ConfigError("--horizon", "must be positive");
    gfrag::RandomStream rng(parsed.seed, gfrag::StreamTag::dump, 0);
    const auto path = gfrag::record_path(parsed.model, parsed.x0, horizon, rng);
    RunDir dir(parsed.output);
    dir.csv("path.csv", [&](std::ostream& o) { gfrag::write_path_csv(o, path); });
    out << fmt::format("wrote {} points to {}\n", path.size(), (dir.root() / "path.csv").string());
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"gfsim: growth-fragmentation simulation and estimation"};
    app.require_subcommand(1);
    CommonFlags run_flags, check_flags, dump_flags;
    bool as_json = false;
    double dump_horizon = 10.0, dump_x0 = 1.0;

    auto* run = app.add_subcommand("run", "run a task: simulate | spectral | spine | check <suite>");
    add_common(run, run_flags);
    auto* check = app.add_subcommand("check", "run a check suite (shortcut for `run check <suite>`)");
    add_common(check, check_flags);
    auto* list = app.add_subcommand("list-models", "list the built-in model families");
    list->add_flag("--json", as_json, "machine-readable listing");
    auto* dump = app.add_subcommand("dump-path", "write one tagged-cell path as CSV (debugging aid)");
    add_common(dump, dump_flags);
    dump->add_option("--horizon", dump_horizon, "path length in time");
    dump->add_option("--x0", dump_x0, "initial mass");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream cli_out, cli_err;
        app.exit(e, cli_out, cli_err);
        out << cli_out.str();
        err << cli_err.str();
        return e.get_exit_code() == 0 ? kOk : kConfigError;
    }

    try {
        if (*list) return list_models(out, as_json);
        if (*dump) return dump_path(dump_flags, dump_horizon, dump_x0, out);

        json cfg;
        if (*run) {
            bool have_task = false;
            cfg = assemble(run_flags, [&](json& c, const std::string& word) {
                if (!have_task) {
                    if (!parse_task(word)) throw gfrag::ConfigError(word, "unknown task (simulate | spectral | spine | check)");
                    c["task"] = word;
                    have_task = true;
                } else if (c.value("task", "") == "check" && !c.contains("suite_set")) {
                    c["suite"] = word;
                    c["suite_set"] = true;
                } else {
                    throw gfrag::ConfigError(word, "unexpected argument (overrides look like key=value)");
                }
            });
            cfg.erase("suite_set");
        } else {
            bool have_suite = false;
            cfg = assemble(check_flags, [&](json& c, const std::string& word) {
                if (have_suite) throw gfrag::ConfigError(word, "unexpected argument (overrides look like key=value)");
                c["suite"] = word;
                have_suite = true;
            });
            cfg["task"] = "check";
        }
        const ExperimentConfig parsed = load_config(cfg);
        return run_experiment(parsed, out);
    } catch (const gfrag::ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const gfrag::IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kTaskError;
    } catch (const gfrag::Error& e) {
        err << "error: " << e.what() << '\n';
        return kTaskError;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << '\n';
        return kTaskError;
    }
}

}  // namespace gfsim
