#include "gfsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gfrag/errors.hpp"
#include "gfrag/families.hpp"

namespace gfsim {

using gfrag::ConfigError;
using nlohmann::json;

namespace {

const std::vector<std::string> kSections = {"task", "suite", "model", "seed", "workers", "output",
                                            "x0",   "simulate", "spectral", "spine", "check"};

json grid_json(const gfrag::GridSpec& g) { return {{"min", g.min}, {"max", g.max}, {"points", g.points}}; }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Recursively merges `user` into `base`, rejecting keys unknown to `base`.
/// Sections listed in `free_form` accept any keys (validated later).
void merge_known(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, value] : user.items()) {
        const std::string where = join(path, key);
        if (where == "model") {
            base[key] = value;
            continue;
        }
        if (!base.contains(key)) throw ConfigError(where, "unknown key");
        if (base[key].is_object() && where != "check.line") {
            merge_known(base[key], value, where);
        } else {
            base[key] = value;
        }
    }
}

const json& at(const json& tree, const std::string& path) {
    const json* node = &tree;
    std::size_t start = 0;
    while (start <= path.size()) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(key)) throw ConfigError(path, "missing");
        node = &node->at(key);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return *node;
}

double positive(const json& tree, const std::string& path) {
    const json& v = at(tree, path);
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double x = v.get<double>();
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path, "must be a positive finite number");
    return x;
}

std::size_t count(const json& tree, const std::string& path) {
    const json& v = at(tree, path);
    if (v.is_number_integer() && v.get<long long>() > 0) return v.get<std::size_t>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x >= 1.0 && x == std::floor(x) && x < 1e15) return static_cast<std::size_t>(x);
    }
    throw ConfigError(path, "expected a positive integer");
}

std::optional<std::size_t> optional_count(const json& tree, const std::string& path) {
    if (at(tree, path).is_null()) return std::nullopt;
    return count(tree, path);
}

std::vector<double> times_at(const json& tree, const std::string& path) {
    const json& v = at(tree, path);
    if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of times");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !(v[i].get<double>() > 0.0)) {
            throw ConfigError(fmt::format("{}[{}]", path, i), "expected a positive number");
        }
        out.push_back(v[i].get<double>());
    }
    if (!std::is_sorted(out.begin(), out.end())) throw ConfigError(path, "times must be sorted");
    return out;
}

gfrag::GridSpec grid_at(const json& tree, const std::string& path) {
    gfrag::GridSpec g{positive(tree, path + ".min"), positive(tree, path + ".max"), count(tree, path + ".points")};
    if (!(g.max > g.min)) throw ConfigError(path, "max must exceed min");
    return g;
}

bool flag(const json& tree, const std::string& path) {
    const json& v = at(tree, path);
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
}

gfrag::StoppingLine line_at(const json& tree, const std::string& path) {
    const json& v = at(tree, path);
    if (!v.is_object() || !v.contains("kind") || !v["kind"].is_string()) {
        throw ConfigError(path, "expected {\"kind\": \"jump_count\" | \"first_entrance\" | \"fixed_time\", ...}");
    }
    const std::string kind = v["kind"].get<std::string>();
    auto allow = [&](std::initializer_list<const char*> keys) {
        for (const auto& [key, value] : v.items()) {
            if (key == "kind") continue;
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
                throw ConfigError(join(path, key), fmt::format("unknown key for a {} line", kind));
            }
        }
    };
    if (kind == "jump_count") {
        allow({"k"});
        return gfrag::StoppingLine::jump_count(v.contains("k") ? count(tree, join(path, "k")) : 1);
    }
    if (kind == "first_entrance") {
        allow({"lo", "hi"});
        const double lo = positive(tree, join(path, "lo"));
        const double hi = v.contains("hi") && !v["hi"].is_null() ? positive(tree, join(path, "hi")) : gfrag::kNever;
        if (!(hi > lo)) throw ConfigError(join(path, "hi"), "must exceed lo");
        return gfrag::StoppingLine::first_entrance(lo, hi);
    }
    if (kind == "fixed_time") {
        allow({"t"});
        return gfrag::StoppingLine::fixed_time(positive(tree, join(path, "t")));
    }
    throw ConfigError(join(path, "kind"), fmt::format("unknown stopping line kind `{}`", kind));
}

}  // namespace

std::optional<Task> parse_task(const std::string& name) {
    if (name == "simulate") return Task::simulate;
    if (name == "spectral") return Task::spectral;
    if (name == "spine") return Task::spine;
    if (name == "check") return Task::check;
    return std::nullopt;
}

std::string to_string(Task task) {
    switch (task) {
        case Task::simulate: return "simulate";
        case Task::spectral: return "spectral";
        case Task::spine: return "spine";
        case Task::check: return "check";
    }
    return "?";
}

json default_config() {
    const gfrag::SpectralOptions so;
    const gfrag::SpineRunOptions sp;
    return {
        {"task", "spectral"},
        {"suite", "all"},
        {"model", {{"family", "linear"}}},
        {"seed", nullptr},
        {"workers", 1},
        {"output", "gfsim-out"},
        {"x0", 1.0},
        {"simulate", {{"horizon", 5.0}, {"cap", 1'000'000}, {"snapshots", nullptr}, {"replicates", 1}}},
        {"spectral",
         {{"tolerance", so.malthus.tolerance},
          {"n", so.malthus.n},
          {"n_max", so.malthus.n_max},
          {"horizon", so.malthus.horizon},
          {"horizon_max", so.malthus.horizon_max},
          {"truncation_tolerance", so.malthus.truncation_tolerance},
          {"z", so.malthus.z},
          {"h_grid", grid_json(so.h_grid)},
          {"n_h", so.n_h},
          {"nu_grid", grid_json(so.nu_grid)},
          {"n_nu", so.n_nu},
          {"dq", so.dq},
          {"profile", so.profile}}},
        {"spine",
         {{"horizon", sp.horizon},
          {"replicates", sp.replicates},
          {"burn_in_fraction", sp.burn_in_fraction},
          {"mixing_tolerance", sp.mixing_tolerance}}},
        {"check",
         {{"n", nullptr},
          {"times", nullptr},
          {"cap", 1'000'000},
          {"z", 3.0},
          {"horizon", 50.0},
          {"epsilon", 0.05},
          {"line", {{"kind", "jump_count"}, {"k", 1}}}}},
    };
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    const std::string head = key.substr(0, key.find('.'));
    if (std::find(kSections.begin(), kSections.end(), head) == kSections.end()) key = "model." + key;
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty key segment");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

ExperimentConfig load_config(const json& user) {
    json cfg = default_config();
    merge_known(cfg, user, "");

    const json& task_node = at(cfg, "task");
    if (!task_node.is_string() || !parse_task(task_node.get<std::string>())) {
        throw ConfigError("task", "expected simulate | spectral | spine | check");
    }
    const Task task = *parse_task(task_node.get<std::string>());

    const json& seed_node = at(cfg, "seed");
    if (seed_node.is_null()) throw ConfigError("seed", "a seed is required (no unseeded runs)");
    if (!seed_node.is_number_unsigned() && !(seed_node.is_number_integer() && seed_node.get<long long>() >= 0)) {
        throw ConfigError("seed", "expected a non-negative integer");
    }
    const json& workers_node = at(cfg, "workers");
    if (!workers_node.is_number_integer() || workers_node.get<long long>() < 1 || workers_node.get<long long>() > 1024) {
        throw ConfigError("workers", "expected an integer in [1, 1024]");
    }
    const json& out_node = at(cfg, "output");
    if (!out_node.is_string() || out_node.get<std::string>().empty()) {
        throw ConfigError("output", "expected a directory path");
    }
    const json& suite_node = at(cfg, "suite");
    const auto& suites = suite_names();
    if (!suite_node.is_string() ||
        std::find(suites.begin(), suites.end(), suite_node.get<std::string>()) == suites.end()) {
        throw ConfigError("suite", fmt::format("expected one of: {}", fmt::join(suites, ", ")));
    }

    gfrag::SpectralOptions so;
    so.x0 = positive(cfg, "x0");
    so.malthus.tolerance = positive(cfg, "spectral.tolerance");
    so.malthus.n = count(cfg, "spectral.n");
    so.malthus.n_max = std::max(so.malthus.n, count(cfg, "spectral.n_max"));
    so.malthus.horizon = positive(cfg, "spectral.horizon");
    so.malthus.horizon_max = std::max(so.malthus.horizon, positive(cfg, "spectral.horizon_max"));
    so.malthus.truncation_tolerance = positive(cfg, "spectral.truncation_tolerance");
    so.malthus.z = positive(cfg, "spectral.z");
    so.h_grid = grid_at(cfg, "spectral.h_grid");
    so.n_h = count(cfg, "spectral.n_h");
    so.nu_grid = grid_at(cfg, "spectral.nu_grid");
    so.n_nu = count(cfg, "spectral.n_nu");
    const json& dq = at(cfg, "spectral.dq");
    if (!dq.is_number() || dq.get<double>() < 0.0) throw ConfigError("spectral.dq", "expected a number >= 0 (0 = automatic)");
    so.dq = dq.get<double>();
    so.profile = flag(cfg, "spectral.profile");

    gfrag::SpineRunOptions sp;
    sp.horizon = positive(cfg, "spine.horizon");
    sp.replicates = count(cfg, "spine.replicates");
    sp.burn_in_fraction = at(cfg, "spine.burn_in_fraction").get<double>();
    if (!(sp.burn_in_fraction >= 0.0 && sp.burn_in_fraction < 1.0)) {
        throw ConfigError("spine.burn_in_fraction", "must lie in [0, 1)");
    }
    sp.mixing_tolerance = positive(cfg, "spine.mixing_tolerance");

    SimulateSettings sim{positive(cfg, "simulate.horizon"), count(cfg, "simulate.cap"), {},
                         count(cfg, "simulate.replicates")};
    if (at(cfg, "simulate.snapshots").is_null()) {
        for (int k = 1; k <= 5; ++k) sim.snapshots.push_back(sim.horizon * k / 5.0);
    } else {
        sim.snapshots = times_at(cfg, "simulate.snapshots");
        if (sim.snapshots.back() > sim.horizon) throw ConfigError("simulate.snapshots", "times must not exceed simulate.horizon");
    }

    CheckSettings check{suite_node.get<std::string>(),
                        optional_count(cfg, "check.n"),
                        at(cfg, "check.times").is_null() ? std::nullopt
                                                         : std::optional(times_at(cfg, "check.times")),
                        count(cfg, "check.cap"),
                        positive(cfg, "check.z"),
                        positive(cfg, "check.horizon"),
                        line_at(cfg, "check.line"),
                        positive(cfg, "check.epsilon")};

    return ExperimentConfig{cfg,
                            task,
                            gfrag::make_model(at(cfg, "model")),
                            seed_node.get<std::uint64_t>(),
                            workers_node.get<unsigned>(),
                            out_node.get<std::string>(),
                            so.x0,
                            std::move(sim),
                            so,
                            sp,
                            std::move(check)};
}

}  // namespace gfsim
