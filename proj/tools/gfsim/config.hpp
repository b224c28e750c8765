#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfrag/branching.hpp"
#include "gfrag/diagnostics.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"

namespace gfsim {

enum class Task { simulate, spectral, spine, check };

/// Check suites runnable through `check <suite>`.
inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"many-to-one", "stopping-line", "martingale", "strong-malthus",
                                                   "criterion",   "tightness",     "condition",  "all"};
    return names;
}

std::optional<Task> parse_task(const std::string& name);
std::string to_string(Task task);

/// Every key of the config tree with its default. `seed` has none.
nlohmann::json default_config();

/// Applies a key=value override. Dotted keys address the tree; keys whose
/// first segment is not a top-level section go to `model`. Values are read
/// as JSON when they parse, otherwise as strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

struct SimulateSettings {
    double horizon;
    std::size_t cap;
    std::vector<double> snapshots;  // default: five equally spaced times up to the horizon
    std::size_t replicates;
};

struct CheckSettings {
    std::string suite;
    std::optional<std::size_t> n;
    std::optional<std::vector<double>> times;
    std::size_t cap;
    double z;
    double horizon;
    gfrag::StoppingLine line;
    double epsilon;
};

/// Validated experiment description.
struct ExperimentConfig {
    nlohmann::json resolved;  // defaults merged with the user's tree
    Task task;
    gfrag::ModelSpec model;
    std::uint64_t seed;
    unsigned workers;
    std::string output;
    double x0;
    SimulateSettings simulate;
    gfrag::SpectralOptions spectral;
    gfrag::SpineRunOptions spine;
    CheckSettings check;

    gfrag::McContext context() const { return {seed, workers}; }
};

/// Merges `user` over the defaults and validates everything. Errors are
/// ConfigError with the offending key path.
ExperimentConfig load_config(const nlohmann::json& user);

}  // namespace gfsim
