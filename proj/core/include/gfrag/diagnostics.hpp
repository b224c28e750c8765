#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gfrag/branching.hpp"
#include "gfrag/model.hpp"
#include "gfrag/report.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"

namespace gfrag {

struct TestFunction {
    std::string name;
    ScalarFn f;
};

/// Smooth bump supported on [lo, hi], symmetric in log x, with maximum `height`.
ScalarFn bump(double lo, double hi, double height = 1.0);

/// 1, Id, x^2 and a bump on [0.5, 2].
std::vector<TestFunction> standard_test_functions();

/// Per-run functionals of population snapshots, replicate-parallel. Runs
/// that hit the population cap are flagged and must not be aggregated.
struct PopulationFunctionals {
    std::vector<std::vector<double>> values;  // [run][functional]
    std::vector<bool> capped;
    std::size_t capped_count = 0;

    double cap_rate() const {
        return values.empty() ? 0.0 : static_cast<double>(capped_count) / static_cast<double>(values.size());
    }
    /// mean and stderr of functional k over uncapped runs
    MeanStderr column(std::size_t k) const;
};

using SnapshotFunctional = std::function<std::vector<double>(const std::vector<PopulationSnapshot>&)>;

PopulationFunctionals population_functionals(const ModelSpec& model, double x0, const std::vector<double>& times,
                                             std::size_t n, std::size_t cap, const McContext& ctx, StreamTag tag,
                                             const SnapshotFunctional& functional);

struct ManyToOneOptions {
    std::vector<double> times{0.5, 1.0, 2.0};
    std::size_t n = 100'000;
    std::size_t cap = 1'000'000;
    double z = 3.0;
    /// relative slack added to z * stderr; makes deterministic cases checkable
    double relative_floor = 1e-8;
    double cap_rate_tolerance = 0.01;

    nlohmann::json to_json() const;
};

/// E[<Z_t, f>] from population census against x0 E[f(X_t)/X_t E_t] from the
/// weighted tagged cell, each side on its own streams.
CheckReport many_to_one_check(const ModelSpec& model, double x0, const std::vector<TestFunction>& functions,
                              const ManyToOneOptions& options, const McContext& ctx);

struct StoppingLineOptions {
    std::size_t n = 100'000;
    double horizon = 50.0;
    std::size_t cap = 1'000'000;
    double z = 3.0;
    double relative_floor = 1e-8;
    double cap_rate_tolerance = 0.01;
    /// optional exact values of E[<Z_T, f>], one per test function
    std::vector<std::optional<double>> reference;

    nlohmann::json to_json() const;
};

/// Frozen population E[<Z_T, f>] against x0 E[f(X_T)/X_T E_T; T < inf] from
/// the tagged cell stopped on its own path. Both sides ignore lines that do
/// not trigger before the horizon, so truncation affects them identically.
CheckReport stopping_line_check(const ModelSpec& model, double x0, const StoppingLine& line,
                                const std::vector<TestFunction>& functions, const StoppingLineOptions& options,
                                const McContext& ctx);

struct MartingaleOptions {
    std::vector<double> times{1.0, 2.0, 4.0, 8.0};
    std::size_t n = 10'000;
    std::size_t cap = 1'000'000;
    double z = 3.0;
    double plateau_tolerance = 0.10;
    double cap_rate_tolerance = 0.01;

    nlohmann::json to_json() const;
};

/// W_t = e^{-lambda t} <Z_t, h>: constant mean h(x0) across the time grid
/// and a second-moment plateau between the two largest times.
CheckReport martingale_check(const ModelSpec& model, const SpectralSolution& solution, double x0,
                             const MartingaleOptions& options, const McContext& ctx);

struct StrongMalthusOptions {
    std::vector<double> times{2.0, 4.0, 8.0};
    std::size_t n = 10'000;
    std::size_t cap = 1'000'000;
    double z = 3.0;
    double final_tolerance = 0.05;
    double cap_rate_tolerance = 0.01;

    nlohmann::json to_json() const;
};

/// R_t = e^{-lambda t}<Z_t, f> - <nu, f> W_t: E|R_t| must decrease along the
/// time grid and E|R_T| / E[W_T] at the last time must be at most the tolerance.
CheckReport strong_malthus_check(const ModelSpec& model, const SpectralSolution& solution, double x0,
                                 const std::vector<TestFunction>& functions, const StrongMalthusOptions& options,
                                 const McContext& ctx);

struct CriterionOptions {
    double q_min = 1e-3;
    double q_max = 10.0;
    std::size_t q_points = 81;
    double x_min = 1e-8;
    double x_max = 1e8;
    std::size_t x_points = 161;
    /// a certifying threshold must leave this many decades of grid on its side
    double min_decades = 1.0;

    nlohmann::json to_json() const;
};

/// Lyapunov-type sufficient conditions for lambda > 0 with a binary kernel:
///   infinity side: q c(x)/x + B(x) E[r^q - 1] <= 0 for all x >= x_inf,
///   zero side:    -q c(x)/x + B(x) E[(1-r)^{-q} - 1] <= 0 for all x <= x_0,
/// searched on log grids. Passes when both sides are certified.
CheckReport lambda_criterion_check(const ModelSpec& model, const CriterionOptions& options = {},
                                   const MalthusEstimate* lambda = nullptr);

struct TightnessOptions {
    std::vector<double> times{2.0, 4.0, 8.0};
    std::size_t n = 10'000;
    std::size_t cap = 1'000'000;
    double epsilon = 0.05;
    double z = 3.0;
    /// central probability mass of nu h used to build the nested compacts
    std::vector<double> levels{0.5, 0.8, 0.9, 0.95, 0.99, 0.999};
    double cap_rate_tolerance = 0.01;

    nlohmann::json to_json() const;
};

/// h-weighted population mass outside nested compacts K, estimated from the
/// population and, independently, as h(x0) P~(spine outside K) from the spine.
CheckReport tightness_probe(const ModelSpec& model, const SpectralSolution& solution, double x0,
                            const TightnessOptions& options, const McContext& ctx);

}  // namespace gfrag
