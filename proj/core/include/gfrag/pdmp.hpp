#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gfrag/branching.hpp"
#include "gfrag/model.hpp"
#include "gfrag/rng.hpp"

namespace gfrag {

struct JumpRecord {
    double time;
    double pre_mass;
    /// post-jump mass over pre-jump mass (the followed daughter's ratio)
    double ratio;
};

/// State of the tagged cell X_t together with log of its Feynman-Kac
/// weight, the exponential of the integral of c(X_s)/X_s ds.
///
/// The weight is never integrated: it equals (X_t/X_0) times the product
/// of pre/post mass ratios over the jumps.
struct WeightedPathState {
    double time = 0.0;
    double mass = 0.0;
    double log_weight = 0.0;
    double initial_mass = 0.0;
    std::vector<JumpRecord> jumps;
    bool record_jumps = true;

    static WeightedPathState start(double x0, bool record_jumps = true);
    double weight() const { return std::exp(log_weight); }
};

enum class StepOutcome { jumped, horizon };

/// Advances X to its next jump, or to `horizon` if no jump occurs first.
StepOutcome step_pdmp(const ModelSpec& model, WeightedPathState& state, double horizon, RandomStream& rng);

/// First hitting of y by X started at x. X only moves up continuously, so
/// y is reached by flowing through it. At x == y this is the first return
/// (the path must jump below y first); otherwise the first passage.
struct HittingSample {
    bool hit = false;
    double hitting_time = 0.0;
    double log_weight_at_hit = 0.0;
    bool truncated = false;

    /// e^{-qH} times the weight at H on {H < inf}; truncated samples give 0.
    double integrand(double q) const { return hit ? std::exp(log_weight_at_hit - q * hitting_time) : 0.0; }
};

HittingSample sample_hitting(const ModelSpec& model, double x, double y, double horizon, RandomStream& rng);

/// (X_t, log weight) at each of the sorted times.
struct TimedSample {
    double mass;
    double log_weight;
};
std::vector<TimedSample> sample_at_times(const ModelSpec& model, double x0, std::span<const double> times,
                                         RandomStream& rng);

/// X stopped at a simple stopping line T evaluated on its own path.
struct StoppedSample {
    bool stopped = false;
    double time = 0.0;
    double mass = 0.0;
    double log_weight = 0.0;
    bool truncated = false;
};
StoppedSample sample_stopped(const ModelSpec& model, double x0, const StoppingLine& line, double horizon,
                             RandomStream& rng);

/// Debug dump of a single path: one row per flow endpoint and jump.
struct PathPoint {
    double time;
    double mass;
    double log_weight;
    std::string event;
};
std::vector<PathPoint> record_path(const ModelSpec& model, double x0, double horizon, RandomStream& rng);

}  // namespace gfrag
