#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "gfrag/errors.hpp"
#include "gfrag/model.hpp"
#include "gfrag/rng.hpp"

namespace gfrag {

/// Ulam-Harris label: the root is the empty sequence, daughter i of u is ui.
class Label {
public:
    Label() = default;
    explicit Label(std::vector<std::uint32_t> path) : path_(std::move(path)) {}

    Label child(std::uint32_t index) const;
    std::size_t generation() const noexcept { return path_.size(); }
    bool is_prefix_of(const Label& other) const noexcept;
    const std::vector<std::uint32_t>& path() const noexcept { return path_; }

    /// "root" for the progenitor, otherwise dot-separated indices ("1.2.1").
    std::string str() const;
    static Label parse(std::string_view text);

    auto operator<=>(const Label&) const = default;

private:
    std::vector<std::uint32_t> path_;
};

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct Individual {
    Label label;
    double birth_time = 0.0;
    double birth_mass = 0.0;
    /// +inf when the individual is still alive (or frozen) at the horizon.
    double fission_time = kNever;
    std::int64_t parent = -1;
    std::uint32_t generation = 0;
};

enum class EventKind { fission, freeze };

struct EventRecord {
    EventKind kind;
    double time;
    Label label;
    double mass_before;
    /// daughter ratio r of the fission; NaN for freeze records
    double ratio;
};

struct Atom {
    Label label;
    double mass;
};

struct PopulationSnapshot {
    double time = 0.0;
    std::vector<Atom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }
    double total_mass() const noexcept;
};

struct SimulationOptions {
    double horizon = 0.0;
    std::size_t cap = 1'000'000;
    std::vector<double> snapshot_times;
    bool record_events = true;
    bool record_labels = true;
};

struct PopulationRun {
    double x0 = 0.0;
    double horizon = 0.0;
    std::vector<Individual> individuals;
    std::vector<EventRecord> events;
    std::vector<PopulationSnapshot> snapshots;
    std::size_t fissions = 0;
    std::size_t peak_population = 0;
};

/// Thrown when the living population exceeds the cap. Carries everything
/// simulated up to that point.
class ExplosionError : public Error {
public:
    ExplosionError(std::size_t cap, double time, PopulationRun partial);
    const PopulationRun& partial() const noexcept { return partial_; }
    double time() const noexcept { return time_; }

private:
    PopulationRun partial_;
    double time_;
};

/// A simple stopping line: a freezing rule evaluated along each ancestral
/// trajectory from that trajectory's own history.
class StoppingLine {
public:
    enum class Kind { jump_count, first_entrance, fixed_time };

    /// Freeze at the k-th fission along the ancestral line (birth of generation k).
    static StoppingLine jump_count(std::size_t k);
    /// Freeze at the first entrance into the mass interval [lo, hi].
    static StoppingLine first_entrance(double lo, double hi = kNever);
    static StoppingLine fixed_time(double t);

    Kind kind() const noexcept { return kind_; }
    std::size_t jumps() const noexcept { return jumps_; }
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    double time() const noexcept { return time_; }

    /// Offset after birth at which the line triggers for a trajectory segment
    /// born at (time, mass) in the given generation, or +inf if it cannot
    /// trigger before the next jump. Only meaningful for trajectories whose
    /// ancestors did not trigger it.
    double trigger_offset(const ModelSpec& model, double birth_time, double birth_mass,
                          std::size_t generation) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::fixed_time;
    std::size_t jumps_ = 0;
    double lo_ = 0.0;
    double hi_ = kNever;
    double time_ = 0.0;
};

struct FrozenAtom {
    Label label;
    double time;
    double mass;
};

struct FrozenMeasure {
    std::vector<FrozenAtom> atoms;
    /// individuals still alive at the horizon whose line has not triggered
    std::size_t unfrozen = 0;
    PopulationRun run;
};

/// Exact event-driven simulation of the population started from one cell
/// of mass x0. Fission clocks are thinned Poisson clocks of rate B_max.
PopulationRun simulate_population(const ModelSpec& model, double x0, const SimulationOptions& options,
                                  RandomStream& rng);

/// Simulates until every ancestral trajectory has triggered `line` or the
/// horizon is reached, freezing individuals at their trigger times.
FrozenMeasure freeze_at(const ModelSpec& model, double x0, const StoppingLine& line,
                        const SimulationOptions& options, RandomStream& rng);

/// <m, f> = sum over atoms of f(mass).
double observe(const PopulationSnapshot& snapshot, const ScalarFn& f);
double observe(const FrozenMeasure& frozen, const ScalarFn& f);

}  // namespace gfrag
