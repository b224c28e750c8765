#include "gfrag/branching.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>

#include <fmt/format.h>

namespace gfrag {

Label Label::child(std::uint32_t index) const {
    std::vector<std::uint32_t> path = path_;
    path.push_back(index);
    return Label(std::move(path));
}

bool Label::is_prefix_of(const Label& other) const noexcept {
    return path_.size() <= other.path_.size() && std::equal(path_.begin(), path_.end(), other.path_.begin());
}

std::string Label::str() const {
    if (path_.empty()) return "root";
    std::string out = std::to_string(path_.front());
    for (std::size_t i = 1; i < path_.size(); ++i) {
        out += '.';
        out += std::to_string(path_[i]);
    }
    return out;
}

Label Label::parse(std::string_view text) {
    if (text == "root") return Label();
    std::vector<std::uint32_t> path;
    while (!text.empty()) {
        const auto dot = text.find('.');
        const auto part = text.substr(0, dot);
        std::uint32_t v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || ptr != part.data() + part.size() || v == 0) {
            throw DomainError(fmt::format("invalid Ulam-Harris label `{}`", text));
        }
        path.push_back(v);
        if (dot == std::string_view::npos) break;
        text.remove_prefix(dot + 1);
        if (text.empty()) throw DomainError("invalid Ulam-Harris label: trailing dot");
    }
    return Label(std::move(path));
}

double PopulationSnapshot::total_mass() const noexcept {
    double sum = 0.0;
    for (const auto& a : atoms) sum += a.mass;
    return sum;
}

ExplosionError::ExplosionError(std::size_t cap, double time, PopulationRun partial)
    : Error(fmt::format("population exceeded cap of {} individuals at t={:.6g}", cap, time)),
      partial_(std::move(partial)),
      time_(time) {}

StoppingLine StoppingLine::jump_count(std::size_t k) {
    StoppingLine line;
    line.kind_ = Kind::jump_count;
    line.jumps_ = k;
    return line;
}

StoppingLine StoppingLine::first_entrance(double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo)) throw DomainError("first_entrance: need 0 < lo <= hi");
    StoppingLine line;
    line.kind_ = Kind::first_entrance;
    line.lo_ = lo;
    line.hi_ = hi;
    return line;
}

StoppingLine StoppingLine::fixed_time(double t) {
    if (!(t >= 0.0)) throw DomainError("fixed_time: need t >= 0");
    StoppingLine line;
    line.kind_ = Kind::fixed_time;
    line.time_ = t;
    return line;
}

double StoppingLine::trigger_offset(const ModelSpec& model, double birth_time, double birth_mass,
                                    std::size_t generation) const {
    switch (kind_) {
        case Kind::jump_count:
            return generation == jumps_ ? 0.0 : kNever;
        case Kind::fixed_time:
            return birth_time <= time_ ? time_ - birth_time : kNever;
        case Kind::first_entrance:
            if (birth_mass >= lo_ && birth_mass <= hi_) return 0.0;
            if (birth_mass < lo_) return flow_time(model, birth_mass, lo_);
            return kNever;
    }
    return kNever;
}

std::string StoppingLine::describe() const {
    switch (kind_) {
        case Kind::jump_count:
            return fmt::format("jump_count({})", jumps_);
        case Kind::fixed_time:
            return fmt::format("fixed_time({:.17g})", time_);
        case Kind::first_entrance:
            return std::isinf(hi_) ? fmt::format("first_entrance([{:.17g}, inf))", lo_)
                                   : fmt::format("first_entrance([{:.17g}, {:.17g}])", lo_, hi_);
    }
    return {};
}

namespace {

enum class Pending : std::uint8_t { freeze = 0, proposal = 1 };

struct QueueEntry {
    double time;
    Pending kind;
    std::uint64_t seq;
    std::uint32_t cell;

    // min-heap on (time, kind, seq): freezes before fissions at equal times
    bool operator>(const QueueEntry& o) const noexcept {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return kind > o.kind;
        return seq > o.seq;
    }
};

class PopulationEngine {
public:
    PopulationEngine(const ModelSpec& model, double x0, const SimulationOptions& options, RandomStream& rng,
                     const StoppingLine* line)
        : model_(model), options_(options), rng_(rng), line_(line), bound_(model.fission().bound()) {
        if (!(x0 > 0.0)) throw DomainError(fmt::format("simulate_population: x0 must be positive, got {}", x0));
        if (!(options.horizon >= 0.0)) throw DomainError("simulate_population: horizon must be >= 0");
        if (options.cap < 1) throw DomainError("simulate_population: cap must be >= 1");
        snapshot_times_ = options.snapshot_times;
        std::sort(snapshot_times_.begin(), snapshot_times_.end());
        for (double t : snapshot_times_) {
            if (!(t >= 0.0 && t <= options.horizon)) {
                throw DomainError(fmt::format("snapshot time {} outside [0, horizon={}]", t, options.horizon));
            }
        }
        run_.x0 = x0;
        run_.horizon = options.horizon;
        spawn(Label(), 0.0, x0, 0, -1);
    }

    void run() {
        std::size_t next_snapshot = 0;
        while (!queue_.empty()) {
            const QueueEntry top = queue_.top();
            while (next_snapshot < snapshot_times_.size() && snapshot_times_[next_snapshot] < top.time) {
                take_snapshot(snapshot_times_[next_snapshot++]);
            }
            if (top.time > options_.horizon) break;
            queue_.pop();
            Cell& cell = cells_[top.cell];
            if (!cell.alive) continue;
            if (top.kind == Pending::freeze) freeze(top.cell, top.time);
            else propose(top.cell, top.time);
        }
        while (next_snapshot < snapshot_times_.size()) take_snapshot(snapshot_times_[next_snapshot++]);
    }

    PopulationRun finish() {
        if (options_.record_events) {
            run_.individuals.reserve(cells_.size());
            for (auto& c : cells_) {
                run_.individuals.push_back({std::move(c.label), c.birth_time, c.birth_mass, c.fission_time, c.parent, c.generation});
            }
        }
        return std::move(run_);
    }

    std::vector<FrozenAtom>& frozen() { return frozen_; }
    std::size_t alive_count() const { return alive_.size(); }

private:
    struct Cell {
        Label label;
        double birth_time;
        double birth_mass;
        double fission_time;
        std::int64_t parent;
        std::uint32_t generation;
        std::uint32_t alive_slot;
        bool alive;
    };

    double mass_at(const Cell& c, double t) const { return flow(model_, c.birth_mass, t - c.birth_time); }

    void schedule(Pending kind, double time, std::uint32_t cell) {
        if (time <= options_.horizon) queue_.push({time, kind, seq_++, cell});
    }

    void spawn(Label label, double time, double mass, std::uint32_t generation, std::int64_t parent) {
        const auto index = static_cast<std::uint32_t>(cells_.size());
        cells_.push_back({std::move(label), time, mass, kNever, parent, generation,
                          static_cast<std::uint32_t>(alive_.size()), true});
        alive_.push_back(index);
        run_.peak_population = std::max(run_.peak_population, alive_.size());
        if (line_ != nullptr) {
            const double offset = line_->trigger_offset(model_, time, mass, generation);
            if (offset == 0.0) {
                freeze(index, time);
                return;
            }
            schedule(Pending::freeze, time + offset, index);
        }
        schedule(Pending::proposal, time + rng_.exponential(bound_), index);
    }

    void retire(std::uint32_t index) {
        Cell& c = cells_[index];
        c.alive = false;
        const std::uint32_t slot = c.alive_slot;
        const std::uint32_t moved = alive_.back();
        alive_[slot] = moved;
        cells_[moved].alive_slot = slot;
        alive_.pop_back();
    }

    void propose(std::uint32_t index, double t) {
        const double mass = mass_at(cells_[index], t);
        const double u = rng_.uniform();
        if (u * bound_ >= model_.fission()(mass)) {
            schedule(Pending::proposal, t + rng_.exponential(bound_), index);
            return;
        }
        const double r = model_.kernel().sample(mass, rng_);
        Cell& mother = cells_[index];
        mother.fission_time = t;
        const std::uint32_t generation = mother.generation + 1;
        Label big, small;
        if (options_.record_labels) {
            big = mother.label.child(1);
            small = mother.label.child(2);
        }
        if (options_.record_events) run_.events.push_back({EventKind::fission, t, mother.label, mass, r});
        retire(index);
        ++run_.fissions;
        // ranked partition: daughter 1 carries (1-r)x, daughter 2 carries rx
        spawn(std::move(big), t, (1.0 - r) * mass, generation, index);
        spawn(std::move(small), t, r * mass, generation, index);
        if (alive_.size() > options_.cap) {
            PopulationRun partial = finish();
            throw ExplosionError(options_.cap, t, std::move(partial));
        }
    }

    void freeze(std::uint32_t index, double t) {
        const Cell& c = cells_[index];
        double mass = mass_at(c, t);
        if (line_->kind() == StoppingLine::Kind::first_entrance && c.birth_mass < line_->lower()) {
            mass = line_->lower();
        }
        frozen_.push_back({options_.record_labels ? c.label : Label(), t, mass});
        if (options_.record_events) run_.events.push_back({EventKind::freeze, t, c.label, mass, std::nan("")});
        retire(index);
    }

    void take_snapshot(double t) {
        PopulationSnapshot snap;
        snap.time = t;
        snap.atoms.reserve(alive_.size());
        for (std::uint32_t index : alive_) {
            const Cell& c = cells_[index];
            snap.atoms.push_back({options_.record_labels ? c.label : Label(), mass_at(c, t)});
        }
        run_.snapshots.push_back(std::move(snap));
    }

    const ModelSpec& model_;
    const SimulationOptions& options_;
    RandomStream& rng_;
    const StoppingLine* line_;
    double bound_;
    std::vector<double> snapshot_times_;
    std::vector<Cell> cells_;
    std::vector<std::uint32_t> alive_;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    std::vector<FrozenAtom> frozen_;
    PopulationRun run_;
};

}  // namespace

PopulationRun simulate_population(const ModelSpec& model, double x0, const SimulationOptions& options,
                                  RandomStream& rng) {
    PopulationEngine engine(model, x0, options, rng, nullptr);
    engine.run();
    return engine.finish();
}

FrozenMeasure freeze_at(const ModelSpec& model, double x0, const StoppingLine& line,
                        const SimulationOptions& options, RandomStream& rng) {
    PopulationEngine engine(model, x0, options, rng, &line);
    engine.run();
    FrozenMeasure out;
    out.unfrozen = engine.alive_count();
    out.atoms = std::move(engine.frozen());
    out.run = engine.finish();
    return out;
}

double observe(const PopulationSnapshot& snapshot, const ScalarFn& f) {
    double sum = 0.0;
    for (const auto& a : snapshot.atoms) sum += f(a.mass);
    return sum;
}

double observe(const FrozenMeasure& frozen, const ScalarFn& f) {
    double sum = 0.0;
    for (const auto& a : frozen.atoms) sum += f(a.mass);
    return sum;
}

}  // namespace gfrag
