#include "gfrag/pdmp.hpp"

#include <algorithm>
#include <optional>

#include <fmt/format.h>

#include "gfrag/detail/walker.hpp"
#include "gfrag/errors.hpp"

namespace gfrag {

using detail::Cursor;
using detail::SegmentStop;
using detail::TaggedCellJumps;
using detail::WalkEnd;

WeightedPathState WeightedPathState::start(double x0, bool record_jumps) {
    if (!(x0 > 0.0)) throw DomainError(fmt::format("tagged cell: initial mass must be positive, got {}", x0));
    WeightedPathState s;
    s.mass = x0;
    s.initial_mass = x0;
    s.record_jumps = record_jumps;
    return s;
}

StepOutcome step_pdmp(const ModelSpec& model, WeightedPathState& state, double horizon, RandomStream& rng) {
    Cursor cur{state.time, state.mass, state.log_weight, state.jumps.size()};
    bool jumped = false;
    detail::walk(model, TaggedCellJumps{model}, cur, horizon, rng, detail::no_segment_stop,
                 [&](const Cursor& c, double pre, double ratio) {
                     if (state.record_jumps) state.jumps.push_back({c.time, pre, ratio});
                     jumped = true;
                     return true;
                 });
    state.time = cur.time;
    state.mass = cur.mass;
    state.log_weight = cur.log_weight;
    return jumped ? StepOutcome::jumped : StepOutcome::horizon;
}

HittingSample sample_hitting(const ModelSpec& model, double x, double y, double horizon, RandomStream& rng) {
    if (!(x > 0.0) || !(y > 0.0)) throw DomainError("sample_hitting: masses must be positive");
    if (!(horizon > 0.0)) throw DomainError("sample_hitting: horizon must be positive");
    Cursor cur{0.0, x, 0.0, 0};
    auto through_y = [&](const Cursor& c, double span) -> std::optional<SegmentStop> {
        if (c.mass >= y) return std::nullopt;
        const double s = flow_time(model, c.mass, y);
        if (s <= span) return SegmentStop{s, y};
        return std::nullopt;
    };
    const WalkEnd end = detail::walk(model, TaggedCellJumps{model}, cur, horizon, rng, through_y, detail::ignore_jump);
    HittingSample out;
    switch (end) {
        case WalkEnd::watcher:
            out.hit = true;
            out.hitting_time = cur.time;
            out.log_weight_at_hit = cur.log_weight;
            break;
        case WalkEnd::limit:
            out.truncated = true;
            break;
        case WalkEnd::quiescent:
            // no more jumps: the path hits y later iff it is still below y
            out.truncated = cur.mass < y;
            break;
    }
    return out;
}

std::vector<TimedSample> sample_at_times(const ModelSpec& model, double x0, std::span<const double> times,
                                         RandomStream& rng) {
    if (!(x0 > 0.0)) throw DomainError("sample_at_times: x0 must be positive");
    if (!std::is_sorted(times.begin(), times.end())) throw DomainError("sample_at_times: times must be sorted");
    std::vector<TimedSample> out;
    out.reserve(times.size());
    Cursor cur{0.0, x0, 0.0, 0};
    for (double t : times) {
        if (t < 0.0) throw DomainError("sample_at_times: times must be >= 0");
        if (t > cur.time) detail::walk(model, TaggedCellJumps{model}, cur, t, rng, detail::no_segment_stop, detail::ignore_jump);
        out.push_back({cur.mass, cur.log_weight});
    }
    return out;
}

StoppedSample sample_stopped(const ModelSpec& model, double x0, const StoppingLine& line, double horizon,
                             RandomStream& rng) {
    if (!(x0 > 0.0)) throw DomainError("sample_stopped: x0 must be positive");
    StoppedSample out;
    Cursor cur{0.0, x0, 0.0, 0};
    auto finish = [&] {
        out.stopped = true;
        out.time = cur.time;
        out.mass = cur.mass;
        out.log_weight = cur.log_weight;
        return out;
    };
    // a line may trigger at time 0 on the starting mass
    if (line.trigger_offset(model, 0.0, x0, 0) == 0.0) return finish();

    auto segment = [&](const Cursor& c, double span) -> std::optional<SegmentStop> {
        switch (line.kind()) {
            case StoppingLine::Kind::fixed_time:
                if (line.time() - c.time <= span) return SegmentStop{line.time() - c.time, flow(model, c.mass, line.time() - c.time)};
                return std::nullopt;
            case StoppingLine::Kind::first_entrance:
                if (c.mass < line.lower()) {
                    const double s = flow_time(model, c.mass, line.lower());
                    if (s <= span) return SegmentStop{s, line.lower()};
                }
                return std::nullopt;
            case StoppingLine::Kind::jump_count:
                return std::nullopt;
        }
        return std::nullopt;
    };
    auto on_jump = [&](const Cursor& c, double, double) {
        switch (line.kind()) {
            case StoppingLine::Kind::jump_count:
                return c.jumps == line.jumps();
            case StoppingLine::Kind::first_entrance:
                return c.mass >= line.lower() && c.mass <= line.upper();
            case StoppingLine::Kind::fixed_time:
                return false;
        }
        return false;
    };
    const double limit = line.kind() == StoppingLine::Kind::fixed_time ? std::min(horizon, line.time() + 1.0) : horizon;
    const WalkEnd end = detail::walk(model, TaggedCellJumps{model}, cur, limit, rng, segment, on_jump);
    if (end == WalkEnd::watcher) return finish();
    if (line.kind() == StoppingLine::Kind::fixed_time && line.time() <= horizon) return finish();
    if (end == WalkEnd::quiescent) {
        out.truncated = line.kind() == StoppingLine::Kind::first_entrance && cur.mass < line.lower();
        return out;
    }
    out.truncated = true;
    return out;
}

std::vector<PathPoint> record_path(const ModelSpec& model, double x0, double horizon, RandomStream& rng) {
    std::vector<PathPoint> points;
    Cursor cur{0.0, x0, 0.0, 0};
    points.push_back({0.0, x0, 0.0, "start"});
    const WalkEnd end = detail::walk(model, TaggedCellJumps{model}, cur, horizon, rng, detail::no_segment_stop,
                                     [&](const Cursor& c, double pre, double) {
                                         points.push_back({c.time, pre, c.log_weight, "flow"});
                                         points.push_back({c.time, c.mass, c.log_weight, "jump"});
                                         return false;
                                     });
    points.push_back({cur.time, cur.mass, cur.log_weight, end == WalkEnd::quiescent ? "end" : "horizon"});
    return points;
}

}  // namespace gfrag
