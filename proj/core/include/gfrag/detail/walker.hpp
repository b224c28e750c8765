#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "gfrag/model.hpp"
#include "gfrag/rng.hpp"

namespace gfrag::detail {

struct Cursor {
    double time = 0.0;
    double mass = 0.0;
    double log_weight = 0.0;
    std::size_t jumps = 0;
};

struct SegmentStop {
    double offset;
    double mass;
};

enum class WalkEnd {
    watcher,    // a watcher asked to stop
    limit,      // reached the time limit
    quiescent,  // no jump can ever occur again; cursor moved to the limit
};

/// Moves the cursor along the flow for `dt`, updating the weight by the
/// flow mass ratio (exp of the integral of c(X)/X over the segment).
inline void advance(const ModelSpec& model, Cursor& cur, double dt) {
    if (dt <= 0.0) return;
    const double next = flow(model, cur.mass, dt);
    cur.log_weight += std::log(next / cur.mass);
    cur.mass = next;
    cur.time += dt;
}

inline void advance_to(Cursor& cur, double offset, double mass) {
    cur.log_weight += std::log(mass / cur.mass);
    cur.mass = mass;
    cur.time += offset;
}

/// Thinning loop shared by the tagged-cell and spine processes.
///
/// Mechanism: rate_bound(mass), a proposal rate dominating the jump rate at
/// every mass reachable by flowing up from `mass`, and
/// try_jump(mass, bound, rng, ratio) which decides a proposal made at rate
/// `bound` and returns the ratio post/pre of the followed daughter.
/// on_segment(cursor, span) may stop the walk inside a jump-free stretch;
/// on_jump(cursor, pre_mass, ratio) is told of every accepted jump.
template <class Mechanism, class OnSegment, class OnJump>
WalkEnd walk(const ModelSpec& model, const Mechanism& mechanism, Cursor& cur, double limit, RandomStream& rng,
             OnSegment&& on_segment, OnJump&& on_jump) {
    for (;;) {
        const double bound = mechanism.rate_bound(cur.mass);
        const double dt = rng.exponential(bound);
        const double room = limit - cur.time;
        const double span = dt < room ? dt : room;
        if (std::optional<SegmentStop> stop = on_segment(cur, span)) {
            advance_to(cur, stop->offset, stop->mass);
            return WalkEnd::watcher;
        }
        if (dt >= room) {
            if (std::isfinite(room)) advance(model, cur, room);
            return std::isinf(dt) ? WalkEnd::quiescent : WalkEnd::limit;
        }
        advance(model, cur, dt);
        double ratio = 1.0;
        if (mechanism.try_jump(cur.mass, bound, rng, ratio)) {
            const double pre = cur.mass;
            // the weight is continuous: flow segments already carry the full
            // integral of c(X)/X, which equals log(X_t/X_0) + sum log(pre/post)
            cur.mass = pre * ratio;
            ++cur.jumps;
            if (on_jump(cur, pre, ratio)) return WalkEnd::watcher;
        }
    }
}

/// Size-biased daughter pick of the tagged cell X: at a fission of mass x
/// with ratio r, follow rx with probability r, else (1-r)x.
struct TaggedCellJumps {
    const ModelSpec& model;

    double rate_bound(double) const { return model.fission().bound(); }

    bool try_jump(double mass, double bound, RandomStream& rng, double& ratio) const {
        if (rng.uniform() * bound >= model.fission()(mass)) return false;
        const double r = model.kernel().sample(mass, rng);
        ratio = rng.uniform() < r ? r : 1.0 - r;
        return true;
    }
};

inline constexpr auto no_segment_stop = [](const Cursor&, double) -> std::optional<SegmentStop> { return std::nullopt; };
inline constexpr auto ignore_jump = [](const Cursor&, double, double) { return false; };

}  // namespace gfrag::detail
