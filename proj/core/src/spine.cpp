#include "gfrag/spine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "gfrag/detail/walker.hpp"
#include "gfrag/errors.hpp"
#include "gfrag/interp.hpp"
#include "gfrag/parallel.hpp"

namespace gfrag {

SpineModel::SpineModel(ModelSpec base, HarmonicEstimate h) : base_(std::move(base)), h_(std::move(h)) {
    for (std::size_t i = 0; i < h_.grid().size(); ++i) {
        const double l = h_.ell_values()[i];
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw InvalidHarmonic(fmt::format("h is not strictly positive at x = {}", h_.grid()[i]));
        }
    }
    range_lo_ = h_.grid().front() / 10.0;
    range_hi_ = h_.grid().back() * 10.0;

    // Per cell [a, b]: daughters are below b, so h(daughter) <= sup_{z <= b} h,
    // and h on the cell is at least its node minimum (h is shape-preserving
    // between nodes; the margin absorbs the interpolation overshoot).
    constexpr double kMargin = 1.1;
    constexpr std::size_t kPerDecade = 40;
    const double b_max = base_.fission().bound();
    const auto cells = static_cast<std::size_t>(std::ceil(std::log10(range_hi_ / range_lo_) * kPerDecade));
    bound_cells_ = log_grid(range_lo_, range_hi_, cells + 1);
    double running_sup = 0.0;
    for (double z : log_grid(range_lo_ * 1e-8, range_lo_, 200)) running_sup = std::max(running_sup, h_(z));
    std::vector<double> per_cell(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        const double ha = h_(bound_cells_[i]);
        const double hb = h_(bound_cells_[i + 1]);
        running_sup = std::max({running_sup, ha, hb});
        per_cell[i] = kMargin * b_max * 2.0 * running_sup / std::min(ha, hb);
    }
    bound_suffix_.assign(cells, 0.0);
    for (std::size_t i = cells; i-- > 0;) {
        bound_suffix_[i] = std::max(per_cell[i], i + 1 < cells ? bound_suffix_[i + 1] : 0.0);
    }
    bound_ = bound_suffix_.empty() ? 0.0 : bound_suffix_.front();
}

double SpineModel::rate_bound(double mass) const {
    if (bound_suffix_.empty() || mass <= bound_cells_.front()) return bound_;
    if (mass >= bound_cells_.back()) return bound_suffix_.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(bound_cells_.begin(), bound_cells_.end(), mass) -
                                            bound_cells_.begin()) - 1;
    return bound_suffix_[std::min(i, bound_suffix_.size() - 1)];
}

double SpineModel::w(double x) const {
    return base_.kernel().expect(x, [&](double r) { return h_(r * x) + h_((1.0 - r) * x); });
}

double SpineModel::tilted_rate(double x) const { return w(x) * base_.fission()(x) / h_(x); }

double SpineModel::pick_small(double x, double r) const {
    const double small = h_(r * x);
    return small / (small + h_((1.0 - r) * x));
}

bool SpineModel::try_jump(double mass, double bound, RandomStream& rng, double& ratio) const {
    const double r = base_.kernel().sample(mass, rng);
    const double small = h_(r * mass);
    const double large = h_((1.0 - r) * mass);
    const double accept = base_.fission()(mass) * (small + large) / (h_(mass) * bound);
    if (rng.uniform() >= accept) return false;
    ratio = rng.uniform() * (small + large) < small ? r : 1.0 - r;
    return true;
}

nlohmann::json SpineModel::to_json() const {
    return {{"model", base_.name()},
            {"parameters", base_.parameters()},
            {"rate_bound", bound_},
            {"range", {range_lo_, range_hi_}},
            {"harmonic", h_.to_json()}};
}

SpineModel build_spine_model(const ModelSpec& model, const HarmonicEstimate& h) { return SpineModel(model, h); }

SpineModel build_spine_model(const ModelSpec& model, const SpectralSolution& solution) {
    return SpineModel(model, solution.harmonic);
}

Occupation::Occupation(std::vector<double> grid) : centers(std::move(grid)) {
    const std::size_t m = centers.size();
    time.assign(m, 0.0);
    jumps.assign(m, 0);
    if (m == 0) return;
    if (m == 1) {
        edges = {centers[0] / std::sqrt(10.0), centers[0] * std::sqrt(10.0)};
        return;
    }
    edges.resize(m + 1);
    for (std::size_t i = 1; i < m; ++i) edges[i] = std::sqrt(centers[i - 1] * centers[i]);
    edges[0] = centers[0] * centers[0] / edges[1];
    edges[m] = centers[m - 1] * centers[m - 1] / edges[m - 1];
}

std::size_t Occupation::bin_of(double mass) const {
    if (centers.empty() || mass < edges.front() || mass >= edges.back()) return centers.size();
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), mass) - edges.begin()) - 1;
}

void Occupation::merge(const Occupation& other) {
    for (std::size_t i = 0; i < time.size(); ++i) {
        time[i] += other.time[i];
        jumps[i] += other.jumps[i];
    }
    outside += other.outside;
    total += other.total;
}

std::vector<double> Occupation::fractions() const {
    std::vector<double> out(time.size(), 0.0);
    if (total > 0.0) {
        for (std::size_t i = 0; i < time.size(); ++i) out[i] = time[i] / total;
    }
    return out;
}

nlohmann::json SpineRunOptions::to_json() const {
    return {{"horizon", horizon},
            {"burn_in_fraction", burn_in_fraction},
            {"replicates", replicates},
            {"mixing_tolerance", mixing_tolerance}};
}

nlohmann::json SpineRun::summary() const {
    return {{"replicates", replicates},
            {"escapes", escapes},
            {"recorded_time", occupation.total},
            {"time_outside_grid", occupation.outside},
            {"returns", return_times.size()},
            {"max_mass", max_mass},
            {"half_run_l1", half_run_l1},
            {"mixing_warning", mixing_warning}};
}

namespace {

// Adds the flow stretch from m0 up to m1 to the histogram.
void add_flow(const ModelSpec& model, Occupation& occ, double m0, double m1) {
    if (!(m1 > m0)) return;
    occ.total += flow_time(model, m0, m1);
    double cur = m0;
    if (cur < occ.edges.front()) {
        const double next = std::min(m1, occ.edges.front());
        occ.outside += flow_time(model, cur, next);
        cur = next;
    }
    std::size_t b = occ.bin_of(cur);
    while (cur < m1 && b < occ.centers.size()) {
        const double next = std::min(m1, occ.edges[b + 1]);
        occ.time[b] += flow_time(model, cur, next);
        cur = next;
        ++b;
    }
    if (cur < m1) occ.outside += flow_time(model, cur, m1);
}

struct ReplicateResult {
    Occupation first;
    Occupation second;
    std::vector<double> returns;
    double max_mass = 0.0;
    bool escaped = false;
};

ReplicateResult run_replicate(const SpineModel& spine, double x0, std::span<const double> grid,
                              const SpineRunOptions& opt, RandomStream& rng) {
    const ModelSpec& model = spine.base();
    const double burn = opt.burn_in_fraction * opt.horizon;
    const double mid = 0.5 * (burn + opt.horizon);
    ReplicateResult res{Occupation({grid.begin(), grid.end()}), Occupation({grid.begin(), grid.end()}), {}, x0, false};
    double last_return = 0.0;

    // records the window-clipped part of a flow segment [t, t + dt] from mass m0
    auto record = [&](double t, double m0, double dt) {
        const double t1 = t + dt;
        auto mass_at = [&](double s) { return s <= t ? m0 : flow(model, m0, s - t); };
        if (t1 > burn && t < mid) add_flow(model, res.first, mass_at(std::max(t, burn)), mass_at(std::min(t1, mid)));
        if (t1 > mid) add_flow(model, res.second, mass_at(std::max(t, mid)), mass_at(t1));
    };

    detail::Cursor cur{0.0, x0, 0.0, 0};
    auto on_segment = [&](const detail::Cursor& c, double span) -> std::optional<detail::SegmentStop> {
        const double m1 = flow(model, c.mass, span);
        if (m1 > spine.range_hi()) {
            const double s = flow_time(model, c.mass, spine.range_hi());
            record(c.time, c.mass, s);
            res.escaped = true;
            return detail::SegmentStop{s, spine.range_hi()};
        }
        if (c.mass < x0 && x0 <= m1) {
            const double hit = c.time + flow_time(model, c.mass, x0);
            res.returns.push_back(hit - last_return);
            last_return = hit;
        }
        record(c.time, c.mass, span);
        res.max_mass = std::max(res.max_mass, m1);
        return std::nullopt;
    };
    auto on_jump = [&](const detail::Cursor& c, double pre, double) {
        if (c.time >= burn) {
            Occupation& occ = c.time < mid ? res.first : res.second;
            const std::size_t b = occ.bin_of(pre);
            if (b < occ.jumps.size()) ++occ.jumps[b];
        }
        if (c.mass < spine.range_lo()) {
            res.escaped = true;
            return true;
        }
        return false;
    };
    detail::walk(model, spine, cur, opt.horizon, rng, on_segment, on_jump);
    return res;
}

double normalized_l1(const Occupation& a, const Occupation& b) {
    const auto fa = a.fractions();
    const auto fb = b.fractions();
    double s = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) s += std::abs(fa[i] - fb[i]);
    return s;
}

}  // namespace

SpineRun simulate_spine(const SpineModel& spine, double x0, std::span<const double> grid,
                        const SpineRunOptions& options, const McContext& ctx) {
    if (!(x0 > 0.0)) throw DomainError("simulate_spine: x0 must be positive");
    if (!(options.horizon > 0.0) || options.replicates < 1) throw DomainError("simulate_spine: bad run options");
    if (!(options.burn_in_fraction >= 0.0 && options.burn_in_fraction < 1.0)) {
        throw DomainError("simulate_spine: burn-in fraction must lie in [0, 1)");
    }
    if (!std::isfinite(spine.rate_bound())) throw DomainError("simulate_spine: tilted rate bound is not finite");
    std::vector<ReplicateResult> results(options.replicates);
    parallel_for(options.replicates, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, StreamTag::spine, i);
        results[i] = run_replicate(spine, x0, grid, options, rng);
    });

    SpineRun run;
    const std::vector<double> centers(grid.begin(), grid.end());
    run.occupation = Occupation(centers);
    run.first_half = Occupation(centers);
    run.second_half = Occupation(centers);
    for (auto& r : results) {
        run.max_mass = std::max(run.max_mass, r.max_mass);
        if (r.escaped) {
            ++run.escapes;
            continue;
        }
        ++run.replicates;
        run.first_half.merge(r.first);
        run.second_half.merge(r.second);
        Occupation both = r.first;
        both.merge(r.second);
        run.occupation.merge(both);
        run.per_replicate.push_back(std::move(both));
        run.return_times.insert(run.return_times.end(), r.returns.begin(), r.returns.end());
    }
    run.half_run_l1 = normalized_l1(run.first_half, run.second_half);
    run.mixing_warning = run.half_run_l1 > options.mixing_tolerance;
    return run;
}

std::vector<double> spine_at_times(const SpineModel& spine, double x0, std::span<const double> times,
                                   RandomStream& rng) {
    std::vector<double> out;
    detail::Cursor cur{0.0, x0, 0.0, 0};
    bool escaped = false;
    auto on_segment = [&](const detail::Cursor& c, double span) -> std::optional<detail::SegmentStop> {
        if (flow(spine.base(), c.mass, span) > spine.range_hi()) {
            escaped = true;
            return detail::SegmentStop{flow_time(spine.base(), c.mass, spine.range_hi()), spine.range_hi()};
        }
        return std::nullopt;
    };
    auto on_jump = [&](const detail::Cursor& c, double, double) {
        escaped = c.mass < spine.range_lo();
        return escaped;
    };
    for (double t : times) {
        if (!escaped && t > cur.time) detail::walk(spine.base(), spine, cur, t, rng, on_segment, on_jump);
        out.push_back(escaped ? std::nan("") : cur.mass);
    }
    return out;
}

namespace {

// nu_i = pi_i / (y_i dlog_i h(y_i)), normalized to <nu, h> = 1
std::vector<double> profile_from(const Occupation& occ, const SpineModel& spine, std::span<const double> grid,
                                 double& raw) {
    const auto w = log_trapezoid_weights(grid);
    std::vector<double> nu(grid.size(), 0.0);
    raw = 0.0;
    if (occ.total <= 0.0) return nu;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double dlog = std::log(occ.edges[i + 1] / occ.edges[i]);
        nu[i] = occ.time[i] / occ.total / (grid[i] * dlog * spine.h(grid[i]));
        raw += nu[i] * spine.h(grid[i]) * grid[i] * w[i];
    }
    if (raw > 0.0) {
        for (double& v : nu) v /= raw;
    }
    return nu;
}

}  // namespace

SpineProfile estimate_nu_spine(const SpineModel& spine, double x0, std::span<const double> grid,
                               const SpineRunOptions& options, const McContext& ctx) {
    if (grid.size() < 2) throw DomainError("estimate_nu_spine: need at least two grid points");
    SpineProfile out;
    out.run = simulate_spine(spine, x0, grid, options, ctx);
    if (out.run.replicates == 0) throw DomainError("estimate_nu_spine: every replicate left the operational range");
    ProfileEstimate& p = out.profile;
    p.grid.assign(grid.begin(), grid.end());
    p.nu = profile_from(out.run.occupation, spine, grid, p.raw_mass);

    // replicate spread for the standard error
    const std::size_t r = out.run.per_replicate.size();
    p.nu_se.assign(grid.size(), 0.0);
    if (r > 1) {
        std::vector<std::vector<double>> reps;
        for (const auto& occ : out.run.per_replicate) {
            double raw = 0.0;
            reps.push_back(profile_from(occ, spine, grid, raw));
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::vector<double> col(r);
            for (std::size_t k = 0; k < r; ++k) col[k] = reps[k][i];
            p.nu_se[i] = mean_stderr(col).se;
        }
    }
    return out;
}

CheckReport check_condition_main(const ModelSpec& model, const MalthusEstimate& lambda,
                                 const ConditionOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    auto sup_over = [&](double lo, double hi) {
        double s = 0.0;
        for (double x : log_grid(lo, hi, options.points)) s = std::max(s, model.growth_ratio(x));
        return s;
    };
    const double s0 = sup_over(options.near_zero_lo, options.near_zero_hi);
    const double s_inf = sup_over(options.near_inf_lo, options.near_inf_hi);
    const double worst = std::max(s0, s_inf);
    const double lo = lambda.ci_lower();

    CheckReport rep;
    rep.name = "condition_main";
    rep.inputs_digest = digest({{"model", model.name()},
                                {"parameters", model.parameters()},
                                {"lambda", lambda.lambda},
                                {"lambda_stderr", lambda.se}});
    rep.statistic_label = "max boundary c(x)/x vs lower CI end of lambda";
    rep.statistic = worst;
    rep.tolerance = lo;
    if (worst < lo) {
        rep.verdict = Verdict::pass;
    } else if (worst >= lambda.lambda) {
        rep.verdict = Verdict::fail;
    } else {
        rep.verdict = Verdict::inconclusive;
    }
    // a surrogate still moving across its decade range is a weaker limsup proxy
    const double edge0 = model.growth_ratio(options.near_zero_lo);
    const double edge_inf = model.growth_ratio(options.near_inf_hi);
    if (edge0 > model.growth_ratio(options.near_zero_hi) * 1.01) rep.notes.push_back("c(x)/x still rising towards 0+");
    if (edge_inf > model.growth_ratio(options.near_inf_lo) * 1.01) rep.notes.push_back("c(x)/x still rising towards infinity");
    rep.details = {{"limsup_zero_surrogate", s0},
                   {"limsup_infinity_surrogate", s_inf},
                   {"lambda", lambda.lambda},
                   {"lambda_ci", {lo, lambda.ci_upper()}},
                   {"margin_zero", lambda.lambda - s0},
                   {"margin_infinity", lambda.lambda - s_inf}};
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace gfrag
