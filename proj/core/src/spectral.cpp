#include "gfrag/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gfrag/errors.hpp"
#include "gfrag/parallel.hpp"

namespace gfrag {

nlohmann::json LaplaceEstimate::to_json() const {
    nlohmann::json j = {{"q", q},
                        {"x", x},
                        {"y", y},
                        {"mean", mean},
                        {"stderr", se},
                        {"n", n},
                        {"horizon", horizon},
                        {"truncated_fraction", truncated_fraction},
                        {"lower", lower}};
    j["upper"] = upper_available ? nlohmann::json(upper) : nlohmann::json(nullptr);
    return j;
}

HittingBatch::HittingBatch(double x, double y, double horizon, double gamma, std::vector<HittingSample> samples)
    : x_(x), y_(y), horizon_(horizon), gamma_(gamma), samples_(std::move(samples)) {
    truncated_ = static_cast<std::size_t>(
        std::count_if(samples_.begin(), samples_.end(), [](const HittingSample& s) { return s.truncated; }));
}

double HittingBatch::truncated_fraction() const noexcept {
    return samples_.empty() ? 0.0 : static_cast<double>(truncated_) / static_cast<double>(samples_.size());
}

LaplaceEstimate HittingBatch::laplace(double q) const {
    std::vector<double> values(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) values[i] = samples_[i].integrand(q);
    const MeanStderr ms = mean_stderr(values);
    LaplaceEstimate e;
    e.q = q;
    e.x = x_;
    e.y = y_;
    e.mean = ms.mean;
    e.se = ms.se;
    e.n = ms.n;
    e.horizon = horizon_;
    e.truncated_fraction = truncated_fraction();
    e.lower = e.mean;
    e.upper_available = q > gamma_;
    e.upper = e.upper_available ? e.mean + e.truncated_fraction * std::exp(-(q - gamma_) * horizon_) : kNever;
    return e;
}

MeanStderr HittingBatch::derivative(double q) const {
    std::vector<double> values(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        values[i] = -samples_[i].hitting_time * samples_[i].integrand(q);
    }
    return mean_stderr(values);
}

MeanStderr HittingBatch::central_difference(double q, double dq) const {
    std::vector<double> values(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        values[i] = (samples_[i].integrand(q + dq) - samples_[i].integrand(q - dq)) / (2.0 * dq);
    }
    return mean_stderr(values);
}

HittingBatch sample_hitting_batch(const ModelSpec& model, double x, double y, double horizon, std::size_t n,
                                  const McContext& ctx, StreamTag tag, std::uint64_t offset) {
    std::vector<HittingSample> samples(n);
    parallel_for(n, ctx.workers, [&](std::size_t i) {
        RandomStream rng(ctx.seed, tag, offset + i);
        samples[i] = sample_hitting(model, x, y, horizon, rng);
    });
    return HittingBatch(x, y, horizon, model.gamma(), std::move(samples));
}

LaplaceEstimate estimate_laplace(const ModelSpec& model, double x, double y, double q, std::size_t n,
                                 double horizon, const McContext& ctx) {
    if (n < 1) throw DomainError("estimate_laplace: n must be >= 1");
    return sample_hitting_batch(model, x, y, horizon, n, ctx).laplace(q);
}

nlohmann::json MalthusOptions::to_json() const {
    nlohmann::json j = {{"tolerance", tolerance},
                        {"n", n},
                        {"n_max", n_max},
                        {"horizon", horizon},
                        {"horizon_max", horizon_max},
                        {"truncation_tolerance", truncation_tolerance},
                        {"z", z}};
    if (q_lo) j["q_lo"] = *q_lo;
    if (q_hi) j["q_hi"] = *q_hi;
    return j;
}

nlohmann::json MalthusEstimate::to_json() const {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : trace) {
        steps.push_back({{"q", s.q},
                         {"mean", s.mean},
                         {"stderr", s.se},
                         {"truncated_fraction", s.truncated_fraction},
                         {"n", s.n},
                         {"horizon", s.horizon},
                         {"verdict", s.verdict}});
    }
    return {{"lambda", lambda},
            {"stderr", se},
            {"ci", {ci_lower(), ci_upper()}},
            {"bracket", {bracket_lo, bracket_hi}},
            {"x0", x0},
            {"n", n},
            {"horizon", horizon},
            {"truncated_fraction", truncated_fraction},
            {"derivative", derivative},
            {"laplace_at_root", at_root.to_json()},
            {"budget_exhausted", budget_exhausted},
            {"trace", steps}};
}

namespace {

class MalthusSearch {
public:
    MalthusSearch(const ModelSpec& model, double x0, const MalthusOptions& options, const McContext& ctx)
        : model_(model), x0_(x0), opt_(options), ctx_(ctx), n_(options.n), horizon_(options.horizon) {
        resample();
    }

    int classify(double q) const {
        const LaplaceEstimate e = batch_.laplace(q);
        if (e.lower - opt_.z * e.se > 1.0) return +1;
        if (e.upper_available) return e.upper + opt_.z * e.se < 1.0 ? -1 : 0;
        if (e.truncated_fraction <= opt_.truncation_tolerance && e.mean + opt_.z * e.se < 1.0) return -1;
        return 0;
    }

    /// Escalates the budget until q can be classified or the budget is spent.
    int decide(double q) {
        for (;;) {
            const int verdict = classify(q);
            const bool truncation_bound = batch_.truncated_fraction() > opt_.truncation_tolerance;
            if (verdict == 0 && truncation_bound && horizon_ < opt_.horizon_max) {
                horizon_ = std::min(opt_.horizon_max, horizon_ * 4.0);
            } else if (verdict == 0 && n_ < opt_.n_max) {
                n_ = std::min(opt_.n_max, n_ * 2);
            } else {
                record(q, verdict);
                return verdict;
            }
            resample();
        }
    }

    const HittingBatch& batch() const { return batch_; }
    std::size_t n() const { return n_; }
    double horizon() const { return horizon_; }
    std::vector<BisectionStep> trace;

private:
    void resample() { batch_ = sample_hitting_batch(model_, x0_, x0_, horizon_, n_, ctx_, StreamTag::malthus); }

    void record(double q, int verdict) {
        const LaplaceEstimate e = batch_.laplace(q);
        trace.push_back({q, e.mean, e.se, e.truncated_fraction, n_, horizon_, verdict});
    }

    const ModelSpec& model_;
    double x0_;
    MalthusOptions opt_;
    McContext ctx_;
    std::size_t n_;
    double horizon_;
    HittingBatch batch_;
};

}  // namespace

MalthusEstimate malthus_exponent(const ModelSpec& model, double x0, const MalthusOptions& options,
                                 const McContext& ctx) {
    if (!(x0 > 0.0)) throw DomainError("malthus_exponent: x0 must be positive");
    if (!(options.tolerance > 0.0) || options.n < 2 || !(options.horizon > 0.0)) {
        throw DomainError("malthus_exponent: tolerance, n and horizon must be positive");
    }
    MalthusSearch search(model, x0, options, ctx);
    const double gamma = model.gamma();

    double hi = options.q_hi.value_or(gamma);
    double lo = 0.0;
    bool exhausted = false;
    if (options.q_lo) {
        lo = *options.q_lo;
        if (search.decide(lo) != +1) {
            throw NoRootError(fmt::format("malthus_exponent: L_{{x0,x0}}({}) > 1 could not be established", lo));
        }
    } else {
        double step = options.tolerance;
        bool found = false;
        for (std::size_t k = 0; k < options.max_bracket_steps; ++k, step *= 2.0) {
            const double q = hi - step;
            const int verdict = search.decide(q);
            if (verdict == +1) {
                lo = q;
                found = true;
                break;
            }
            if (verdict == -1) hi = q;
        }
        if (!found) {
            const LaplaceEstimate e = search.batch().laplace(hi - step / 2.0);
            throw NoRootError(fmt::format(
                "malthus_exponent: L_{{x0,x0}}(q) never exceeded 1 down to q = {:.6g} (mean {:.6g}, stderr {:.3g}, "
                "truncated fraction {:.3g}, horizon {})",
                hi - step / 2.0, e.mean, e.se, e.truncated_fraction, e.horizon));
        }
    }

    while (hi - lo > options.tolerance) {
        const double mid = 0.5 * (lo + hi);
        const int verdict = search.decide(mid);
        if (verdict == +1) {
            lo = mid;
        } else if (verdict == -1) {
            hi = mid;
        } else {
            exhausted = true;
            break;
        }
    }

    // root of the (monotone) common-random-number estimate inside the bracket
    const HittingBatch& batch = search.batch();
    auto excess = [&](double q) { return batch.laplace(q).mean - 1.0; };
    double root;
    if (excess(hi) >= 0.0) {
        root = hi;
    } else if (excess(lo) <= 0.0) {
        root = lo;
    } else {
        double a = lo, b = hi;
        for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++i) {
            const double m = 0.5 * (a + b);
            (excess(m) > 0.0 ? a : b) = m;
        }
        root = 0.5 * (a + b);
    }

    MalthusEstimate out;
    out.lambda = root;
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    out.x0 = x0;
    out.n = search.n();
    out.horizon = search.horizon();
    out.truncated_fraction = batch.truncated_fraction();
    out.at_root = batch.laplace(root);
    out.derivative = batch.derivative(root).mean;
    out.se = out.derivative < 0.0 ? out.at_root.se / std::abs(out.derivative) : kNever;
    // a stalled bisection is still resolved when the root's own CI is tight
    out.budget_exhausted = exhausted && !(options.z * out.se <= options.tolerance);
    out.trace = std::move(search.trace);
    return out;
}

HarmonicEstimate::HarmonicEstimate(double x0, double lambda, std::vector<double> grid, std::vector<double> ell,
                                   std::vector<double> ell_se, std::vector<double> truncated)
    : x0_(x0),
      lambda_(lambda),
      grid_(std::move(grid)),
      ell_(std::move(ell)),
      ell_se_(std::move(ell_se)),
      truncated_(std::move(truncated)) {
    if (grid_.empty() || grid_.size() != ell_.size()) throw DomainError("HarmonicEstimate: grid/value mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (!(ell_[i] > 0.0) || !std::isfinite(ell_[i])) {
            throw InvalidHarmonic(fmt::format("estimated h is not positive at x = {} (l = {})", grid_[i], ell_[i]));
        }
        lx.push_back(std::log(grid_[i]));
        ly.push_back(std::log(ell_[i]));
    }
    if (grid_.size() == 1) {
        lx.push_back(lx[0] + 1.0);
        ly.push_back(ly[0]);
    }
    log_ell_ = MonotoneCubic(std::move(lx), std::move(ly));
}

double HarmonicEstimate::ell(double x) const { return std::exp(log_ell_(std::log(x))); }

double HarmonicEstimate::ell_min() const noexcept { return *std::min_element(ell_.begin(), ell_.end()); }
double HarmonicEstimate::ell_max() const noexcept { return *std::max_element(ell_.begin(), ell_.end()); }

nlohmann::json HarmonicEstimate::to_json() const {
    nlohmann::json h = nlohmann::json::array();
    for (std::size_t i = 0; i < grid_.size(); ++i) h.push_back(grid_[i] * ell_[i]);
    return {{"x0", x0_},      {"lambda", lambda_},         {"grid", grid_},          {"h", h},
            {"ell", ell_},    {"ell_stderr", ell_se_},    {"truncated_fraction", truncated_}};
}

HarmonicEstimate estimate_h(const ModelSpec& model, double lambda, double x0, std::span<const double> grid,
                            std::size_t n, double horizon, const McContext& ctx) {
    if (grid.empty()) throw DomainError("estimate_h: empty grid");
    std::vector<double> ell, se, truncated;
    for (double x : grid) {
        if (!(x > 0.0)) throw DomainError("estimate_h: grid masses must be positive");
        // shared stream tag and offsets: common random numbers across the grid
        const HittingBatch batch = sample_hitting_batch(model, x, x0, horizon, n, ctx, StreamTag::harmonic);
        const LaplaceEstimate e = batch.laplace(lambda);
        ell.push_back(e.mean);
        se.push_back(e.se);
        truncated.push_back(e.truncated_fraction);
    }
    return HarmonicEstimate(x0, lambda, {grid.begin(), grid.end()}, std::move(ell), std::move(se),
                            std::move(truncated));
}

std::vector<double> log_trapezoid_weights(std::span<const double> grid) {
    const std::size_t m = grid.size();
    std::vector<double> w(m, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double d = std::log(grid[i + 1] / grid[i]);
        w[i] += 0.5 * d;
        w[i + 1] += 0.5 * d;
    }
    return w;
}

double ProfileEstimate::pairing(const ScalarFn& f) const {
    const auto w = log_trapezoid_weights(grid);
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += nu[i] * f(grid[i]) * grid[i] * w[i];
    return s;
}

nlohmann::json ProfileEstimate::to_json() const {
    return {{"grid", grid},
            {"nu", nu},
            {"nu_stderr", nu_se},
            {"derivative", derivative},
            {"derivative_stderr", derivative_se},
            {"richardson_gap", richardson_gap},
            {"horizon", horizon},
            {"truncated_fraction", truncated_fraction},
            {"dq", dq},
            {"raw_mass", raw_mass}};
}

ProfileEstimate estimate_nu_fd(const ModelSpec& model, double lambda, const HarmonicEstimate& h,
                               std::span<const double> grid, std::size_t n, double horizon, double dq,
                               const McContext& ctx, double horizon_max, double truncation_tolerance) {
    if (!(dq > 0.0)) throw DomainError("estimate_nu_fd: dq must be positive");
    if (grid.size() < 2) throw DomainError("estimate_nu_fd: need at least two grid points");
    ProfileEstimate out;
    out.grid.assign(grid.begin(), grid.end());
    out.dq = dq;
    for (double y : grid) {
        // returns that outlive the horizon bias |L'| low, so lengthen it while truncation matters
        double t = horizon;
        HittingBatch batch = sample_hitting_batch(model, y, y, t, n, ctx, StreamTag::profile);
        while (batch.truncated_fraction() > truncation_tolerance && t < horizon_max) {
            t = std::min(horizon_max, 4.0 * t);
            batch = sample_hitting_batch(model, y, y, t, n, ctx, StreamTag::profile);
        }
        out.horizon.push_back(t);
        out.truncated_fraction.push_back(batch.truncated_fraction());
        const MeanStderr d = batch.central_difference(lambda, dq);
        const MeanStderr d_half = batch.central_difference(lambda, dq / 2.0);
        if (!(d.mean < 0.0) || -d.mean < 3.0 * d.se) {
            throw IllConditionedDerivative(fmt::format(
                "L'_{{y,y}}(lambda) at y = {} is not significantly negative (estimate {:.4g}, stderr {:.3g})", y,
                d.mean, d.se));
        }
        const double nu = 1.0 / (h(y) * model.growth()(y) * std::abs(d.mean));
        out.nu.push_back(nu);
        out.nu_se.push_back(nu * d.se / std::abs(d.mean));
        out.derivative.push_back(d.mean);
        out.derivative_se.push_back(d.se);
        out.richardson_gap.push_back(std::abs(d.mean - d_half.mean) / std::abs(d.mean));
    }
    const auto w = log_trapezoid_weights(grid);
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) mass += out.nu[i] * h(grid[i]) * grid[i] * w[i];
    out.raw_mass = mass;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.nu[i] /= mass;
        out.nu_se[i] /= mass;
    }
    return out;
}

std::vector<double> GridSpec::masses() const { return log_grid(min, max, points); }

nlohmann::json GridSpec::to_json() const { return {{"min", min}, {"max", max}, {"points", points}}; }

nlohmann::json SpectralOptions::to_json() const {
    return {{"x0", x0},       {"malthus", malthus.to_json()}, {"h_grid", h_grid.to_json()}, {"n_h", n_h},
            {"nu_grid", nu_grid.to_json()}, {"n_nu", n_nu},   {"dq", dq},                   {"profile", profile}};
}

nlohmann::json SpectralSolution::to_json() const {
    nlohmann::json j = {{"model", model},
                        {"seed", context.seed},
                        {"options", options.to_json()},
                        {"malthus", malthus.to_json()},
                        {"harmonic", harmonic.to_json()}};
    j["profile"] = profile ? profile->to_json() : nlohmann::json(nullptr);
    return j;
}

SpectralSolution solve_spectral(const ModelSpec& model, const SpectralOptions& options, const McContext& ctx) {
    SpectralSolution s;
    s.model = model.name();
    s.context = ctx;
    s.options = options;
    s.malthus = malthus_exponent(model, options.x0, options.malthus, ctx);
    const double horizon = s.malthus.horizon;
    const auto h_grid = options.h_grid.masses();
    s.harmonic = estimate_h(model, s.malthus.lambda, options.x0, h_grid, options.n_h, horizon, ctx);
    if (options.profile) {
        const double dq = options.dq > 0.0 ? options.dq : std::max(1e-3, options.malthus.tolerance);
        const auto nu_grid = options.nu_grid.masses();
        s.profile = estimate_nu_fd(model, s.malthus.lambda, s.harmonic, nu_grid, options.n_nu, horizon, dq, ctx,
                                   options.malthus.horizon_max, options.malthus.truncation_tolerance);
    }
    return s;
}

}  // namespace gfrag
