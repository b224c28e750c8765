#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "gfrag/model.hpp"
#include "gfrag/report.hpp"
#include "gfrag/rng.hpp"
#include "gfrag/spectral.hpp"

namespace gfrag {

/// The h-tilted tagged cell. Fissions occur at rate B~ = w B / h with
/// w(x) = E[h((1-r)x) + h(rx)]; the ratio law is reweighted by
/// (h((1-r)x) + h(rx)) / w(x) and the spine follows rx with probability
/// h(rx) / (h(rx) + h((1-r)x)).
class SpineModel {
public:
    SpineModel(ModelSpec base, HarmonicEstimate h);

    const ModelSpec& base() const noexcept { return base_; }
    const HarmonicEstimate& harmonic() const noexcept { return h_; }

    double h(double x) const { return h_(x); }
    double w(double x) const;
    double tilted_rate(double x) const;
    /// Thinning bound valid from `mass` upward: dominates B(y)(h(ry) + h((1-r)y))/h(y)
    /// for every y >= mass and every r, so it stays valid along the increasing flow.
    double rate_bound(double mass) const;
    /// Largest value of the bound over the operational range.
    double rate_bound() const noexcept { return bound_; }
    /// Probability of following the smaller daughter rx at a fission with ratio r.
    double pick_small(double x, double r) const;

    /// Operational mass range: the h grid extended one decade each way.
    double range_lo() const noexcept { return range_lo_; }
    double range_hi() const noexcept { return range_hi_; }

    /// Thinning step used by the walker: a proposal made at rate `bound`
    /// draws r from the kernel and is accepted with probability
    /// B(x)(h(rx) + h((1-r)x)) / (h(x) bound).
    bool try_jump(double mass, double bound, RandomStream& rng, double& ratio) const;

    nlohmann::json to_json() const;

private:
    ModelSpec base_;
    HarmonicEstimate h_;
    double bound_ = 0.0;
    std::vector<double> bound_cells_;  // log-spaced cell edges over the operational range
    std::vector<double> bound_suffix_;  // sup of the per-cell bound over this and all higher cells
    double range_lo_ = 0.0;
    double range_hi_ = 0.0;
};

/// Throws InvalidHarmonic when h is not strictly positive on its grid.
SpineModel build_spine_model(const ModelSpec& model, const HarmonicEstimate& h);
SpineModel build_spine_model(const ModelSpec& model, const SpectralSolution& solution);

/// Histogram over log-mass bins centred on the grid points.
struct Occupation {
    std::vector<double> centers;
    std::vector<double> edges;  // size centers + 1
    std::vector<double> time;   // time spent per bin
    std::vector<std::uint64_t> jumps;  // accepted jumps by pre-jump bin
    double outside = 0.0;              // time outside all bins
    double total = 0.0;

    explicit Occupation(std::vector<double> grid = {});
    std::size_t bin_of(double mass) const;  // centers.size() when outside
    void merge(const Occupation& other);
    std::vector<double> fractions() const;
};

struct SpineRunOptions {
    double horizon = 20'000.0;
    double burn_in_fraction = 0.2;
    std::size_t replicates = 16;
    /// L1 distance between the normalized half-run histograms above which
    /// a mixing warning is raised
    double mixing_tolerance = 0.05;

    nlohmann::json to_json() const;
};

struct SpineRun {
    Occupation occupation;
    Occupation first_half;
    Occupation second_half;
    std::vector<Occupation> per_replicate;
    /// intervals between successive upcrossings of the reference mass
    std::vector<double> return_times;
    std::size_t escapes = 0;
    std::size_t replicates = 0;
    double max_mass = 0.0;
    double half_run_l1 = 0.0;
    bool mixing_warning = false;

    nlohmann::json summary() const;
};

/// Replicate-parallel spine runs from x0. Occupation is recorded after the
/// burn-in; replicates that leave the operational range are excluded and
/// counted in `escapes`.
SpineRun simulate_spine(const SpineModel& spine, double x0, std::span<const double> grid,
                        const SpineRunOptions& options, const McContext& ctx);

/// Spine masses at the sorted times; NaN from the first escape onwards.
std::vector<double> spine_at_times(const SpineModel& spine, double x0, std::span<const double> times,
                                   RandomStream& rng);

struct SpineProfile {
    ProfileEstimate profile;
    SpineRun run;
};

/// nu = pi / h from the spine occupation, normalized to <nu, h> = 1 with the
/// same log-trapezoid rule as estimate_nu_fd.
SpineProfile estimate_nu_spine(const SpineModel& spine, double x0, std::span<const double> grid,
                               const SpineRunOptions& options, const McContext& ctx);

struct ConditionOptions {
    double near_zero_lo = 1e-8;
    double near_zero_hi = 1e-6;
    double near_inf_lo = 1e6;
    double near_inf_hi = 1e8;
    std::size_t points = 33;
};

/// Boundary growth condition limsup c(x)/x < lambda at 0+ and at infinity,
/// with the limsups replaced by maxima over the extreme grid decades.
/// pass: both surrogates below the lower CI end of lambda; fail: either at
/// or above lambda; inconclusive otherwise.
CheckReport check_condition_main(const ModelSpec& model, const MalthusEstimate& lambda,
                                 const ConditionOptions& options = {});

}  // namespace gfrag
