#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfrag/interp.hpp"
#include "gfrag/model.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/rng.hpp"
#include "gfrag/stats.hpp"

namespace gfrag {

/// Seed and worker budget shared by every Monte Carlo job.
struct McContext {
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct LaplaceEstimate {
    double q = 0.0;
    double x = 0.0;
    double y = 0.0;
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    double horizon = 0.0;
    double truncated_fraction = 0.0;
    /// Bounds on L including the unobserved contribution of truncated paths.
    /// Truncated paths contribute at least 0 and, when q > gamma, at most
    /// e^{-(q - gamma) horizon} each; otherwise no upper bound is known.
    double lower = 0.0;
    double upper = 0.0;
    bool upper_available = false;

    nlohmann::json to_json() const;
};

/// Hitting samples for one (x, y) pair. The path does not depend on q, so
/// the same batch serves every q with exact common random numbers.
class HittingBatch {
public:
    HittingBatch() = default;
    HittingBatch(double x, double y, double horizon, double gamma, std::vector<HittingSample> samples);

    LaplaceEstimate laplace(double q) const;
    /// Pathwise derivative dL/dq = -E[H e^{-qH} E_H; H < inf].
    MeanStderr derivative(double q) const;
    /// Central difference (L(q + dq) - L(q - dq)) / (2 dq) evaluated sample by sample.
    MeanStderr central_difference(double q, double dq) const;

    double x() const noexcept { return x_; }
    double y() const noexcept { return y_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double truncated_fraction() const noexcept;
    std::span<const HittingSample> samples() const noexcept { return samples_; }

private:
    double x_ = 0.0;
    double y_ = 0.0;
    double horizon_ = 0.0;
    double gamma_ = 0.0;
    std::size_t truncated_ = 0;
    std::vector<HittingSample> samples_;
};

/// n hitting samples of y from x; replicate i draws from stream
/// (seed, tag, offset + i), so batches sharing a tag share paths.
HittingBatch sample_hitting_batch(const ModelSpec& model, double x, double y, double horizon, std::size_t n,
                                  const McContext& ctx, StreamTag tag = StreamTag::hitting,
                                  std::uint64_t offset = 0);

LaplaceEstimate estimate_laplace(const ModelSpec& model, double x, double y, double q, std::size_t n,
                                 double horizon, const McContext& ctx);

struct MalthusOptions {
    double tolerance = 1e-3;
    std::size_t n = 100'000;
    std::size_t n_max = 1'600'000;
    double horizon = 64.0;
    double horizon_max = 4096.0;
    /// Below gamma no upper envelope exists; a "L < 1" decision then also
    /// requires the truncated fraction to be at most this.
    double truncation_tolerance = 1e-3;
    double z = 3.0;
    std::optional<double> q_lo;
    std::optional<double> q_hi;
    std::size_t max_bracket_steps = 48;

    nlohmann::json to_json() const;
};

struct BisectionStep {
    double q;
    double mean;
    double se;
    double truncated_fraction;
    std::size_t n;
    double horizon;
    int verdict;  // +1: L > 1, -1: L < 1, 0: undecided at full budget
};

struct MalthusEstimate {
    double lambda = 0.0;
    double se = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double x0 = 0.0;
    std::size_t n = 0;
    double horizon = 0.0;
    double truncated_fraction = 0.0;
    double derivative = 0.0;
    LaplaceEstimate at_root;
    bool budget_exhausted = false;
    std::vector<BisectionStep> trace;

    double ci_lower(double z = 3.0) const { return lambda - z * se; }
    double ci_upper(double z = 3.0) const { return lambda + z * se; }
    nlohmann::json to_json() const;
};

/// Malthus exponent lambda = inf{q : L_{x0,x0}(q) < 1} by CI-aware bisection.
///
/// lambda <= gamma always holds (the integrand is below e^{-(q-gamma)H} < 1
/// for q > gamma), so the bracket starts at gamma and steps down with
/// doubling until L > 1 is established. Each decision requires the z-stderr
/// band to exclude 1; otherwise the horizon (if truncation is the issue) or
/// n is increased. The returned lambda is the root of the common-random-
/// number estimate inside the final bracket.
MalthusEstimate malthus_exponent(const ModelSpec& model, double x0, const MalthusOptions& options,
                                 const McContext& ctx);

/// h(x) = x L_{x,x0}(lambda) on a grid, with a positivity-preserving
/// interpolant of l = h/x in log-log coordinates (constant beyond the grid).
class HarmonicEstimate {
public:
    HarmonicEstimate() = default;
    HarmonicEstimate(double x0, double lambda, std::vector<double> grid, std::vector<double> ell,
                     std::vector<double> ell_se, std::vector<double> truncated);

    double operator()(double x) const { return x * ell(x); }
    double ell(double x) const;

    double x0() const noexcept { return x0_; }
    double lambda() const noexcept { return lambda_; }
    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& ell_values() const noexcept { return ell_; }
    const std::vector<double>& ell_se() const noexcept { return ell_se_; }
    const std::vector<double>& truncated() const noexcept { return truncated_; }
    double ell_min() const noexcept;
    double ell_max() const noexcept;

    nlohmann::json to_json() const;

private:
    double x0_ = 1.0;
    double lambda_ = 0.0;
    std::vector<double> grid_;
    std::vector<double> ell_;
    std::vector<double> ell_se_;
    std::vector<double> truncated_;
    MonotoneCubic log_ell_;
};

HarmonicEstimate estimate_h(const ModelSpec& model, double lambda, double x0, std::span<const double> grid,
                            std::size_t n, double horizon, const McContext& ctx);

/// Log-trapezoid weights w_i with sum_i g(y_i) y_i w_i approximating the
/// integral of g over the grid span.
std::vector<double> log_trapezoid_weights(std::span<const double> grid);

struct ProfileEstimate {
    std::vector<double> grid;
    std::vector<double> nu;
    std::vector<double> nu_se;
    std::vector<double> derivative;
    std::vector<double> derivative_se;
    /// |D(dq) - D(dq/2)| / |D(dq)|, the Richardson consistency gap
    std::vector<double> richardson_gap;
    /// hitting horizon used at each grid point and the fraction still truncated
    std::vector<double> horizon;
    std::vector<double> truncated_fraction;
    double dq = 0.0;
    /// <nu, h> before normalization
    double raw_mass = 0.0;

    double pairing(const ScalarFn& f) const;
    nlohmann::json to_json() const;
};

/// nu(dy) = dy / (h(y) c(y) |L'_{y,y}(lambda)|) with the derivative taken by
/// central differences on common random numbers, normalized to <nu, h> = 1.
/// The horizon grows fourfold per point, up to horizon_max, while the
/// truncated fraction exceeds truncation_tolerance.
ProfileEstimate estimate_nu_fd(const ModelSpec& model, double lambda, const HarmonicEstimate& h,
                               std::span<const double> grid, std::size_t n, double horizon, double dq,
                               const McContext& ctx, double horizon_max = 0.0, double truncation_tolerance = 1e-3);

struct GridSpec {
    double min = 0.01;
    double max = 100.0;
    std::size_t points = 33;

    std::vector<double> masses() const;
    nlohmann::json to_json() const;
};

struct SpectralOptions {
    double x0 = 1.0;
    MalthusOptions malthus;
    GridSpec h_grid{0.01, 100.0, 41};
    std::size_t n_h = 20'000;
    GridSpec nu_grid{0.3, 4.5, 21};
    std::size_t n_nu = 50'000;
    /// 0 selects max(1e-3, malthus.tolerance)
    double dq = 0.0;
    bool profile = true;

    nlohmann::json to_json() const;
};

struct SpectralSolution {
    std::string model;
    McContext context;
    SpectralOptions options;
    MalthusEstimate malthus;
    HarmonicEstimate harmonic;
    std::optional<ProfileEstimate> profile;

    nlohmann::json to_json() const;
};

SpectralSolution solve_spectral(const ModelSpec& model, const SpectralOptions& options, const McContext& ctx);

}  // namespace gfrag
