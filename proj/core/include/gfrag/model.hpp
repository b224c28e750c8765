#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfrag/rng.hpp"

namespace gfrag {

using ScalarFn = std::function<double(double)>;

/// Growth field c of the mass flow dx/dt = c(x).
///
/// When a primitive F of 1/c is supplied together with its inverse, the
/// flow is evaluated exactly as F^{-1}(F(x) + t); otherwise the flow
/// falls back to adaptive Runge-Kutta and flow times to adaptive quadrature.
class GrowthRate {
public:
    explicit GrowthRate(ScalarFn rate, std::optional<double> sup_ratio = std::nullopt);

    GrowthRate& with_primitive(ScalarFn primitive, ScalarFn inverse);

    double operator()(double x) const { return rate_(x); }
    bool has_primitive() const noexcept { return static_cast<bool>(primitive_); }
    double primitive(double x) const { return primitive_(x); }
    double primitive_inverse(double u) const { return inverse_(u); }
    /// sup c(x)/x when known in closed form.
    std::optional<double> declared_sup_ratio() const noexcept { return sup_ratio_; }

private:
    ScalarFn rate_;
    ScalarFn primitive_;
    ScalarFn inverse_;
    std::optional<double> sup_ratio_;
};

/// Fission rate B with a declared upper bound, used as the thinning rate.
class FissionRate {
public:
    FissionRate(ScalarFn rate, double bound);

    double operator()(double x) const { return rate_(x); }
    double bound() const noexcept { return bound_; }

private:
    ScalarFn rate_;
    double bound_;
};

struct KernelAtom {
    double ratio;
    double weight;
};

/// Binary fragmentation kernel: a fission at mass x produces daughters
/// (1-r)x and rx with r drawn from a law on (0, 1/2].
class BinaryKernel {
public:
    enum class Kind { half, uniform, atoms };

    static BinaryKernel half();
    /// r uniform on [r_min, 1/2]; r_min = 0 gives the open interval (0, 1/2].
    static BinaryKernel uniform(double r_min = 0.0);
    static BinaryKernel atoms(std::vector<KernelAtom> atoms);

    double sample(double mass, RandomStream& rng) const;
    /// Integral of g(r) against the kernel at mass x.
    double expect(double mass, const ScalarFn& g) const;

    Kind kind() const noexcept { return kind_; }
    double r_min() const noexcept { return r_min_; }
    const std::vector<KernelAtom>& atom_list() const noexcept { return atoms_; }
    nlohmann::json to_json() const;

private:
    BinaryKernel() = default;

    Kind kind_ = Kind::half;
    double r_min_ = 0.5;
    std::vector<KernelAtom> atoms_;
    std::vector<double> cumulative_;
};

/// 512 log-spaced masses on [1e-6, 1e6].
std::vector<double> default_validation_grid();

/// The triple (c, B, rho) of a binary growth-fragmentation model.
/// Immutable after construction; safe to share across worker threads.
class ModelSpec {
public:
    ModelSpec(std::string name, GrowthRate growth, FissionRate fission, BinaryKernel kernel,
              std::vector<double> validation_grid = default_validation_grid(),
              nlohmann::json parameters = nlohmann::json::object());

    const std::string& name() const noexcept { return name_; }
    const GrowthRate& growth() const noexcept { return growth_; }
    const FissionRate& fission() const noexcept { return fission_; }
    const BinaryKernel& kernel() const noexcept { return kernel_; }
    const std::vector<double>& validation_grid() const noexcept { return grid_; }
    const nlohmann::json& parameters() const noexcept { return parameters_; }

    double growth_ratio(double x) const { return growth_(x) / x; }
    /// gamma = sup c(x)/x: the closed form when declared, else the grid maximum.
    double gamma() const noexcept { return gamma_; }

private:
    std::string name_;
    GrowthRate growth_;
    FissionRate fission_;
    BinaryKernel kernel_;
    std::vector<double> grid_;
    nlohmann::json parameters_;
    double gamma_;
};

/// Mass at time t of a cell of initial mass x0 that has not divided.
double flow(const ModelSpec& model, double x0, double t);

/// Time for the flow to rise from x to y, i.e. the integral of 1/c over [x, y].
double flow_time(const ModelSpec& model, double x, double y);

/// Probability that a cell of initial mass x0 has not divided by time t.
double survival_probability(const ModelSpec& model, double x0, double t);

struct ValidationItem {
    std::string name;
    bool passed;
    std::string detail;
};

struct ValidationReport {
    double gamma_estimate = 0.0;
    double fission_sup = 0.0;
    std::vector<ValidationItem> items;

    bool ok() const;
    nlohmann::json to_json() const;
};

/// Checks the standing assumptions on the validation grid. Never throws on
/// a violated assumption; failures are reported as items.
ValidationReport validate(const ModelSpec& model);

}  // namespace gfrag
