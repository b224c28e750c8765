#include "gfrag/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "gfrag/errors.hpp"
#include "gfrag/interp.hpp"

namespace gfrag {

namespace {

constexpr double kRelTol = 1e-9;

template <class F>
double integrate_log(F&& f, double a, double b) {
    double error = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-11, &error);
    return value;
}

}  // namespace

GrowthRate::GrowthRate(ScalarFn rate, std::optional<double> sup_ratio)
    : rate_(std::move(rate)), sup_ratio_(sup_ratio) {
    if (!rate_) throw DomainError("GrowthRate: rate function required");
}

GrowthRate& GrowthRate::with_primitive(ScalarFn primitive, ScalarFn inverse) {
    if (!primitive || !inverse) throw DomainError("GrowthRate: primitive and inverse must both be set");
    primitive_ = std::move(primitive);
    inverse_ = std::move(inverse);
    return *this;
}

FissionRate::FissionRate(ScalarFn rate, double bound) : rate_(std::move(rate)), bound_(bound) {
    if (!rate_) throw DomainError("FissionRate: rate function required");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw DomainError("FissionRate: bound must be finite and >= 0");
}

BinaryKernel BinaryKernel::half() {
    BinaryKernel k;
    k.kind_ = Kind::half;
    k.r_min_ = 0.5;
    return k;
}

BinaryKernel BinaryKernel::uniform(double r_min) {
    if (!(r_min >= 0.0 && r_min < 0.5)) throw DomainError("BinaryKernel::uniform: r_min must lie in [0, 1/2)");
    BinaryKernel k;
    k.kind_ = Kind::uniform;
    k.r_min_ = r_min;
    return k;
}

BinaryKernel BinaryKernel::atoms(std::vector<KernelAtom> atoms) {
    if (atoms.empty()) throw DomainError("BinaryKernel::atoms: at least one atom required");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.ratio > 0.0 && a.ratio <= 0.5)) throw DomainError("BinaryKernel::atoms: ratios must lie in (0, 1/2]");
        if (!(a.weight > 0.0)) throw DomainError("BinaryKernel::atoms: weights must be positive");
        total += a.weight;
    }
    BinaryKernel k;
    k.kind_ = Kind::atoms;
    k.r_min_ = std::min_element(atoms.begin(), atoms.end(), [](auto& a, auto& b) { return a.ratio < b.ratio; })->ratio;
    double running = 0.0;
    for (auto& a : atoms) {
        a.weight /= total;
        running += a.weight;
        k.cumulative_.push_back(running);
    }
    k.cumulative_.back() = 1.0;
    k.atoms_ = std::move(atoms);
    return k;
}

double BinaryKernel::sample(double, RandomStream& rng) const {
    switch (kind_) {
        case Kind::half:
            return 0.5;
        case Kind::uniform:
            return r_min_ + (0.5 - r_min_) * rng.uniform();
        case Kind::atoms: {
            const double u = rng.uniform();
            const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
            return atoms_[static_cast<std::size_t>(it - cumulative_.begin())].ratio;
        }
    }
    return 0.5;
}

double BinaryKernel::expect(double, const ScalarFn& g) const {
    switch (kind_) {
        case Kind::half:
            return g(0.5);
        case Kind::uniform: {
            double error = 0.0;
            const double integral = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
                [&](double r) { return g(r); }, r_min_, 0.5, 20, 1e-12, &error);
            return integral / (0.5 - r_min_);
        }
        case Kind::atoms: {
            double sum = 0.0;
            for (const auto& a : atoms_) sum += a.weight * g(a.ratio);
            return sum;
        }
    }
    return 0.0;
}

nlohmann::json BinaryKernel::to_json() const {
    switch (kind_) {
        case Kind::half:
            return {{"kind", "half"}};
        case Kind::uniform:
            return {{"kind", "uniform"}, {"r_min", r_min_}};
        case Kind::atoms: {
            nlohmann::json list = nlohmann::json::array();
            for (const auto& a : atoms_) list.push_back({a.ratio, a.weight});
            return {{"kind", "atoms"}, {"atoms", list}};
        }
    }
    return {};
}

std::vector<double> default_validation_grid() { return log_grid(1e-6, 1e6, 512); }

ModelSpec::ModelSpec(std::string name, GrowthRate growth, FissionRate fission, BinaryKernel kernel,
                     std::vector<double> validation_grid, nlohmann::json parameters)
    : name_(std::move(name)),
      growth_(std::move(growth)),
      fission_(std::move(fission)),
      kernel_(std::move(kernel)),
      grid_(std::move(validation_grid)),
      parameters_(std::move(parameters)) {
    if (grid_.empty()) throw DomainError("ModelSpec: validation grid must be non-empty");
    if (auto declared = growth_.declared_sup_ratio()) {
        gamma_ = *declared;
    } else {
        gamma_ = 0.0;
        for (double x : grid_) gamma_ = std::max(gamma_, growth_(x) / x);
    }
}

double flow(const ModelSpec& model, double x0, double t) {
    if (!(x0 > 0.0)) throw DomainError(fmt::format("flow: initial mass must be positive, got {}", x0));
    if (!(t >= 0.0)) throw DomainError(fmt::format("flow: duration must be non-negative, got {}", t));
    if (t == 0.0) return x0;
    const GrowthRate& c = model.growth();
    double x;
    if (c.has_primitive()) {
        x = c.primitive_inverse(c.primitive(x0) + t);
    } else {
        // integrate u = log x, du/dt = c(e^u)/e^u, which is bounded by gamma
        namespace odeint = boost::numeric::odeint;
        using Stepper = odeint::runge_kutta_dopri5<double, double, double, double, odeint::vector_space_algebra>;
        double u = std::log(x0);
        auto rhs = [&](const double& state, double& dudt, double) {
            const double m = std::exp(state);
            dudt = c(m) / m;
        };
        const double dt0 = std::min(t, 0.1 / std::max(model.gamma(), 1e-3));
        odeint::integrate_adaptive(odeint::make_controlled<Stepper>(1e-12, kRelTol), rhs, u, 0.0, t, dt0);
        x = std::exp(u);
    }
    if (!std::isfinite(x) || !(x > 0.0)) {
        throw IntegrationError(fmt::format("flow: non-finite mass from x0={} over t={}", x0, t));
    }
    return x;
}

double flow_time(const ModelSpec& model, double x, double y) {
    if (!(x > 0.0)) throw DomainError(fmt::format("flow_time: masses must be positive, got x={}", x));
    if (x > y) throw DomainError(fmt::format("flow_time: flow is increasing, cannot go from {} down to {}", x, y));
    if (x == y) return 0.0;
    const GrowthRate& c = model.growth();
    double s;
    if (c.has_primitive()) {
        s = c.primitive(y) - c.primitive(x);
    } else {
        s = integrate_log([&](double u) { const double m = std::exp(u); return m / c(m); }, std::log(x), std::log(y));
    }
    if (!std::isfinite(s) || s < 0.0) {
        throw IntegrationError(fmt::format("flow_time: non-finite result on [{}, {}]", x, y));
    }
    return s;
}

double survival_probability(const ModelSpec& model, double x0, double t) {
    const double xt = flow(model, x0, t);
    if (xt == x0) return 1.0;
    const GrowthRate& c = model.growth();
    const FissionRate& b = model.fission();
    const double hazard = integrate_log(
        [&](double u) {
            const double m = std::exp(u);
            return b(m) * m / c(m);
        },
        std::log(x0), std::log(xt));
    if (!std::isfinite(hazard)) throw IntegrationError("survival_probability: non-finite hazard");
    return std::exp(-std::max(hazard, 0.0));
}

bool ValidationReport::ok() const {
    return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.passed; });
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json out;
    out["gamma_estimate"] = gamma_estimate;
    out["fission_sup"] = fission_sup;
    out["ok"] = ok();
    for (const auto& i : items) out["items"].push_back({{"name", i.name}, {"passed", i.passed}, {"detail", i.detail}});
    return out;
}

ValidationReport validate(const ModelSpec& model) {
    ValidationReport report;
    const auto& grid = model.validation_grid();
    const auto& c = model.growth();
    const auto& b = model.fission();

    bool positive = true;
    std::size_t argmax = 0;
    std::vector<double> ratio(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = c(grid[i]);
        if (!(v > 0.0) || !std::isfinite(v)) positive = false;
        ratio[i] = v / grid[i];
        if (ratio[i] > ratio[argmax]) argmax = i;
    }
    report.gamma_estimate = ratio[argmax];
    report.items.push_back({"growth_positive", positive, positive ? "c(x) > 0 on grid" : "c(x) <= 0 or non-finite somewhere on grid"});

    // c/x still climbing at a grid edge means the sup is not attained on (0, inf)
    bool bounded = std::isfinite(report.gamma_estimate);
    std::string why = fmt::format("sup c/x on grid = {:.6g}", report.gamma_estimate);
    if (bounded && grid.size() > 1) {
        const double decade = std::log(10.0);
        const double step = std::log(grid[1] / grid[0]);
        const std::size_t k = std::min<std::size_t>(grid.size() - 1, std::max<std::size_t>(1, static_cast<std::size_t>(std::round(decade / step))));
        const std::size_t last = grid.size() - 1;
        if (argmax == 0 && ratio[0] > 1.01 * ratio[k]) {
            bounded = false;
            why += "; c/x still increasing toward the lower grid edge";
        }
        if (argmax == last && ratio[last] > 1.01 * ratio[last - k]) {
            bounded = false;
            why += "; c/x still increasing toward the upper grid edge";
        }
    }
    report.items.push_back({"growth_ratio_bounded", bounded, why});

    if (auto declared = c.declared_sup_ratio()) {
        const bool consistent = report.gamma_estimate <= *declared * (1.0 + 1e-9);
        report.items.push_back({"declared_gamma", consistent,
                                fmt::format("declared {:.6g}, grid {:.6g}", *declared, report.gamma_estimate)});
    }

    bool fission_ok = true;
    for (double x : grid) {
        const double v = b(x);
        report.fission_sup = std::max(report.fission_sup, v);
        if (!(v >= 0.0) || v > b.bound() * (1.0 + 1e-12)) fission_ok = false;
    }
    report.items.push_back({"fission_bounded", fission_ok,
                            fmt::format("sup B on grid = {:.6g}, declared bound {:.6g}", report.fission_sup, b.bound())});

    bool kernel_ok = true;
    RandomStream rng(0, StreamTag::validation, 0);
    for (int i = 0; i < 1000 && kernel_ok; ++i) {
        const double x = grid[static_cast<std::size_t>(i) % grid.size()];
        const double r = model.kernel().sample(x, rng);
        if (!(r > 0.0 && r <= 0.5)) kernel_ok = false;
        if (std::abs((1.0 - r) * x + r * x - x) > 1e-12 * x) kernel_ok = false;
    }
    report.items.push_back({"kernel_support", kernel_ok, "sampled ratios in (0, 1/2], partitions sum to 1"});
    return report;
}

}  // namespace gfrag
