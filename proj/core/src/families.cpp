#include "gfrag/families.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "gfrag/errors.hpp"
#include "gfrag/interp.hpp"

namespace gfrag {

namespace {

void require_positive(double v, const std::string& where) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(where, fmt::format("must be a positive finite number, got {}", v));
}

// solves s + e^s = k for s; g(s) = s + e^s - k is convex increasing and the
// start point has g >= 0, so Newton decreases monotonically to the root
double solve_log_plus_linear(double k) {
    double s = k < 1.0 ? k : std::log(k);
    for (int i = 0; i < 100; ++i) {
        const double es = std::exp(s);
        const double step = (s + es - k) / (1.0 + es);
        s -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s))) break;
    }
    return std::exp(s);
}

}  // namespace

GrowthRate linear_growth(double a) {
    require_positive(a, "a");
    GrowthRate g([a](double x) { return a * x; }, a);
    g.with_primitive([a](double x) { return std::log(x) / a; }, [a](double u) { return std::exp(a * u); });
    return g;
}

GrowthRate saturating_growth(double a) {
    require_positive(a, "a");
    GrowthRate g([a](double x) { return a * x / (1.0 + x); }, a);
    g.with_primitive([a](double x) { return (std::log(x) + x) / a; },
                     [a](double u) { return solve_log_plus_linear(a * u); });
    return g;
}

GrowthRate hump_growth(double a) {
    require_positive(a, "a");
    GrowthRate g([a](double x) { return a * x * x / (1.0 + x * x); }, a / 2.0);
    g.with_primitive([a](double x) { return (x - 1.0 / x) / a; },
                     [a](double u) {
                         const double k = a * u;
                         const double root = std::sqrt(k * k + 4.0);
                         return k >= 0.0 ? 0.5 * (k + root) : 2.0 / (root - k);
                     });
    return g;
}

FissionRate constant_fission(double b) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("b", "fission rate must be finite and >= 0");
    return FissionRate([b](double) { return b; }, b);
}

FissionRate saturating_fission(double b) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("b", "fission rate must be finite and >= 0");
    return FissionRate([b](double x) { return b * x / (1.0 + x); }, b);
}

FissionRate zero_fission() {
    return FissionRate([](double) { return 0.0; }, 0.0);
}

nlohmann::json FamilyInfo::defaults() const {
    nlohmann::json out = {{"family", name}};
    for (const auto& p : parameters) out[p.key] = p.default_value;
    return out;
}

const std::vector<FamilyInfo>& model_registry() {
    static const std::vector<FamilyInfo> registry = {
        {"linear", "c(x) = a x",
         "Uniform relative growth. Total mass grows exactly like x0 e^{a t}, lambda = a and h(x) = x.",
         "c(x)/x = a at both ends equals lambda, so the strict boundary condition fails; the intrinsic "
         "martingale is constant.",
         {{"a", "growth rate", 0.7},
          {"fission", "fission rate shape: const | saturating | zero", "const"},
          {"b", "fission rate scale", 1.4},
          {"kernel", "fragmentation ratio law: half | uniform | atoms", "uniform"},
          {"r_min", "lower end of the uniform ratio law", 0.0}}},
        {"saturating", "c(x) = a x / (1 + x)",
         "Growth velocity saturates at a for large cells.",
         "c(x)/x -> a as x -> 0 and lambda <= sup c/x = a, so the condition at 0+ fails; useful for "
         "many-to-one and hitting checks, not for the martingale checks.",
         {{"a", "growth scale", 1.0},
          {"fission", "fission rate shape: const | saturating | zero", "const"},
          {"b", "fission rate scale", 1.0},
          {"kernel", "fragmentation ratio law: half | uniform | atoms", "uniform"},
          {"r_min", "lower end of the uniform ratio law", 0.0}}},
        {"hump", "c(x) = a x^2 / (1 + x^2), so c(x)/x = a x / (1 + x^2)",
         "Relative growth peaks at x = 1 (value a/2) and vanishes at both ends. Default model of the "
         "acceptance suite.",
         "c(x)/x -> 0 at both ends, so the condition reduces to lambda > 0, which the criterion checker "
         "certifies for the defaults.",
         {{"a", "growth scale", 3.0},
          {"fission", "fission rate shape: const | saturating | zero", "saturating"},
          {"b", "fission rate scale", 3.0},
          {"kernel", "fragmentation ratio law: half | uniform | atoms", "uniform"},
          {"r_min", "lower end of the uniform ratio law", 0.1}}},
    };
    return registry;
}

namespace {

double number_at(const nlohmann::json& section, const std::string& key, const std::string& path) {
    const auto& v = section.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

std::vector<double> number_list(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(where, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<double> log_knots(const std::vector<double>& mass, const std::string& where) {
    std::vector<double> out;
    for (double m : mass) {
        if (!(m > 0.0)) throw ConfigError(where, "tabulated masses must be positive");
        out.push_back(std::log(m));
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i] > out[i - 1])) throw ConfigError(where, "tabulated masses must be strictly increasing");
    }
    return out;
}

GrowthRate tabulated_growth(const nlohmann::json& section, const std::string& path) {
    if (!section.contains("mass") || !section.contains("growth")) {
        throw ConfigError(path, "tabulated family needs `mass` and `growth` arrays");
    }
    const auto mass = number_list(section.at("mass"), path + ".mass");
    const auto values = number_list(section.at("growth"), path + ".growth");
    if (mass.size() != values.size() || mass.size() < 2) throw ConfigError(path + ".growth", "must match `mass` in length (>= 2)");
    std::vector<double> log_ratio;
    double sup = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (!(values[i] > 0.0)) throw ConfigError(path + ".growth", "growth values must be positive");
        log_ratio.push_back(std::log(values[i] / mass[i]));
        sup = std::max(sup, values[i] / mass[i]);
    }
    // interpolating log(c/x) keeps c/x within the table range, including beyond its ends
    MonotoneCubic interp(log_knots(mass, path + ".mass"), std::move(log_ratio));
    return GrowthRate([interp](double x) { return x * std::exp(interp(std::log(x))); }, sup);
}

FissionRate fission_from(const nlohmann::json& section, const std::string& path) {
    const auto& spec = section.at("fission");
    const double b = section.contains("b") ? number_at(section, "b", path) : 1.0;
    if (spec.is_string()) {
        const auto kind = spec.get<std::string>();
        if (kind == "const") return constant_fission(b);
        if (kind == "saturating") return saturating_fission(b);
        if (kind == "zero") return zero_fission();
        throw ConfigError(path + ".fission", fmt::format("unknown fission shape `{}`", kind));
    }
    if (spec.is_object() && spec.value("kind", "") == "tabulated") {
        if (!section.contains("mass")) throw ConfigError(path + ".mass", "tabulated fission needs the `mass` array");
        const auto mass = number_list(section.at("mass"), path + ".mass");
        const auto values = number_list(spec.at("values"), path + ".fission.values");
        if (values.size() != mass.size()) throw ConfigError(path + ".fission.values", "must match `mass` in length");
        double bound = 0.0;
        for (double v : values) {
            if (!(v >= 0.0)) throw ConfigError(path + ".fission.values", "fission rates must be >= 0");
            bound = std::max(bound, v);
        }
        MonotoneCubic interp(log_knots(mass, path + ".mass"), values);
        return FissionRate([interp](double x) { return std::max(0.0, interp(std::log(x))); }, bound);
    }
    throw ConfigError(path + ".fission", "expected a shape name or {\"kind\": \"tabulated\", \"values\": [...]}");
}

BinaryKernel kernel_from(const nlohmann::json& section, const std::string& path) {
    const auto& spec = section.at("kernel");
    if (!spec.is_string()) throw ConfigError(path + ".kernel", "expected half | uniform | atoms");
    const auto kind = spec.get<std::string>();
    try {
        if (kind == "half") return BinaryKernel::half();
        if (kind == "uniform") return BinaryKernel::uniform(section.contains("r_min") ? number_at(section, "r_min", path) : 0.0);
        if (kind == "atoms") {
            if (!section.contains("atoms") || !section.at("atoms").is_array()) {
                throw ConfigError(path + ".atoms", "atoms kernel needs a list of [ratio, weight] pairs");
            }
            std::vector<KernelAtom> atoms;
            for (const auto& a : section.at("atoms")) {
                auto pair = number_list(a, path + ".atoms");
                if (pair.size() != 2) throw ConfigError(path + ".atoms", "each atom is [ratio, weight]");
                atoms.push_back({pair[0], pair[1]});
            }
            return BinaryKernel::atoms(std::move(atoms));
        }
    } catch (const DomainError& e) {
        throw ConfigError(path + ".kernel", e.what());
    }
    throw ConfigError(path + ".kernel", fmt::format("unknown kernel `{}`", kind));
}

std::vector<double> grid_from(const nlohmann::json& section, const std::string& path) {
    if (!section.contains("validation_grid")) return default_validation_grid();
    const auto& g = section.at("validation_grid");
    const std::string where = path + ".validation_grid";
    if (!g.is_object()) throw ConfigError(where, "expected {min, max, points}");
    try {
        return log_grid(g.value("min", 1e-6), g.value("max", 1e6), g.value("points", std::size_t{512}));
    } catch (const DomainError& e) {
        throw ConfigError(where, e.what());
    }
}

}  // namespace

ModelSpec make_model(const nlohmann::json& raw, const std::string& path) {
    if (!raw.is_object()) throw ConfigError(path, "model section must be an object");
    if (!raw.contains("family") || !raw.at("family").is_string()) throw ConfigError(path + ".family", "missing model family");
    const auto family = raw.at("family").get<std::string>();

    nlohmann::json section;
    if (family == "tabulated") {
        section = {{"kernel", "uniform"}, {"r_min", 0.0}};
    } else {
        const auto& reg = model_registry();
        auto it = std::find_if(reg.begin(), reg.end(), [&](const FamilyInfo& f) { return f.name == family; });
        if (it == reg.end()) throw ConfigError(path + ".family", fmt::format("unknown family `{}`", family));
        section = it->defaults();
    }
    static const std::set<std::string> known = {"family", "a", "b", "fission", "kernel", "r_min",
                                                "atoms", "mass", "growth", "validation_grid"};
    for (const auto& [key, value] : raw.items()) {
        if (!known.count(key)) throw ConfigError(path + "." + key, "unknown model key");
        section[key] = value;
    }

    try {
        std::optional<GrowthRate> growth;
        if (family == "tabulated") {
            growth.emplace(tabulated_growth(section, path));
            if (!section.contains("fission")) throw ConfigError(path + ".fission", "tabulated family needs a fission entry");
        } else {
            const double a = number_at(section, "a", path);
            if (family == "linear") growth.emplace(linear_growth(a));
            else if (family == "saturating") growth.emplace(saturating_growth(a));
            else growth.emplace(hump_growth(a));
        }
        return ModelSpec(family, std::move(*growth), fission_from(section, path), kernel_from(section, path),
                         grid_from(section, path), section);
    } catch (const ConfigError& e) {
        if (e.where().rfind(path, 0) == 0) throw;
        throw ConfigError(path + "." + e.where(), e.message());
    }
}

ModelSpec make_family(const std::string& family, const nlohmann::json& overrides) {
    nlohmann::json section = overrides.is_object() ? overrides : nlohmann::json::object();
    section["family"] = family;
    return make_model(section);
}

}  // namespace gfrag
