#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gfrag/model.hpp"

namespace gfrag {

GrowthRate linear_growth(double a);
GrowthRate saturating_growth(double a);
GrowthRate hump_growth(double a);

FissionRate constant_fission(double b);
FissionRate saturating_fission(double b);
FissionRate zero_fission();

struct ParameterDoc {
    std::string key;
    std::string meaning;
    nlohmann::json default_value;
};

struct FamilyInfo {
    std::string name;
    std::string growth;
    std::string summary;
    /// How the family relates to the boundary-growth condition
    /// limsup c(x)/x < lambda at 0+ and at infinity.
    std::string condition_note;
    std::vector<ParameterDoc> parameters;

    nlohmann::json defaults() const;
};

/// Built-in model families: linear, saturating, hump.
const std::vector<FamilyInfo>& model_registry();

/// Builds a model from a `model` config section. Unknown keys and bad
/// values raise ConfigError naming the key path.
ModelSpec make_model(const nlohmann::json& section, const std::string& path = "model");

/// Convenience: a registry family with overrides applied on its defaults.
ModelSpec make_family(const std::string& family, const nlohmann::json& overrides = nlohmann::json::object());

}  // namespace gfrag
