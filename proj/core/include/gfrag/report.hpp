#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gfrag {

enum class Verdict { pass, fail, inconclusive };

std::string_view to_string(Verdict v) noexcept;

/// Outcome of one verification check. The verdict is a function of the
/// stated statistic and tolerance only; per-item details go into `details`.
struct CheckReport {
    std::string name;
    std::string inputs_digest;
    /// what the statistic measures and the rule applied to it
    std::string statistic_label;
    double statistic = 0.0;
    double tolerance = 0.0;
    Verdict verdict = Verdict::inconclusive;
    double runtime_seconds = 0.0;
    std::vector<std::string> notes;
    nlohmann::json details = nlohmann::json::object();

    std::string text() const;
    nlohmann::json to_json() const;
};

/// Combines verdicts: any fail -> fail, else any inconclusive -> inconclusive.
Verdict combine(Verdict a, Verdict b) noexcept;

/// FNV-1a 64-bit digest of the canonical JSON dump, as 16 hex digits.
std::string digest(const nlohmann::json& inputs);

}  // namespace gfrag
