#include "gfrag/report.hpp"

#include <cstdint>

#include <fmt/format.h>

namespace gfrag {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Verdict combine(Verdict a, Verdict b) noexcept {
    if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
    if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
    return Verdict::pass;
}

std::string digest(const nlohmann::json& inputs) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : inputs.dump()) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", hash);
}

std::string CheckReport::text() const {
    std::string out = fmt::format("[{}] {}\n  inputs   {}\n  {} = {:.6g} (tolerance {:.6g})\n  runtime  {:.2f} s\n",
                                  to_string(verdict), name, inputs_digest, statistic_label, statistic, tolerance,
                                  runtime_seconds);
    for (const auto& n : notes) out += fmt::format("  note: {}\n", n);
    return out;
}

nlohmann::json CheckReport::to_json() const {
    return {{"name", name},
            {"inputs_digest", inputs_digest},
            {"statistic_label", statistic_label},
            {"statistic", statistic},
            {"tolerance", tolerance},
            {"verdict", std::string(to_string(verdict))},
            {"runtime_seconds", runtime_seconds},
            {"notes", notes},
            {"details", details}};
}

}  // namespace gfrag
