#include "gfrag/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <sstream>

#include <fmt/format.h>

#include "gfrag/errors.hpp"

namespace gfrag {

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

void write_event_log(std::ostream& out, const std::vector<EventRecord>& events) {
    out << "kind,time,label,mass_before,ratio\n";
    for (const auto& e : events) {
        out << (e.kind == EventKind::fission ? "fission" : "freeze") << ',' << format_double(e.time) << ','
            << e.label.str() << ',' << format_double(e.mass_before) << ','
            << (std::isnan(e.ratio) ? std::string() : format_double(e.ratio)) << '\n';
    }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

std::vector<EventRecord> read_event_log(std::istream& in) {
    std::vector<EventRecord> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        const auto f = split_fields(line);
        const std::string where = fmt::format("event log line {}", lineno);
        if (f.size() != 5) throw ConfigError(where, "expected 5 fields");
        EventRecord e;
        if (f[0] == "fission") {
            e.kind = EventKind::fission;
        } else if (f[0] == "freeze") {
            e.kind = EventKind::freeze;
        } else {
            throw ConfigError(where, "unknown event kind '" + f[0] + "'");
        }
        try {
            e.time = std::stod(f[1]);
            e.label = Label::parse(f[2]);
            e.mass_before = std::stod(f[3]);
            e.ratio = f[4].empty() ? std::nan("") : std::stod(f[4]);
        } catch (const std::invalid_argument&) {
            throw ConfigError(where, "malformed number");
        } catch (const std::out_of_range&) {
            throw ConfigError(where, "number out of range");
        } catch (const DomainError& e) {
            throw ConfigError(where, e.what());
        }
        events.push_back(std::move(e));
    }
    return events;
}

void write_snapshots_csv(std::ostream& out, const std::vector<PopulationSnapshot>& snapshots) {
    out << "time,label,mass\n";
    for (const auto& s : snapshots) {
        for (const auto& a : s.atoms) {
            out << format_double(s.time) << ',' << a.label.str() << ',' << format_double(a.mass) << '\n';
        }
    }
}

void write_harmonic_csv(std::ostream& out, const HarmonicEstimate& h) {
    out << "x,h,ell,ell_stderr,truncated_fraction\n";
    for (std::size_t i = 0; i < h.grid().size(); ++i) {
        const double x = h.grid()[i];
        out << format_double(x) << ',' << format_double(x * h.ell_values()[i]) << ','
            << format_double(h.ell_values()[i]) << ',' << format_double(h.ell_se()[i]) << ','
            << format_double(h.truncated()[i]) << '\n';
    }
}

void write_profile_csv(std::ostream& out, const ProfileEstimate& p) {
    out << "y,nu,nu_stderr,derivative,derivative_stderr,richardson_gap\n";
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
        out << format_double(p.grid[i]) << ',' << format_double(p.nu[i]) << ',' << format_double(p.nu_se[i]) << ','
            << format_double(p.derivative[i]) << ',' << format_double(p.derivative_se[i]) << ','
            << format_double(p.richardson_gap[i]) << '\n';
    }
}

void write_occupation_csv(std::ostream& out, const Occupation& occupation) {
    out << "bin_left,bin_right,mass_fraction\n";
    const auto fractions = occupation.fractions();
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        out << format_double(occupation.edges[i]) << ',' << format_double(occupation.edges[i + 1]) << ','
            << format_double(fractions[i]) << '\n';
    }
}

void write_path_csv(std::ostream& out, const std::vector<PathPoint>& path) {
    out << "time,mass,log_weight,event\n";
    for (const auto& p : path) {
        out << format_double(p.time) << ',' << format_double(p.mass) << ',' << format_double(p.log_weight) << ','
            << p.event << '\n';
    }
}

std::ofstream open_output(const std::filesystem::path& file) {
    std::error_code ec;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", file.parent_path().string(), ec.message()));
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", file.string()));
    return out;
}

void write_json_file(const std::filesystem::path& file, const nlohmann::json& document) {
    auto out = open_output(file);
    out << document.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError(fmt::format("cannot open {}", file.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string(), e.what());
    }
}

}  // namespace gfrag
