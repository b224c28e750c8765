#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfrag/branching.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"

namespace gfrag {

/// Shortest text that parses back to the same double: 17 significant digits.
std::string format_double(double value);

// Event log: one record per line, "kind,time,label,mass_before,ratio" after a
// header line. Freeze records carry an empty ratio.
void write_event_log(std::ostream& out, const std::vector<EventRecord>& events);
std::vector<EventRecord> read_event_log(std::istream& in);

// Snapshots: "time,label,mass", one row per atom.
void write_snapshots_csv(std::ostream& out, const std::vector<PopulationSnapshot>& snapshots);

// Spectral artifacts.
// harmonic: "x,h,ell,ell_stderr,truncated_fraction"
// profile:  "y,nu,nu_stderr,derivative,derivative_stderr,richardson_gap"
void write_harmonic_csv(std::ostream& out, const HarmonicEstimate& h);
void write_profile_csv(std::ostream& out, const ProfileEstimate& profile);

// Spine occupation: "bin_left,bin_right,mass_fraction"
void write_occupation_csv(std::ostream& out, const Occupation& occupation);

// Tagged path dump: "time,mass,log_weight,event"
void write_path_csv(std::ostream& out, const std::vector<PathPoint>& path);

void write_json_file(const std::filesystem::path& file, const nlohmann::json& document);
nlohmann::json read_json_file(const std::filesystem::path& file);

/// Opens a file for writing, creating parent directories. Throws IoError.
std::ofstream open_output(const std::filesystem::path& file);

}  // namespace gfrag
