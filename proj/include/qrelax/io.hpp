#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qrelax/inference.hpp"
#include "json.hpp"

namespace qrelax::io {

// Numbers are written with 17 significant digits; infinities as "inf".
std::string format_number(double v);

// Rows (offset_meV, freq_Hz, <value_column>, sigma), frequency-major.
void write_map_csv(std::ostream& os, const OccupancyMap& map, const std::string& value_column);
void write_map_csv(const std::filesystem::path& path, const OccupancyMap& map, const std::string& value_column);

// Reads a map in any row order and sorts it onto its grid. A first column
// named offset_V is converted to meV with the lever arm (eV/V); for
// derivative data the value and sigma columns are then per volt and are
// converted to per meV. Errors carry the file and line.
OccupancyMap read_map_csv(std::istream& is, const std::string& source, bool derivative, double lever_arm = 0.021);
OccupancyMap read_map_csv(const std::filesystem::path& path, bool derivative, double lever_arm = 0.021);

// One row per knot: epsilon_meV, gap_meV, rate_Hz, lo68, hi68, lo95, hi95.
void write_rate_csv(std::ostream& os, const FitResult& fit, double delta);
void write_rate_csv(const std::filesystem::path& path, const FitResult& fit, double delta);

nlohmann::json to_json(const FitResult& fit, double delta);
nlohmann::json to_json(const PulseSchedule& schedule);
PulseSchedule schedule_from_json(const nlohmann::json& j);

// Dataset: a JSON manifest listing one differential trace CSV per pulse template.
void write_dataset(const std::filesystem::path& dir, const MeasuredSet& data, const nlohmann::json& metadata);
MeasuredSet read_dataset(const std::filesystem::path& manifest);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace qrelax::io
