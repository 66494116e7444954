#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace heatrisk {

/// Shortest round-trip decimal form (17 significant digits).
std::string format_double(double x);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// JSON with two-space indent and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Header `sample,cost`, one row per sample index.
std::string costs_to_csv(std::span<const double> costs);
void write_costs_csv(const std::filesystem::path& path, std::span<const double> costs);
/// Errors name the file and line on malformed input or an empty table.
std::vector<double> read_costs_csv(const std::filesystem::path& path);

}  // namespace heatrisk
