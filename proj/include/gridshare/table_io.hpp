#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridshare/experiments.hpp"

namespace gridshare::io {

inline constexpr const char* kSweepHeader =
    "model,method,lot,lambda_lot,total_rate,fraction_1,mean_number,mean_number_ci,mean_time,mean_time_ci,"
    "blocking,seed,horizon,burn_in";
inline constexpr const char* kHeatmapHeader = "model,total_rate,fraction_1,total_mean_number,ci";
inline constexpr const char* kCriticalHeader = "model,fraction_1,critical_rate,grid_step";
inline constexpr const char* kAllocationHeader = "model,lot,count,power";

/// Seven significant digits; NaN and missing values print as "NA".
std::string format_number(double value);
std::string format_number(const std::optional<double>& value);

/// Rows in lexicographic grid-key order: (model, method, fraction_1, total_rate, lot).
std::string sweep_csv(const experiments::SweepTable& table);
/// (model, total_rate, fraction_1).
std::string heatmap_csv(const experiments::HeatmapTable& table);
/// (model, fraction_1).
std::string critical_csv(const std::vector<experiments::CriticalRow>& rows);
std::string allocation_csv(PowerFlowModel model, const StateVector& x, const AllocationVector& p);

/// Writes `contents` to `path`; I/O failures raise Error naming the path.
void write_text(const std::filesystem::path& path, const std::string& contents);

/// Minimal reader for the files above (no quoting). First element is the header.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// "key = value" lines; comment lines start with '#'.
using Manifest = std::vector<std::pair<std::string, std::string>>;
std::string manifest_text(const Manifest& manifest);

}  // namespace gridshare::io
