#include "gridshare/table_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "gridshare/errors.hpp"

namespace gridshare::io {

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    return fmt::format("{:.7g}", value);
}

std::string format_number(const std::optional<double>& value) {
    return value ? format_number(*value) : std::string("NA");
}

namespace {

struct SweepLine {
    std::string model;
    std::string method;
    double fraction_1;
    double total_rate;
    std::size_t lot;
    std::string text;
};

}  // namespace

std::string sweep_csv(const experiments::SweepTable& table) {
    std::vector<SweepLine> lines;
    for (const auto& row : table.rows) {
        const bool exact = row.method == experiments::Method::Exact;
        const std::string seed = exact ? "NA" : std::to_string(row.sim.seed);
        const std::string horizon = exact ? "NA" : format_number(row.sim.horizon);
        const std::string burn_in = exact ? "NA" : format_number(row.sim.burn_in);
        const double f1 = row.fractions.empty() ? 1.0 : row.fractions[0];
        for (std::size_t j = 0; j < row.fractions.size(); ++j) {
            const double lambda = j < row.lambda.size() ? row.lambda[j] : row.fractions[j] * row.total_rate;
            std::string values;
            if (row.ok()) {
                const auto& lot = row.result->lots[j];
                values = fmt::format("{},{},{},{},{}", format_number(lot.mean_number),
                                     format_number(exact ? 0.0 : lot.mean_number_ci), format_number(lot.mean_time),
                                     format_number(exact ? 0.0 : lot.mean_time_ci), format_number(lot.blocking));
            } else {
                values = "NA,NA,NA,NA,NA";
            }
            lines.push_back({std::string(to_string(row.model)), std::string(experiments::to_string(row.method)), f1,
                             row.total_rate, j,
                             fmt::format("{},{},{},{},{},{},{},{},{},{}", to_string(row.model),
                                         experiments::to_string(row.method), j + 1, format_number(lambda),
                                         format_number(row.total_rate), format_number(f1), values, seed, horizon,
                                         burn_in)});
        }
    }
    std::stable_sort(lines.begin(), lines.end(), [](const SweepLine& a, const SweepLine& b) {
        return std::tie(a.model, a.method, a.fraction_1, a.total_rate, a.lot) <
               std::tie(b.model, b.method, b.fraction_1, b.total_rate, b.lot);
    });
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& line : lines) out += line.text + "\n";
    return out;
}

std::string heatmap_csv(const experiments::HeatmapTable& table) {
    std::vector<const experiments::HeatmapRow*> rows;
    for (const auto& row : table.rows) rows.push_back(&row);
    std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
        return std::make_tuple(to_string(a->model), a->total_rate, a->fraction_1) <
               std::make_tuple(to_string(b->model), b->total_rate, b->fraction_1);
    });
    std::string out = std::string(kHeatmapHeader) + "\n";
    for (const auto* row : rows) {
        out += fmt::format("{},{},{},{},{}\n", to_string(row->model), format_number(row->total_rate),
                           format_number(row->fraction_1), format_number(row->total_mean_number),
                           row->total_mean_number ? format_number(row->ci) : std::string("NA"));
    }
    return out;
}

std::string critical_csv(const std::vector<experiments::CriticalRow>& rows) {
    std::vector<const experiments::CriticalRow*> sorted;
    for (const auto& row : rows) sorted.push_back(&row);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return std::make_tuple(to_string(a->model), a->fraction_1) < std::make_tuple(to_string(b->model), b->fraction_1);
    });
    std::string out = std::string(kCriticalHeader) + "\n";
    for (const auto* row : sorted) {
        out += fmt::format("{},{},{},{}\n", to_string(row->model), format_number(row->fraction_1),
                           format_number(row->critical_rate), format_number(row->grid_step));
    }
    return out;
}

std::string allocation_csv(PowerFlowModel model, const StateVector& x, const AllocationVector& p) {
    std::string out = std::string(kAllocationHeader) + "\n";
    for (std::size_t j = 0; j < p.size(); ++j)
        out += fmt::format("{},{},{},{}\n", to_string(model), j + 1, x[j], format_number(p[j]));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(fmt::format("cannot open {} for writing", path.string()));
    file << contents;
    file.flush();
    if (!file) throw Error(fmt::format("failed writing {}", path.string()));
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_csv(buffer.str());
}

std::string manifest_text(const Manifest& manifest) {
    std::string out;
    for (const auto& [key, value] : manifest) {
        if (key.starts_with("#"))
            out += key + (value.empty() ? "" : " " + value) + "\n";
        else
            out += key + " = " + value + "\n";
    }
    return out;
}

}  // namespace gridshare::io
