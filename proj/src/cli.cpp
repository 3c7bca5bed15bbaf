#include "gridshare/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "gridshare/allocator.hpp"
#include "gridshare/errors.hpp"
#include "gridshare/experiments.hpp"
#include "gridshare/kernels.hpp"
#include "gridshare/markov.hpp"
#include "gridshare/table_io.hpp"

namespace gridshare::cli {
namespace {

namespace fs = std::filesystem;
using experiments::Method;
using experiments::RateAxis;

struct Options {
    int stations = 2;
    double resistance = 0.1;
    double delta = 0.05;
    int capacity = 100;
    std::string model;  // empty: distflow for allocate, both elsewhere
    std::string state;
    std::string lambda;
    double total_rate = -1.0;
    std::string fractions;
    std::string lambda_grid;
    std::string total_grid;
    std::string fractions_1;
    std::string method = "auto";
    std::uint64_t seed = 1;
    double horizon = 2e5;
    double burn_in = 2e4;
    int replications = 5;
    int batches = 20;
    int threads = 1;
    std::string out = ".";
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        parts.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return parts;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(fmt::format("'{}' is not a number", s));
    }
}

std::vector<double> number_list(const std::string& text) {
    std::vector<double> values;
    for (const auto& part : split(text, ',')) values.push_back(to_double(part));
    return values;
}

/// "a:b:step" or an explicit comma list.
std::vector<double> grid_spec(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() == 3) return experiments::arithmetic_grid(to_double(parts[0]), to_double(parts[1]), to_double(parts[2]));
    if (parts.size() == 1) return number_list(text);
    throw ValidationError(fmt::format("grid '{}' must be 'first:last:step' or a comma list", text));
}

NetworkConfig network(const Options& o, PowerFlowModel model) {
    NetworkConfig cfg{o.stations, o.resistance, o.delta, o.capacity, model};
    cfg.validate();
    return cfg;
}

std::vector<PowerFlowModel> models(const Options& o, bool allow_both) {
    if (o.model == "both") {
        if (!allow_both) throw ValidationError("--model both is not accepted by this subcommand");
        return {PowerFlowModel::Distflow, PowerFlowModel::LinearizedDistflow};
    }
    return {parse_model(o.model)};
}

markov::SimulationConfig simulation(const Options& o) {
    markov::SimulationConfig sim{o.horizon, o.burn_in, o.seed, o.replications, o.batches};
    sim.validate();
    return sim;
}

std::vector<double> fractions(const Options& o) {
    if (o.fractions.empty()) return std::vector<double>(static_cast<std::size_t>(o.stations), 1.0 / o.stations);
    return number_list(o.fractions);
}

markov::ArrivalSpec arrivals(const Options& o) {
    if (!o.lambda.empty()) {
        std::vector<double> rates = number_list(o.lambda);
        if (rates.size() == 1 && o.stations > 1) rates.assign(static_cast<std::size_t>(o.stations), rates[0]);
        return markov::ArrivalSpec(rates);
    }
    if (o.total_rate >= 0.0) return markov::ArrivalSpec::from_total(o.total_rate, fractions(o));
    throw ValidationError("give either --lambda or --total-rate");
}

// Single-point table so simulate/stationary share the sweep schema.
experiments::SweepRow point_row(const Options& o, PowerFlowModel model, Method method,
                                const markov::ArrivalSpec& spec) {
    experiments::SweepRow row;
    row.model = model;
    row.method = method;
    row.total_rate = spec.total();
    row.rate = row.total_rate;
    row.lambda = spec.rates;
    for (double l : spec.rates) row.fractions.push_back(row.total_rate > 0.0 ? l / row.total_rate : 1.0 / o.stations);
    return row;
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

io::Manifest manifest_for(const CLI::App& sub, const Options& o, const fs::path& csv) {
    io::Manifest m;
    m.emplace_back("# gridshare run manifest; rerun with: gridshare " + sub.get_name() + " --config <this file>", "");
    m.emplace_back("tool", "gridshare");
    m.emplace_back("version", kVersion);
    m.emplace_back("timestamp", timestamp());
    m.emplace_back("kernels", std::string(kernels::to_string(kernels::active_kernels().isa)));
    m.emplace_back("command", sub.get_name());
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name.empty()) continue;
        std::string value;
        if (opt->count() > 0)
            value = fmt::format("{}", fmt::join(opt->results(), ","));
        else
            value = opt->get_default_str();
        if (name == "model") value = o.model;
        m.emplace_back(name, value);
    }
    m.emplace_back("output", csv.string());
    return m;
}

void emit(const CLI::App& sub, const Options& o, const std::string& csv_text) {
    const fs::path dir(o.out);
    const fs::path csv = dir / (sub.get_name() + ".csv");
    io::write_text(csv, csv_text);
    io::write_text(dir / (sub.get_name() + ".manifest"), io::manifest_text(manifest_for(sub, o, csv)));
}

// Flags override the config file: every config key that names an option of
// the subcommand and is not already on the command line becomes a flag.
std::vector<std::string> merge_config(const std::vector<std::string>& argv, const CLI::App& app) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < argv.size(); ++i) {
        if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
        if (argv[i].starts_with("--config=")) path = argv[i].substr(9);
    }
    if (!path || argv.size() < 2) return argv;
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands({}))
        if (s->get_name() == argv[1]) sub = s;
    if (sub == nullptr) return argv;

    std::ifstream file(*path);
    if (!file) throw ValidationError(fmt::format("cannot read config file {}", *path));
    std::vector<std::string> merged = argv;
    std::string line;
    while (std::getline(file, line)) {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#' || line[b] == ';' || line[b] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = split(line.substr(0, eq), ',').front();
        std::string value = line.substr(eq + 1);
        value = value.substr(std::min(value.find_first_not_of(" \t"), value.size()));
        while (!value.empty() && (value.back() == ' ' || value.back() == '\r')) value.pop_back();
        if (key == "config" || sub->get_option_no_throw("--" + key) == nullptr) continue;
        const bool given = std::any_of(argv.begin(), argv.end(), [&](const std::string& a) {
            return a == "--" + key || a.starts_with("--" + key + "=");
        });
        if (given) continue;
        merged.push_back("--" + key);
        merged.push_back(value);
    }
    return merged;
}

void add_network(CLI::App* sub, Options& o, bool allow_both) {
    sub->add_option("--stations", o.stations, "Number of charging stations N");
    sub->add_option("--resistance", o.resistance, "Per-unit resistance r of every edge");
    sub->add_option("--delta", o.delta, "Admissible relative voltage drop, in (0, 0.5]");
    sub->add_option("--capacity", o.capacity, "Parking spaces K per lot");
    sub->add_option("--model", o.model,
                    allow_both ? "distflow, linearized or both (default both)" : "distflow or linearized (default distflow)");
    sub->add_option("--out", o.out, "Output directory for the CSV and manifest");
    sub->add_option("--config", "Key-value config file (flags take precedence)");
}

void add_simulation(CLI::App* sub, Options& o) {
    sub->add_option("--seed", o.seed, "Master RNG seed")->envname("GRIDSHARE_SEED");
    sub->add_option("--horizon", o.horizon, "Simulated time per replication");
    sub->add_option("--burn-in", o.burn_in, "Discarded initial time");
    sub->add_option("--replications", o.replications, "Independent replications");
    sub->add_option("--batches", o.batches, "Batches per replication for confidence intervals");
    sub->add_option("--threads", o.threads, "Worker threads");
}

void add_arrivals(CLI::App* sub, Options& o) {
    sub->add_option("--lambda", o.lambda, "Per-lot arrival rates (comma list, or one value for every lot)");
    sub->add_option("--total-rate", o.total_rate, "Total arrival rate, split by --fractions");
    sub->add_option("--fractions", o.fractions, "Arrival fractions per lot (comma list, default equal)");
}

}  // namespace

int run_command(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Proportional-fair EV charging on a line distribution network", "gridshare"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CLI::App* allocate = app.add_subcommand("allocate", "Proportional-fair allocation for one occupancy state");
    add_network(allocate, o, false);
    allocate->add_option("--state", o.state, "EV counts per lot, e.g. 1,1")->required();

    CLI::App* simulate = app.add_subcommand("simulate", "Event-driven simulation at one arrival-rate point");
    add_network(simulate, o, true);
    add_arrivals(simulate, o);
    add_simulation(simulate, o);

    CLI::App* stationary = app.add_subcommand("stationary", "Exact stationary metrics at one arrival-rate point");
    add_network(stationary, o, true);
    add_arrivals(stationary, o);

    CLI::App* sweep = app.add_subcommand("sweep", "Mean number and charging time over an arrival-rate grid");
    add_network(sweep, o, true);
    add_simulation(sweep, o);
    sweep->add_option("--lambda-grid", o.lambda_grid, "Per-lot rate grid 'first:last:step' (default 0.02:0.40:0.005)");
    sweep->add_option("--total-grid", o.total_grid, "Total rate grid 'first:last:step' (overrides --lambda-grid)");
    sweep->add_option("--fractions", o.fractions, "Arrival fractions per lot (default equal)");
    sweep->add_option("--method", o.method, "exact, sim or auto");

    CLI::App* critical = app.add_subcommand("critical", "Max-jump critical arrival rates");
    add_network(critical, o, true);
    add_simulation(critical, o);
    critical->add_option("--lambda-grid", o.lambda_grid, "Per-lot rate grid with equal fractions");
    critical->add_option("--total-grid", o.total_grid, "Total rate grid for the fraction scan (default 0.1:0.7:0.005)");
    critical->add_option("--fractions-1", o.fractions_1, "Fractions to lot 1 to scan (default 0.2:0.8:0.1)");
    critical->add_option("--method", o.method, "exact, sim or auto");

    CLI::App* heatmap = app.add_subcommand("heatmap", "Total mean number over (total rate, fraction to lot 1)");
    add_network(heatmap, o, true);
    add_simulation(heatmap, o);
    heatmap->add_option("--total-grid", o.total_grid, "Total rate grid (default 0.1:1.2:0.05)");
    heatmap->add_option("--fractions-1", o.fractions_1, "Fraction-to-lot-1 grid (default 0.05:0.95:0.05)");
    heatmap->add_option("--method", o.method, "exact, sim or auto");


    try {
        std::vector<std::string> argv = merge_config(argv_in, app);
        std::vector<const char*> raw;
        for (const auto& a : argv) raw.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(raw.size()), raw.data());
        } catch (const CLI::ParseError& e) {
            return app.exit(e, out, err) == 0 ? kOk : kUsage;
        }
        if (o.model.empty()) o.model = allocate->parsed() ? "distflow" : "both";

        if (allocate->parsed()) {
            const NetworkConfig cfg = network(o, models(o, false).front());
            std::vector<int> counts;
            for (double c : number_list(o.state)) {
                if (c != static_cast<int>(c)) throw ValidationError("--state entries must be integers");
                counts.push_back(static_cast<int>(c));
            }
            const StateVector x(counts);
            const AllocationVector p = allocator::allocate(x, cfg);
            std::vector<std::string> printed;
            for (double v : p.power) printed.push_back(io::format_number(v));
            out << fmt::format("{}", fmt::join(printed, ", ")) << "\n";
            emit(*allocate, o, io::allocation_csv(cfg.model, x, p));
        } else if (simulate->parsed() || stationary->parsed()) {
            const bool exact = stationary->parsed();
            const markov::ArrivalSpec spec = arrivals(o);
            experiments::SweepTable table;
            table.axis = RateAxis::Total;
            for (PowerFlowModel model : models(o, true)) {
                const NetworkConfig cfg = network(o, model);
                spec.validate(cfg);
                experiments::SweepRow row = point_row(o, model, exact ? Method::Exact : Method::Simulation, spec);
                if (exact) {
                    row.result = markov::exact_metrics(markov::stationary_distribution(spec, cfg), spec, cfg);
                } else {
                    row.sim = simulation(o);
                    row.result = markov::simulate(spec, cfg, row.sim, o.threads);
                }
                for (std::size_t j = 0; j < row.result->lots.size(); ++j) {
                    const auto& lot = row.result->lots[j];
                    out << fmt::format("{} lot {}: mean_number {} mean_time {} blocking {}\n", to_string(model), j + 1,
                                       io::format_number(lot.mean_number), io::format_number(lot.mean_time),
                                       io::format_number(lot.blocking));
                }
                table.rows.push_back(std::move(row));
            }
            emit(exact ? *stationary : *simulate, o, io::sweep_csv(table));
        } else if (sweep->parsed()) {
            const bool total = !o.total_grid.empty();
            const std::vector<double> grid = grid_spec(total ? o.total_grid : (o.lambda_grid.empty() ? "0.02:0.40:0.005" : o.lambda_grid));
            const markov::SimulationConfig sim = simulation(o);
            experiments::SweepTable table;
            table.axis = total ? RateAxis::Total : RateAxis::PerLot;
            for (PowerFlowModel model : models(o, true)) {
                auto part = experiments::run_sweep(grid, fractions(o), table.axis, network(o, model), sim,
                                                   experiments::parse_method(o.method), o.threads);
                for (auto& row : part.rows) {
                    if (!row.error.empty())
                        err << fmt::format("warning: {} at rate {}: {}\n", to_string(model), row.rate, row.error);
                    table.rows.push_back(std::move(row));
                }
            }
            emit(*sweep, o, io::sweep_csv(table));
            out << fmt::format("wrote {} rate points\n", table.rows.size());
        } else if (critical->parsed()) {
            const markov::SimulationConfig sim = simulation(o);
            const Method method = experiments::parse_method(o.method);
            std::vector<experiments::CriticalRow> rows;
            for (PowerFlowModel model : models(o, true)) {
                const NetworkConfig cfg = network(o, model);
                if (!o.lambda_grid.empty()) {
                    const std::vector<double> grid = grid_spec(o.lambda_grid);
                    const auto table = experiments::run_sweep(
                        grid, std::vector<double>(cfg.stations(), 1.0 / cfg.n_stations), RateAxis::PerLot, cfg, sim,
                        method, o.threads);
                    experiments::CriticalRow row;
                    row.model = model;
                    row.fraction_1 = 1.0 / cfg.n_stations;
                    row.grid_step = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
                    row.estimate = experiments::estimate_critical_rate(table, model);
                    row.critical_rate = row.estimate.rate;
                    rows.push_back(std::move(row));
                } else {
                    auto part = experiments::scan_critical_rates(
                        grid_spec(o.total_grid.empty() ? "0.1:0.7:0.005" : o.total_grid),
                        grid_spec(o.fractions_1.empty() ? "0.2:0.8:0.1" : o.fractions_1), cfg, sim, method, o.threads);
                    rows.insert(rows.end(), part.begin(), part.end());
                }
            }
            for (const auto& row : rows) {
                out << fmt::format("{} f1={} critical_rate={}{}\n", to_string(row.model), io::format_number(row.fraction_1),
                                   io::format_number(row.critical_rate),
                                   row.estimate.no_explosion ? " (no explosion in grid)"
                                   : row.estimate.tied     ? " (tied candidates)"
                                                           : "");
                if (!row.error.empty()) err << "warning: " << row.error << "\n";
            }
            emit(*critical, o, io::critical_csv(rows));
        } else if (heatmap->parsed()) {
            const markov::SimulationConfig sim = simulation(o);
            experiments::HeatmapTable table;
            for (PowerFlowModel model : models(o, true)) {
                auto part = experiments::run_heatmap(grid_spec(o.total_grid.empty() ? "0.1:1.2:0.05" : o.total_grid),
                                                     grid_spec(o.fractions_1.empty() ? "0.05:0.95:0.05" : o.fractions_1),
                                                     network(o, model), sim, experiments::parse_method(o.method), o.threads);
                table.rows.insert(table.rows.end(), part.rows.begin(), part.rows.end());
            }
            emit(*heatmap, o, io::heatmap_csv(table));
            out << fmt::format("wrote {} cells\n", table.rows.size());
        }
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace gridshare::cli
