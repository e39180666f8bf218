// Command-line front end: train, simulate, degradation-table, report,
// synthesize. Exit codes: 0 success, 2 validation error, 3 solve failure,
// 1 anything else.

#include "mgsddp/errors.hpp"
#include "mgsddp/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mgsddp;

namespace {

constexpr int kValidation = 2;
constexpr int kSolve = 3;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string() + ": cannot write");
  return out;
}

void print_degradation_table(const SystemSpec& spec, std::ostream& out) {
  const TableSet tables = make_table_set(spec);
  int degrading = 0;
  for (const auto& t : tables) degrading += t.has_value();
  out << "direction,segment,width_kwh,marginal_cost\n";
  char line[256];
  // Directions carry the storage name only when several storages degrade.
  auto emit = [&](const std::string& storage, const char* direction, const Eigen::VectorXd& costs,
                  double width) {
    const std::string label = degrading > 1 ? storage + ":" + direction : direction;
    for (Eigen::Index k = 0; k < costs.size(); ++k) {
      std::snprintf(line, sizeof line, "%s,%d,%.6f,%.9g\n", label.c_str(),
                    static_cast<int>(k + 1), width, costs[k]);
      out << line;
    }
  };
  for (std::size_t e = 0; e < spec.storages.size(); ++e) {
    if (!tables[e]) continue;
    const DegradationTables& t = *tables[e];
    const std::string& name = spec.storages[e].name;
    emit(name, "dod", t.dod_costs, spec.storages[e].usable() / t.dod_segments());
    emit(name, "soc_up", t.soc_up_costs, t.up_width());
    emit(name, "soc_down", t.soc_dn_costs, t.dn_width());
  }
}

struct TrainArgs {
  fs::path config, data, out;
};

void run_train(const TrainArgs& a) {
  const SimulationConfig config = load_config(a.config);
  config.validate();
  const TimeSeriesSet data = load_timeseries(a.data, {config.wind_scale});
  const PolicyGraph graph = climatology_graph(config, data);
  const TrainingResult result = train(graph, config.system, make_table_set(config.system),
                                      initial_state(config.system, config.initial_soc),
                                      config.iterations, config.seed);
  std::ofstream out = open_out(a.out);
  write_policy(graph, result.pool, out);
  if (!result.log.records.empty()) {
    const IterationRecord& last = result.log.records.back();
    std::printf("iterations %d lower_bound %.6f cuts %zu\n", last.iteration, last.lower_bound,
                result.pool.total());
  }
}

struct SimulateArgs {
  fs::path config, data, forecasts, out = ".";
  int case_number = 0;
  std::string method;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int iterations = 0, hours = 0, synthetic_days = 35;
  std::string start;
  bool plots = true;
};

void run_simulate(const SimulateArgs& a) {
  SimulationConfig config = a.config.empty() ? SimulationConfig{} : load_config(a.config);
  if (a.config.empty()) {
    config.case_number = 2;
    config.system = named_case(2);
  }
  if (a.case_number != 0) {
    config.case_number = a.case_number;
    config.system = named_case(a.case_number);
  }
  if (!a.method.empty()) {
    if (a.method.size() != 1) throw ValidationError("method must be a single letter a..f");
    config.method = method_from_char(a.method[0]);
  }
  if (a.seed_set) config.seed = a.seed;
  if (a.iterations > 0) config.iterations = a.iterations;
  if (a.hours > 0) config.hours = a.hours;
  if (!a.start.empty()) config.start = parse_timestamp(a.start);
  config.validate();

  SimulationInputs inputs;
  const LoadOptions load{config.wind_scale};
  if (a.data.empty()) {
    inputs.data = synthetic_timeseries(a.synthetic_days, 7, parse_timestamp("2020-01-01T00:00Z"));
    inputs.data.wind *= config.wind_scale;
    inputs.forecasts = synthetic_forecasts(inputs.data, config.layout.in_horizon_hours(),
                                           config.layout.roll_hours, 8);
  } else {
    inputs.data = load_timeseries(a.data, load);
    if (!a.forecasts.empty()) {
      inputs.forecasts = load_forecasts(a.forecasts, load);
    } else if (config.method != Method::A) {
      throw ValidationError("--forecasts is required for method " + std::string(1, to_char(config.method)));
    }
  }

  const MetricsReport report = run_rolling_horizon(config, inputs);
  fs::create_directories(a.out);
  {
    std::ofstream out = open_out(a.out / "report.csv");
    write_report_csv({report}, out);
  }
  {
    std::ofstream out = open_out(a.out / "report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out = open_out(a.out / "traces.csv");
    write_traces_csv(report.traces, out);
  }
  if (a.plots) emit_plots(report.traces, a.out);
  write_report_csv({report}, std::cout);
}

struct ReportArgs {
  fs::path in = ".";
  std::string format = "csv";
};

void run_report(const ReportArgs& a) {
  const fs::path path = a.in / "report.json";
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const MetricsReport report = report_from_json(doc);
  if (a.format == "csv") {
    write_report_csv({report}, std::cout);
  } else {
    std::cout << report_to_json(report).dump(2) << '\n';
  }
}

struct SynthesizeArgs {
  int days = 35;
  std::uint64_t seed = 7;
  std::string start = "2020-01-01T00:00Z";
  fs::path out = ".";
};

void run_synthesize(const SynthesizeArgs& a) {
  const StageLayout layout;
  const TimeSeriesSet data = synthetic_timeseries(a.days, a.seed, parse_timestamp(a.start));
  const ForecastArchive forecasts =
      synthetic_forecasts(data, layout.in_horizon_hours(), layout.roll_hours, a.seed + 1);
  fs::create_directories(a.out);
  std::ofstream d = open_out(a.out / "data.csv");
  write_timeseries(data, d);
  std::ofstream f = open_out(a.out / "forecasts.csv");
  write_forecasts(forecasts, f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid storage scheduling with stochastic dual dynamic programming"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a policy on climatological scenarios");
  train_cmd->add_option("--config", train_args.config, "JSON configuration")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_args.data, "Hourly observations CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Policy JSON to write")->required();

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Rolling-horizon simulation of one case and method");
  sim_cmd->add_option("--config", sim_args.config, "JSON configuration")->check(CLI::ExistingFile);
  sim_cmd->add_option("--case", sim_args.case_number, "Named case")->check(CLI::Range(1, 3));
  sim_cmd->add_option("--method", sim_args.method, "Method a..f");
  sim_cmd->add_option("--data", sim_args.data, "Hourly observations CSV")->check(CLI::ExistingFile);
  sim_cmd->add_option("--forecasts", sim_args.forecasts, "Quantile forecasts CSV")->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", sim_args.seed, "Training seed")->each([&](const std::string&) {
    sim_args.seed_set = true;
  });
  sim_cmd->add_option("--iterations", sim_args.iterations, "SDDP iterations per roll")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--hours", sim_args.hours, "Simulated hours (default: all full rolls)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--start", sim_args.start, "First simulated hour, ISO-8601 UTC");
  sim_cmd->add_option("--synthetic-days", sim_args.synthetic_days,
                      "Days of built-in synthetic data when --data is absent")
      ->check(CLI::Range(31, 3660));
  sim_cmd->add_flag("!--no-plots", sim_args.plots, "Skip SVG output");
  sim_cmd->add_option("--out", sim_args.out, "Output directory");

  std::string table_config;
  int table_case = 0;
  CLI::App* table_cmd = app.add_subcommand("degradation-table", "Print the degradation cost ladders as CSV");
  auto* cfg_opt = table_cmd->add_option("--config", table_config, "JSON configuration")->check(CLI::ExistingFile);
  table_cmd->add_option("--case", table_case, "Named case")->check(CLI::Range(1, 3))->excludes(cfg_opt);

  ReportArgs report_args;
  CLI::App* report_cmd = app.add_subcommand("report", "Re-emit a stored simulation report");
  report_cmd->add_option("--in", report_args.in, "Directory holding report.json")->check(CLI::ExistingDirectory);
  report_cmd->add_option("--format", report_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  SynthesizeArgs syn_args;
  CLI::App* syn_cmd = app.add_subcommand("synthesize", "Write synthetic observations and forecasts");
  syn_cmd->add_option("--days", syn_args.days, "Days of hourly data")->check(CLI::Range(1, 3660));
  syn_cmd->add_option("--seed", syn_args.seed, "Generator seed");
  syn_cmd->add_option("--start", syn_args.start, "First hour, ISO-8601 UTC");
  syn_cmd->add_option("--out", syn_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*train_cmd) {
      run_train(train_args);
    } else if (*sim_cmd) {
      run_simulate(sim_args);
    } else if (*table_cmd) {
      const SystemSpec spec = table_config.empty() ? named_case(table_case ? table_case : 2)
                                                   : load_config(table_config).system;
      print_degradation_table(validate_system(spec), std::cout);
    } else if (*report_cmd) {
      run_report(report_args);
    } else if (*syn_cmd) {
      run_synthesize(syn_args);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const SolveError& e) {
    std::cerr << "solve failure: " << e.what() << '\n';
    return kSolve;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
