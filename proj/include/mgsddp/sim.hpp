#pragma once

#include "mgsddp/core_model.hpp"
#include "mgsddp/scenario.hpp"
#include "mgsddp/sddp.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mgsddp {

/// a: perfect information, b: deterministic median forecast, c-f: stochastic.
enum class Method { A, B, C, D, E, F };

char to_char(Method m);
Method method_from_char(char c);
/// Degradation terms each method carries in its optimization model.
StageFlags method_flags(Method m);

/// Named system variants: diesel 25/75/25 kW, battery 500/500/1000 kWh,
/// hydrogen present/present/absent.
SystemSpec named_case(int number);

struct SimulationConfig {
  int case_number = 0;  // 0 when `system` is custom
  SystemSpec system;
  Method method = Method::F;
  StageLayout layout;
  std::uint64_t seed = 1;
  int iterations = 50;
  double wind_scale = 1.0;
  double initial_soc = 0.5;  // fraction of usable capacity per storage
  std::optional<TimePoint> start;  // defaults to the first observation
  int hours = 0;                   // 0: every full roll that fits in the data

  void validate() const;
};

SimulationConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const SimulationConfig& config);
SimulationConfig load_config(const std::filesystem::path& path);

nlohmann::json system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const nlohmann::json& doc);

/// Hourly record of the realized operation; storage matrices are
/// storages x hours with SOC in absolute kWh at the end of each hour.
struct SimulationTraces {
  std::vector<TimePoint> timestamps;
  std::vector<std::string> storage_names;
  Eigen::VectorXd soc_max;  // per storage
  Eigen::VectorXd generation, vres_available, vres_used, demand, shedding;
  Eigen::MatrixXd charge, discharge, soc;

  int hours() const { return static_cast<int>(timestamps.size()); }
};

/// Cost and energy totals of one simulation. Costs in EUR, energies in MWh.
struct MetricsReport {
  std::string label;  // e.g. "2f"
  int case_number = 0;
  char method = '-';
  double total_cost = 0.0;
  double shedding_cost = 0.0;
  double diesel_cost = 0.0;
  double dod_cost = 0.0;
  double soc_up_cost = 0.0;
  double soc_dn_cost = 0.0;
  double lifetime_years = 0.0;
  double vres_mwh = 0.0;
  double h2_charge_mwh = 0.0;
  double h2_discharge_mwh = 0.0;
  double battery_charge_mwh = 0.0;
  double battery_discharge_mwh = 0.0;
  double hours = 0.0;
  SimulationTraces traces;

  double degradation_cost() const { return dod_cost + soc_up_cost + soc_dn_cost; }
};

/// One contiguous block of realized dispatch.
struct RealizedStep {
  TimePoint start{};
  StageRealization observed;
  StageSolution solution;
};

/// Re-prices the realized trajectory with every degradation ladder, whatever
/// the optimizer saw: DOD cost from a cheapest-first ladder replay of each
/// storage's hourly charge and discharge, SOC cost from the hourly level.
/// Storages with degradation count as battery energy, the others as hydrogen.
MetricsReport accumulate_metrics(const std::vector<RealizedStep>& steps, const SystemSpec& spec,
                                 const TableSet& tables, const StateVector& initial,
                                 double dt_hours = 1.0);

struct LifetimeEstimate {
  double annual_fade = 0.0;
  double years = 0.0;
};

/// annual_fade = 8760 f(sigma_ref) + priced fade per year / R_total, where
/// f(sigma_ref) is the calendar fade at the calibration level.
LifetimeEstimate estimate_lifetime(double priced_degradation_eur, double window_hours,
                                   const SocFade<double>& fade, double replacement_total);
/// Lifetime of the first degrading storage; zero without one.
LifetimeEstimate estimate_lifetime(const MetricsReport& report, const SystemSpec& spec);

/// Observed and forecast inputs for one simulation.
struct SimulationInputs {
  TimeSeriesSet data;
  ForecastArchive forecasts;
};

/// Rolls the chosen method over the window, carrying the realized outgoing
/// state into the next window.
MetricsReport run_rolling_horizon(const SimulationConfig& config, const SimulationInputs& inputs);

/// Builds the policy graph for one roll from the forecast issued at its start.
PolicyGraph roll_graph(const SimulationConfig& config, const ForecastQuantiles& forecast,
                       const ScenarioSet& terminal);

/// Every node drawn from daily-mean quantiles of `history`, for training
/// without a forecast.
PolicyGraph climatology_graph(const SimulationConfig& config, const TimeSeriesSet& history);

/// Report rows in a fixed column order; an empty list gives the header only.
void write_report_csv(const std::vector<MetricsReport>& reports, std::ostream& out);
nlohmann::json report_to_json(const MetricsReport& report, bool with_traces = false);
MetricsReport report_from_json(const nlohmann::json& doc);
void write_traces_csv(const SimulationTraces& traces, std::ostream& out);
const std::vector<std::string>& report_columns();

/// Trailing means over `window` samples; n - window + 1 values.
Eigen::VectorXd rolling_mean(const Eigen::Ref<const Eigen::VectorXd>& x, int window);

/// Self-contained SVG line chart. Each series is drawn over the x range
/// [0, length); `y_max` fixes the upper axis limit when positive.
struct PlotSeries {
  std::string name;
  Eigen::VectorXd values;
};
std::string svg_line_chart(const std::string& title, const std::vector<PlotSeries>& series,
                           double y_min, double y_max, const std::string& y_label);

/// Writes generation_demand.svg and one soc_<storage>.svg with `window`-hour
/// rolling means into `dir`; returns the written paths.
std::vector<std::filesystem::path> emit_plots(const SimulationTraces& traces,
                                              const std::filesystem::path& dir, int window = 96);

/// Deterministic synthetic year analog: `days` of hourly wind, pv and demand
/// with seasonal, diurnal and autoregressive parts, scaled to the named
/// microgrid (wind 135 kW, pv 86 kW).
TimeSeriesSet synthetic_timeseries(int days, std::uint64_t seed, TimePoint start);
/// Quantile forecasts issued every `interval` hours over `horizon` hours;
/// the median carries a growing error and the outer quantiles straddle it.
ForecastArchive synthetic_forecasts(const TimeSeriesSet& data, int horizon, int interval,
                                    std::uint64_t seed);

}  // namespace mgsddp
