#pragma once

#include "mgsddp/core_model.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace mgsddp {

/// Discrete realizations of one stage; probabilities sum to one.
struct ScenarioSet {
  std::vector<StageRealization> realizations;

  double total_probability() const;
  int hours() const { return realizations.empty() ? 0 : realizations.front().hours(); }
};

/// Throws ValidationError unless probabilities are nonnegative, sum to one
/// within `tolerance`, and every realization has `hours` columns.
void check_scenarios(const ScenarioSet& set, int hours, double tolerance = 1e-9);

using TimePoint = std::chrono::sys_seconds;

/// Hourly aligned observations in kW.
struct TimeSeriesSet {
  std::vector<TimePoint> timestamps;
  Eigen::VectorXd wind, pv, demand;

  Eigen::Index size() const { return static_cast<Eigen::Index>(timestamps.size()); }
  /// Rows [begin, begin + count).
  TimeSeriesSet slice(Eigen::Index begin, Eigen::Index count) const;
};

struct LoadOptions {
  double wind_scale = 1.0;
};

/// Reads `timestamp,wind_kw,pv_kw,demand_kw` (ISO-8601 UTC timestamps,
/// hourly, ascending, no gaps). Errors name the offending file row.
TimeSeriesSet load_timeseries(const std::filesystem::path& path, const LoadOptions& options = {});
TimeSeriesSet parse_timeseries(std::istream& in, const LoadOptions& options = {});
void write_timeseries(const TimeSeriesSet& data, std::ostream& out);

enum class Variable { Wind, Pv, Demand };
inline constexpr std::array<Variable, 3> kVariables{Variable::Wind, Variable::Pv, Variable::Demand};
const char* to_string(Variable v);

inline constexpr std::array<double, 3> kQuantileLevels{0.2, 0.5, 0.8};
inline constexpr std::array<double, 3> kQuantileWeights{0.2, 0.6, 0.2};

/// Quantile forecast over a horizon: values(v)(q, t) for quantile q.
struct ForecastQuantiles {
  TimePoint start{};
  std::array<Eigen::MatrixXd, 3> values;  // indexed by Variable, 3 x hours

  int hours() const { return static_cast<int>(values[0].cols()); }
  const Eigen::MatrixXd& at(Variable v) const { return values[static_cast<int>(v)]; }
  Eigen::MatrixXd& at(Variable v) { return values[static_cast<int>(v)]; }
  /// Hours [begin, begin + count) as a new forecast.
  ForecastQuantiles window(int begin, int count) const;
};

void check_quantiles(const ForecastQuantiles& q);

/// Forecasts keyed by their first forecast hour.
struct ForecastArchive {
  std::vector<ForecastQuantiles> issues;  // ascending start
  /// The forecast starting exactly at `t`; throws ValidationError when absent.
  const ForecastQuantiles& at(TimePoint t) const;
};

/// Reads `[issued,]timestamp,variable,q20,q50,q80` rows, grouped by
/// `issued`; without that column the whole file is a single forecast.
/// `wind_scale` multiplies the wind quantiles.
ForecastArchive load_forecasts(const std::filesystem::path& path, const LoadOptions& options = {});
ForecastArchive parse_forecasts(std::istream& in, const LoadOptions& options = {});
void write_forecasts(const ForecastArchive& archive, std::ostream& out);

/// Per-variable profiles of one combination, hours long.
struct Combination {
  std::array<Eigen::VectorXd, 3> profile;  // indexed by Variable
  std::array<int, 3> level{};              // quantile index per variable
  double probability = 0.0;

  double net_production() const;
};

/// All 27 quantile combinations with product weights.
std::vector<Combination> combine_quantiles(const ForecastQuantiles& q);

inline constexpr std::array<double, 5> kBandProbabilities{0.1, 0.2, 0.4, 0.2, 0.1};

/// Sorts by accumulated net production and keeps the weighted median member
/// of each cumulative-probability band, ties toward lower net production.
std::vector<Combination> reduce_by_net_production(std::vector<Combination> combos);

/// Maps combinations onto the system: wind and pv profiles are shared
/// among units of that source in proportion to capacity and clipped to it;
/// demand is split by load share.
ScenarioSet to_scenarios(const std::vector<Combination>& combos, const SystemSpec& spec);

/// Single realization from the median quantile of every variable.
ScenarioSet median_scenario(const ForecastQuantiles& q, const SystemSpec& spec);

/// Observed values of `data` rows [begin, begin + hours) mapped onto the system.
StageRealization observed_realization(const TimeSeriesSet& data, Eigen::Index begin, int hours,
                                      const SystemSpec& spec);

/// Type-7 (linear between order statistics) sample quantile.
double sample_quantile(std::vector<double> values, double level);

struct StageLayout {
  std::vector<int> durations{6, 6, 6, 6, 24, 72};
  double discount = 0.7;
  int roll_hours = 6;

  int in_horizon_hours() const;
  void validate() const;
};

/// Flat profiles at the 0.2/0.5/0.8 quantiles of the daily means of
/// `history`, combined and reduced like a forecast. Needs 30 full days.
std::vector<Combination> terminal_combinations(const TimeSeriesSet& history, int hours);
ScenarioSet terminal_scenarios(const TimeSeriesSet& history, const StageLayout& layout,
                               const SystemSpec& spec);

/// ISO-8601 `YYYY-MM-DDTHH:MM[:SS][Z]` or `YYYY-MM-DD HH:MM[:SS]`, UTC.
TimePoint parse_timestamp(const std::string& text);
std::string format_timestamp(TimePoint t);

}  // namespace mgsddp
