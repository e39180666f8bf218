#include "fixtures.hpp"
#include "mgsddp/errors.hpp"
#include "mgsddp/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace mgsddp;
using namespace mgsddp::testing;

namespace {

std::string hourly_csv(int rows, double wind = 100.0, int demand_cycle = 7) {
  std::ostringstream out;
  out << "timestamp,wind_kw,pv_kw,demand_kw\n";
  TimePoint t = parse_timestamp("2020-01-01T00:00Z");
  for (int i = 0; i < rows; ++i) {
    out << format_timestamp(t + std::chrono::hours(i)) << ',' << wind << ",20," << 50 + i % demand_cycle << '\n';
  }
  return out.str();
}

std::vector<std::string> issues_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    parse_timeseries(in);
  } catch (const ValidationError& e) {
    return e.issues();
  }
  return {};
}

ForecastQuantiles ramp_forecast(int hours) {
  ForecastQuantiles q;
  q.start = parse_timestamp("2020-03-01T06:00Z");
  for (int v = 0; v < 3; ++v) {
    q.values[v].resize(3, hours);
    for (int t = 0; t < hours; ++t) {
      const double base = 10.0 * (v + 1) + t;
      q.values[v](0, t) = base;
      q.values[v](1, t) = base + 5.0 * (v + 1);
      q.values[v](2, t) = base + 12.0 * (v + 1);
    }
  }
  return q;
}

double total_probability(const std::vector<Combination>& cs) {
  double s = 0.0;
  for (const auto& c : cs) s += c.probability;
  return s;
}

}  // namespace

TEST_CASE("scenario: timestamps round trip") {
  const TimePoint t = parse_timestamp("2020-02-29T23:00Z");
  CHECK(format_timestamp(t) == "2020-02-29T23:00Z");
  CHECK(parse_timestamp("2020-02-29 23:00:00") == t);
  CHECK(parse_timestamp("2020-02-29T23:00:00Z") == t);
  CHECK(format_timestamp(t + std::chrono::hours(1)) == "2020-03-01T00:00Z");
  CHECK_THROWS_AS(parse_timestamp("2020-02-30T00:00Z"), ValidationError);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), ValidationError);
}

TEST_CASE("scenario: a leap year of hourly rows loads") {
  std::istringstream in(hourly_csv(8784));
  const TimeSeriesSet data = parse_timeseries(in);
  CHECK(data.size() == 8784);
  CHECK(format_timestamp(data.timestamps.back()) == "2020-12-31T23:00Z");

  std::ostringstream out;
  write_timeseries(data.slice(10, 48), out);
  std::istringstream back(out.str());
  const TimeSeriesSet again = parse_timeseries(back);
  CHECK(again.timestamps == data.slice(10, 48).timestamps);
  CHECK(again.demand == data.demand.segment(10, 48));
}

TEST_CASE("scenario: input errors name the row") {
  std::string csv = hourly_csv(5);
  // Drop the third data row (file row 4).
  std::istringstream lines(csv);
  std::string line, gap;
  for (int row = 1; std::getline(lines, line); ++row) {
    if (row != 4) gap += line + '\n';
  }
  auto issues = issues_of(gap);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("row 4") != std::string::npos);
  CHECK(issues[0].find("2020-01-01T02:00Z") != std::string::npos);

  issues = issues_of("timestamp,wind_kw,pv_kw,demand_kw\n2020-01-01T00:00Z,1,-2,3\n");
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("row 2") != std::string::npos);
  CHECK(issues[0].find("negative pv") != std::string::npos);

  issues = issues_of("timestamp,wind_kw,pv_kw,demand_kw\n2020-01-01T00:00Z,1,x,3\n2020-01-01T00:00Z,1,1,1\n");
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("not a number") != std::string::npos);

  issues = issues_of("when,a,b\n");
  CHECK(!issues.empty());
}

TEST_CASE("scenario: header aliases and wind scaling") {
  std::istringstream in(
      "Time,Wind,Solar,Load\n2020-01-01T00:00Z,135,0,10\n2020-01-01T01:00Z,67.5,3,11\n");
  LoadOptions opt;
  opt.wind_scale = 0.6;
  const TimeSeriesSet data = parse_timeseries(in, opt);
  CHECK(data.wind.maxCoeff() <= 81.0 + 1e-12);
  CHECK(data.wind[0] == doctest::Approx(81.0));
  CHECK(data.pv[1] == 3.0);
  CHECK(data.demand[1] == 11.0);
}

TEST_CASE("scenario: 27 quantile combinations") {
  const ForecastQuantiles q = ramp_forecast(6);
  const auto combos = combine_quantiles(q);
  REQUIRE(combos.size() == 27);
  CHECK(total_probability(combos) == doctest::Approx(1.0).epsilon(1e-12));
  int medians = 0;
  for (const auto& c : combos) {
    if (c.level == std::array<int, 3>{1, 1, 1}) {
      ++medians;
      CHECK(c.probability == doctest::Approx(0.216).epsilon(1e-12));
      CHECK(c.profile[0] == q.at(Variable::Wind).row(1).transpose());
    }
  }
  CHECK(medians == 1);

  ForecastQuantiles flat = q;
  for (auto& m : flat.values) m.setConstant(4.0);
  const auto same = combine_quantiles(flat);
  CHECK(same.size() == 27);
  CHECK(total_probability(same) == doctest::Approx(1.0).epsilon(1e-12));
  const auto reduced = reduce_by_net_production(same);
  REQUIRE(reduced.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(reduced[i].probability == kBandProbabilities[i]);
    CHECK(reduced[i].profile[2] == same[0].profile[2]);
  }

  ForecastQuantiles crossed = q;
  crossed.values[0](0, 2) = crossed.values[0](2, 2) + 1.0;
  CHECK_THROWS_AS(check_quantiles(crossed), ValidationError);
}

TEST_CASE("scenario: reduction picks band order statistics") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Combination> combos(27);
  std::vector<double> nets;
  for (auto& c : combos) {
    const double net = u(rng);
    nets.push_back(net);
    c.profile = {Eigen::VectorXd::Constant(1, net), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    c.probability = 1.0 / 27.0;
  }
  const auto reduced = reduce_by_net_production(combos);
  std::sort(nets.begin(), nets.end());
  // Brute force: the first sorted member whose cumulative share reaches the band midpoint.
  const double targets[5] = {0.05, 0.20, 0.50, 0.80, 0.95};
  REQUIRE(reduced.size() == 5);
  double total = 0.0;
  for (int b = 0; b < 5; ++b) {
    int k = 0;
    while ((k + 1) / 27.0 < targets[b]) ++k;
    CHECK(reduced[b].net_production() == nets[k]);
    total += reduced[b].probability;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  for (int b = 1; b < 5; ++b) CHECK(reduced[b - 1].net_production() <= reduced[b].net_production());
}

TEST_CASE("scenario: reduction stays inside each band") {
  const auto combos = combine_quantiles(ramp_forecast(12));
  std::vector<Combination> sorted = combos;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Combination& a, const Combination& b) { return a.net_production() < b.net_production(); });
  const auto reduced = reduce_by_net_production(combos);
  double low = 0.0;
  for (std::size_t b = 0; b < reduced.size(); ++b) {
    const double high = low + kBandProbabilities[b];
    // Cumulative mass before and through the selected member must straddle the band.
    double before = 0.0;
    bool found = false;
    for (const auto& c : sorted) {
      if (c.net_production() == reduced[b].net_production() && c.level == reduced[b].level) {
        found = true;
        CHECK(before <= high + 1e-12);
        CHECK(before + c.probability >= low - 1e-12);
        break;
      }
      before += c.probability;
    }
    CHECK(found);
    low = high;
  }
  CHECK(reduce_by_net_production(combos)[2].level == reduced[2].level);
}

TEST_CASE("scenario: mapping onto the system") {
  SystemSpec spec = microgrid();
  spec.vres.push_back({"wind2", 45.0, VresSource::Wind});
  spec.loads[0].share = 0.75;
  spec.loads.push_back({"critical", 50.0, 0.25});
  ForecastQuantiles q = ramp_forecast(6);
  q.at(Variable::Wind).setConstant(300.0);
  const ScenarioSet set = to_scenarios(reduce_by_net_production(combine_quantiles(q)), spec);
  REQUIRE(set.realizations.size() == 5);
  check_scenarios(set, 6);
  const StageRealization& w = set.realizations[2];
  // 135 and 45 kW wind units split 300 kW 3:1 and clip at capacity.
  CHECK(w.vres_availability(0, 0) == doctest::Approx(135.0));
  CHECK(w.vres_availability(2, 0) == doctest::Approx(45.0));
  CHECK(w.demand(0, 3) / w.demand(1, 3) == doctest::Approx(3.0));

  const ScenarioSet median = median_scenario(q, spec);
  REQUIRE(median.realizations.size() == 1);
  CHECK(median.realizations[0].probability == 1.0);
  CHECK(median.realizations[0].demand.col(0).sum() == doctest::Approx(q.at(Variable::Demand)(1, 0)));
}

TEST_CASE("scenario: forecasts with and without issue times") {
  std::istringstream single(
      "timestamp,variable,q20,q50,q80\n"
      "2020-01-01T06:00Z,wind,1,2,3\n2020-01-01T06:00Z,pv,0,0,1\n2020-01-01T06:00Z,demand,5,6,7\n"
      "2020-01-01T07:00Z,wind,2,3,4\n2020-01-01T07:00Z,pv,0,1,1\n2020-01-01T07:00Z,demand,5,6,8\n");
  LoadOptions opt;
  opt.wind_scale = 0.5;
  const ForecastArchive one = parse_forecasts(single, opt);
  REQUIRE(one.issues.size() == 1);
  const ForecastQuantiles& f = one.at(parse_timestamp("2020-01-01T06:00Z"));
  CHECK(f.hours() == 2);
  CHECK(f.at(Variable::Wind)(2, 1) == 2.0);
  CHECK(f.at(Variable::Demand)(2, 1) == 8.0);
  CHECK_THROWS_AS(one.at(parse_timestamp("2020-01-01T07:00Z")), ValidationError);

  ForecastArchive two;
  two.issues.push_back(ramp_forecast(4));
  ForecastQuantiles later = ramp_forecast(4);
  later.start = later.start + std::chrono::hours(6);
  two.issues.push_back(later);
  std::ostringstream out;
  write_forecasts(two, out);
  std::istringstream back(out.str());
  const ForecastArchive again = parse_forecasts(back);
  REQUIRE(again.issues.size() == 2);
  CHECK(again.issues[1].start == later.start);
  CHECK(again.issues[1].at(Variable::Pv) == later.at(Variable::Pv));
  CHECK(again.issues[0].window(1, 2).at(Variable::Demand) == two.issues[0].at(Variable::Demand).middleCols(1, 2));

  std::istringstream crossed("timestamp,variable,q20,q50,q80\n2020-01-01T06:00Z,wind,3,2,1\n");
  CHECK_THROWS_AS(parse_forecasts(crossed), ValidationError);
}

TEST_CASE("scenario: terminal node from daily means") {
  const StageLayout layout;
  const SystemSpec spec = microgrid();

  SUBCASE("daily means 1..100 give an interpolated median") {
    TimeSeriesSet h;
    const TimePoint t0 = parse_timestamp("2020-01-01T00:00Z");
    const int n = 100 * 24;
    h.wind.resize(n);
    h.pv.resize(n);
    h.demand.resize(n);
    for (int i = 0; i < n; ++i) {
      h.timestamps.push_back(t0 + std::chrono::hours(i));
      const double day = 1.0 + i / 24;
      // Hourly shape with zero mean on top of the daily level.
      h.demand[i] = day + ((i % 24) < 12 ? 0.5 : -0.5);
      h.wind[i] = 0.0;
      h.pv[i] = 0.0;
    }
    std::vector<double> days;
    for (int d = 1; d <= 100; ++d) days.push_back(d);
    CHECK(sample_quantile(days, 0.5) == doctest::Approx(50.5));
    const auto combos = terminal_combinations(h, 72);
    REQUIRE(combos.size() == 5);
    // Net production is -demand, so the central band is the median demand day.
    CHECK(combos[2].profile[2][0] == doctest::Approx(50.5));
    CHECK(combos[0].profile[2][0] == doctest::Approx(sample_quantile(days, 0.8)));
    CHECK(combos[4].profile[2][71] == doctest::Approx(sample_quantile(days, 0.2)));

    const ScenarioSet set = terminal_scenarios(h, layout, spec);
    REQUIRE(set.realizations.size() == 5);
    for (const auto& w : set.realizations) CHECK(w.hours() == 72);
    CHECK(set.total_probability() == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("constant history gives identical constant scenarios") {
    std::istringstream in(hourly_csv(24 * 40, 42.0, 1));
    const TimeSeriesSet h = parse_timeseries(in);
    const ScenarioSet set = terminal_scenarios(h, layout, spec);
    REQUIRE(set.realizations.size() == 5);
    for (const auto& w : set.realizations) {
      CHECK(w.vres_availability == set.realizations[0].vres_availability);
      CHECK(w.vres_availability(0, 0) == doctest::Approx(42.0));
      CHECK(w.demand == set.realizations[0].demand);
    }
  }

  SUBCASE("short history is rejected") {
    std::istringstream in(hourly_csv(24 * 29 + 23));
    CHECK_THROWS_AS(terminal_scenarios(parse_timeseries(in), layout, spec), ValidationError);
  }
}

TEST_CASE("scenario: layout validation") {
  StageLayout layout;
  CHECK(layout.in_horizon_hours() == 48);
  CHECK_NOTHROW(layout.validate());
  layout.roll_hours = 7;
  CHECK_THROWS_AS(layout.validate(), ValidationError);
  layout = StageLayout{};
  layout.durations[3] = 0;
  CHECK_THROWS_AS(layout.validate(), ValidationError);
}
