#include "mgsddp/scenario.hpp"

#include "mgsddp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

namespace mgsddp {

using Hours = std::chrono::hours;

double ScenarioSet::total_probability() const {
  double p = 0.0;
  for (const auto& w : realizations) p += w.probability;
  return p;
}

void check_scenarios(const ScenarioSet& set, int n_hours, double tolerance) {
  std::vector<std::string> issues;
  for (std::size_t i = 0; i < set.realizations.size(); ++i) {
    const auto& w = set.realizations[i];
    if (!(w.probability >= 0.0 && w.probability <= 1.0)) {
      issues.push_back("realization " + std::to_string(i) + ": probability outside [0, 1]");
    }
    if (w.hours() != n_hours || w.vres_availability.cols() != n_hours) {
      issues.push_back("realization " + std::to_string(i) + ": expected " +
                       std::to_string(n_hours) + " hours");
    }
  }
  if (std::abs(set.total_probability() - 1.0) > tolerance) {
    issues.push_back("probabilities sum to " + std::to_string(set.total_probability()));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

// ---------------------------------------------------------------------------
// Timestamps and CSV

namespace {

bool parse_int(std::string_view s, int& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

int find_column(const std::vector<std::string>& header, std::initializer_list<const char*> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (const char* n : names) {
      if (lower(header[i]) == n) return static_cast<int>(i);
    }
  }
  return -1;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  return in;
}

}  // namespace

TimePoint parse_timestamp(const std::string& raw) {
  std::string_view s = trim(raw);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const bool shape = s.size() >= 16 && s[4] == '-' && s[7] == '-' &&
                     (s[10] == 'T' || s[10] == ' ') && s[13] == ':';
  bool ok = shape && parse_int(s.substr(0, 4), y) && parse_int(s.substr(5, 2), mo) &&
            parse_int(s.substr(8, 2), d) && parse_int(s.substr(11, 2), h) &&
            parse_int(s.substr(14, 2), mi);
  if (ok && s.size() > 16) ok = s.size() == 19 && s[16] == ':' && parse_int(s.substr(17, 2), sec);
  const std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month(mo),
                                         std::chrono::day(d)};
  if (!ok || !date.ok() || h > 23 || mi > 59 || sec > 59) {
    throw ValidationError("invalid timestamp '" + raw + "'");
  }
  return std::chrono::sys_days(date) + Hours(h) + std::chrono::minutes(mi) +
         std::chrono::seconds(sec);
}

std::string format_timestamp(TimePoint t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day date(day);
  const auto rest = t - day;
  const auto h = std::chrono::duration_cast<Hours>(rest).count();
  const auto m = std::chrono::duration_cast<std::chrono::minutes>(rest).count() % 60;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02dZ", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(h), static_cast<int>(m));
  return buf;
}

TimeSeriesSet TimeSeriesSet::slice(Eigen::Index begin, Eigen::Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) {
    throw ValidationError("time series: slice outside the loaded range");
  }
  TimeSeriesSet out;
  out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + begin + count);
  out.wind = wind.segment(begin, count);
  out.pv = pv.segment(begin, count);
  out.demand = demand.segment(begin, count);
  return out;
}

TimeSeriesSet parse_timeseries(std::istream& in, const LoadOptions& options) {
  if (!(options.wind_scale >= 0.0)) throw ValidationError("wind scale must be >= 0");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("time series: empty input");
  const auto header = split(line);
  const int c_time = find_column(header, {"timestamp", "time", "datetime", "utc"});
  const int c_wind = find_column(header, {"wind_kw", "wind"});
  const int c_pv = find_column(header, {"pv_kw", "pv", "solar_kw", "solar"});
  const int c_demand = find_column(header, {"demand_kw", "demand", "load_kw", "load"});
  if (c_time < 0 || c_wind < 0 || c_pv < 0 || c_demand < 0) {
    throw ValidationError("time series: header must name timestamp, wind_kw, pv_kw and demand_kw");
  }

  std::vector<std::string> issues;
  std::vector<TimePoint> stamps;
  std::vector<double> wind, pv, demand;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (cells.size() != header.size()) {
      issues.push_back(where + "expected " + std::to_string(header.size()) + " fields");
      continue;
    }
    TimePoint t;
    try {
      t = parse_timestamp(cells[c_time]);
    } catch (const ValidationError&) {
      issues.push_back(where + "invalid timestamp '" + cells[c_time] + "'");
      continue;
    }
    double v[3];
    const int cols[3] = {c_wind, c_pv, c_demand};
    const char* names[3] = {"wind", "pv", "demand"};
    bool good = true;
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(cells[cols[i]], v[i])) {
        issues.push_back(where + names[i] + " value '" + cells[cols[i]] + "' is not a number");
        good = false;
      } else if (v[i] < 0.0) {
        issues.push_back(where + "negative " + names[i] + " value");
        good = false;
      }
    }
    if (!stamps.empty()) {
      if (t <= stamps.back()) {
        issues.push_back(where + "timestamp " + format_timestamp(t) + " is not after the previous row");
        good = false;
      } else if (t != stamps.back() + Hours(1)) {
        issues.push_back(where + "gap: expected " + format_timestamp(stamps.back() + Hours(1)) +
                         ", found " + format_timestamp(t));
      }
    }
    if (!good) continue;
    stamps.push_back(t);
    wind.push_back(v[0] * options.wind_scale);
    pv.push_back(v[1]);
    demand.push_back(v[2]);
  }
  if (stamps.empty() && issues.empty()) issues.push_back("time series: no data rows");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  TimeSeriesSet out;
  out.timestamps = std::move(stamps);
  out.wind = Eigen::Map<Eigen::VectorXd>(wind.data(), static_cast<Eigen::Index>(wind.size()));
  out.pv = Eigen::Map<Eigen::VectorXd>(pv.data(), static_cast<Eigen::Index>(pv.size()));
  out.demand = Eigen::Map<Eigen::VectorXd>(demand.data(), static_cast<Eigen::Index>(demand.size()));
  return out;
}

TimeSeriesSet load_timeseries(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in = open(path);
  try {
    return parse_timeseries(in, options);
  } catch (const ValidationError& e) {
    std::vector<std::string> issues;
    for (const auto& i : e.issues()) issues.push_back(path.string() + ": " + i);
    throw ValidationError(std::move(issues));
  }
}

void write_timeseries(const TimeSeriesSet& data, std::ostream& out) {
  out << "timestamp,wind_kw,pv_kw,demand_kw\n";
  char buf[128];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", data.wind[i], data.pv[i], data.demand[i]);
    out << format_timestamp(data.timestamps[i]) << buf;
  }
}

// ---------------------------------------------------------------------------
// Forecasts

const char* to_string(Variable v) {
  switch (v) {
    case Variable::Wind: return "wind";
    case Variable::Pv: return "pv";
    case Variable::Demand: return "demand";
  }
  return "?";
}

ForecastQuantiles ForecastQuantiles::window(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > hours()) {
    throw ValidationError("forecast: window outside the forecast horizon");
  }
  ForecastQuantiles out;
  out.start = start + Hours(begin);
  for (int v = 0; v < 3; ++v) out.values[v] = values[v].middleCols(begin, count);
  return out;
}

void check_quantiles(const ForecastQuantiles& q) {
  std::vector<std::string> issues;
  for (Variable v : kVariables) {
    const Eigen::MatrixXd& m = q.at(v);
    if (m.rows() != 3 || m.cols() != q.hours()) {
      issues.push_back(std::string(to_string(v)) + ": quantile matrix has the wrong shape");
      continue;
    }
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      if (!(m(0, t) >= 0.0) || !(m(0, t) <= m(1, t)) || !(m(1, t) <= m(2, t)) ||
          !std::isfinite(m(2, t))) {
        issues.push_back(std::string(to_string(v)) + " hour " + std::to_string(t) +
                         ": quantiles must satisfy 0 <= q20 <= q50 <= q80");
      }
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

const ForecastQuantiles& ForecastArchive::at(TimePoint t) const {
  const auto it = std::lower_bound(issues.begin(), issues.end(), t,
                                   [](const ForecastQuantiles& f, TimePoint x) { return f.start < x; });
  if (it == issues.end() || it->start != t) {
    throw ValidationError("no forecast starting at " + format_timestamp(t));
  }
  return *it;
}

ForecastArchive parse_forecasts(std::istream& in, const LoadOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("forecasts: empty input");
  const auto header = split(line);
  const int c_issued = find_column(header, {"issued", "issue_time"});
  const int c_time = find_column(header, {"timestamp", "time"});
  const int c_var = find_column(header, {"variable"});
  const int c_q[3] = {find_column(header, {"q20"}), find_column(header, {"q50"}),
                      find_column(header, {"q80"})};
  if (c_time < 0 || c_var < 0 || c_q[0] < 0 || c_q[1] < 0 || c_q[2] < 0) {
    throw ValidationError("forecasts: header must name timestamp, variable, q20, q50 and q80");
  }

  struct Row {
    int line;
    TimePoint t;
    int var;
    double q[3];
  };
  std::map<TimePoint, std::vector<Row>> groups;
  std::vector<std::string> issues;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (cells.size() != header.size()) {
      issues.push_back(where + "expected " + std::to_string(header.size()) + " fields");
      continue;
    }
    Row r{row, {}, -1, {}};
    TimePoint issued{};
    try {
      r.t = parse_timestamp(cells[c_time]);
      if (c_issued >= 0) issued = parse_timestamp(cells[c_issued]);
    } catch (const ValidationError& e) {
      issues.push_back(where + e.what());
      continue;
    }
    const std::string var = lower(cells[c_var]);
    for (Variable v : kVariables) {
      if (var == to_string(v)) r.var = static_cast<int>(v);
    }
    if (r.var < 0) {
      issues.push_back(where + "unknown variable '" + cells[c_var] + "'");
      continue;
    }
    bool good = true;
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(cells[c_q[i]], r.q[i])) {
        issues.push_back(where + "quantile '" + cells[c_q[i]] + "' is not a number");
        good = false;
      }
      if (r.var == static_cast<int>(Variable::Wind)) r.q[i] *= options.wind_scale;
    }
    if (good && !(r.q[0] >= 0.0 && r.q[0] <= r.q[1] && r.q[1] <= r.q[2])) {
      issues.push_back(where + "quantiles must satisfy 0 <= q20 <= q50 <= q80");
      good = false;
    }
    if (good) groups[issued].push_back(r);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  ForecastArchive archive;
  for (auto& [issued, rows] : groups) {
    TimePoint start = rows.front().t, end = rows.front().t;
    for (const Row& r : rows) {
      start = std::min(start, r.t);
      end = std::max(end, r.t);
    }
    const auto n = static_cast<Eigen::Index>((end - start) / Hours(1)) + 1;
    ForecastQuantiles f;
    f.start = start;
    std::array<std::vector<int>, 3> seen;
    for (int v = 0; v < 3; ++v) {
      f.values[v] = Eigen::MatrixXd::Zero(3, n);
      seen[v].assign(static_cast<std::size_t>(n), 0);
    }
    for (const Row& r : rows) {
      const auto off = r.t - start;
      if (off % Hours(1) != std::chrono::seconds(0)) {
        issues.push_back("row " + std::to_string(r.line) + ": timestamp is not on the hourly grid");
        continue;
      }
      const auto t = static_cast<Eigen::Index>(off / Hours(1));
      if (seen[r.var][t]++) {
        issues.push_back("row " + std::to_string(r.line) + ": duplicate " +
                         to_string(static_cast<Variable>(r.var)) + " entry for " +
                         format_timestamp(r.t));
      }
      for (int i = 0; i < 3; ++i) f.values[r.var](i, t) = r.q[i];
    }
    for (int v = 0; v < 3; ++v) {
      for (Eigen::Index t = 0; t < n; ++t) {
        if (!seen[v][t]) {
          issues.push_back("forecast starting " + format_timestamp(start) + ": missing " +
                           to_string(static_cast<Variable>(v)) + " at " +
                           format_timestamp(start + Hours(t)));
        }
      }
    }
    archive.issues.push_back(std::move(f));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  std::sort(archive.issues.begin(), archive.issues.end(),
            [](const ForecastQuantiles& a, const ForecastQuantiles& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < archive.issues.size(); ++i) {
    if (archive.issues[i].start == archive.issues[i - 1].start) {
      throw ValidationError("two forecasts start at " + format_timestamp(archive.issues[i].start));
    }
  }
  return archive;
}

ForecastArchive load_forecasts(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in = open(path);
  try {
    return parse_forecasts(in, options);
  } catch (const ValidationError& e) {
    std::vector<std::string> issues;
    for (const auto& i : e.issues()) issues.push_back(path.string() + ": " + i);
    throw ValidationError(std::move(issues));
  }
}

void write_forecasts(const ForecastArchive& archive, std::ostream& out) {
  out << "issued,timestamp,variable,q20,q50,q80\n";
  char buf[128];
  for (const ForecastQuantiles& f : archive.issues) {
    const std::string issued = format_timestamp(f.start);
    for (int t = 0; t < f.hours(); ++t) {
      const std::string stamp = format_timestamp(f.start + Hours(t));
      for (Variable v : kVariables) {
        const Eigen::MatrixXd& m = f.at(v);
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", m(0, t), m(1, t), m(2, t));
        out << issued << ',' << stamp << ',' << to_string(v) << buf;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Combination and reduction

double Combination::net_production() const {
  return profile[0].sum() + profile[1].sum() - profile[2].sum();
}

std::vector<Combination> combine_quantiles(const ForecastQuantiles& q) {
  check_quantiles(q);
  std::vector<Combination> out;
  out.reserve(27);
  for (int lw = 0; lw < 3; ++lw) {
    for (int lp = 0; lp < 3; ++lp) {
      for (int ld = 0; ld < 3; ++ld) {
        Combination c;
        c.level = {lw, lp, ld};
        for (int v = 0; v < 3; ++v) c.profile[v] = q.values[v].row(c.level[v]).transpose();
        c.probability = kQuantileWeights[lw] * kQuantileWeights[lp] * kQuantileWeights[ld];
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::vector<Combination> reduce_by_net_production(std::vector<Combination> combos) {
  if (combos.empty()) throw ValidationError("reduction: no combinations");
  double mass = 0.0;
  for (const auto& c : combos) mass += c.probability;
  if (std::abs(mass - 1.0) > 1e-9) throw ValidationError("reduction: probabilities do not sum to one");

  std::vector<double> net(combos.size());
  std::vector<std::size_t> order(combos.size());
  for (std::size_t i = 0; i < combos.size(); ++i) net[i] = combos[i].net_production();
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return net[a] < net[b]; });

  std::vector<Combination> out;
  double band_low = 0.0;
  for (double band : kBandProbabilities) {
    const double mid = band_low + 0.5 * band;
    double cum = 0.0;
    std::size_t pick = order.back();
    for (std::size_t i : order) {
      cum += combos[i].probability;
      if (cum >= mid - 1e-12) {
        pick = i;
        break;
      }
    }
    Combination c = combos[pick];
    c.probability = band;
    out.push_back(std::move(c));
    band_low += band;
  }
  return out;
}

namespace {

double share_of(const SystemSpec& spec, std::size_t r) {
  double total = 0.0;
  for (const auto& v : spec.vres) {
    if (v.source == spec.vres[r].source) total += v.capacity;
  }
  return total > 0.0 ? spec.vres[r].capacity / total : 0.0;
}

StageRealization map_profiles(const Eigen::VectorXd& wind, const Eigen::VectorXd& pv,
                              const Eigen::VectorXd& demand, double probability,
                              const SystemSpec& spec) {
  const auto n = demand.size();
  StageRealization w;
  w.probability = probability;
  w.vres_availability.resize(static_cast<Eigen::Index>(spec.vres.size()), n);
  for (std::size_t r = 0; r < spec.vres.size(); ++r) {
    const VresSpec& unit = spec.vres[r];
    const double f = share_of(spec, r);
    const Eigen::VectorXd& src = unit.source == VresSource::Wind ? wind : pv;
    w.vres_availability.row(static_cast<Eigen::Index>(r)) =
        (src * f).cwiseMax(0.0).cwiseMin(unit.capacity).transpose();
  }
  w.demand.resize(static_cast<Eigen::Index>(spec.loads.size()), n);
  for (std::size_t d = 0; d < spec.loads.size(); ++d) {
    w.demand.row(static_cast<Eigen::Index>(d)) = (demand * spec.loads[d].share).cwiseMax(0.0).transpose();
  }
  return w;
}

}  // namespace

ScenarioSet to_scenarios(const std::vector<Combination>& combos, const SystemSpec& spec) {
  ScenarioSet set;
  for (const Combination& c : combos) {
    set.realizations.push_back(map_profiles(c.profile[0], c.profile[1], c.profile[2], c.probability, spec));
  }
  return set;
}

ScenarioSet median_scenario(const ForecastQuantiles& q, const SystemSpec& spec) {
  check_quantiles(q);
  ScenarioSet set;
  set.realizations.push_back(map_profiles(q.at(Variable::Wind).row(1).transpose(),
                                          q.at(Variable::Pv).row(1).transpose(),
                                          q.at(Variable::Demand).row(1).transpose(), 1.0, spec));
  return set;
}

StageRealization observed_realization(const TimeSeriesSet& data, Eigen::Index begin, int n_hours,
                                      const SystemSpec& spec) {
  if (begin < 0 || n_hours < 1 || begin + n_hours > data.size()) {
    throw ValidationError("observations do not cover hours " + std::to_string(begin) + ".." +
                          std::to_string(begin + n_hours - 1));
  }
  return map_profiles(data.wind.segment(begin, n_hours), data.pv.segment(begin, n_hours),
                      data.demand.segment(begin, n_hours), 1.0, spec);
}

// ---------------------------------------------------------------------------
// Terminal node

double sample_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

int StageLayout::in_horizon_hours() const {
  return std::accumulate(durations.begin(), durations.end() - (durations.empty() ? 0 : 1), 0);
}

void StageLayout::validate() const {
  std::vector<std::string> issues;
  if (durations.empty()) issues.push_back("layout: at least one node is required");
  for (int d : durations) {
    if (d < 1) issues.push_back("layout: node durations must be positive");
  }
  if (!(discount >= 0.0 && discount < 1.0)) issues.push_back("layout: discount outside [0, 1)");
  if (roll_hours < 1 || (!durations.empty() && roll_hours > durations.front())) {
    issues.push_back("layout: roll horizon must lie in [1, first node duration]");
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

std::vector<Combination> terminal_combinations(const TimeSeriesSet& history, int n_hours) {
  std::map<std::chrono::sys_days, std::array<double, 4>> days;  // sums and count
  for (Eigen::Index i = 0; i < history.size(); ++i) {
    auto& d = days[std::chrono::floor<std::chrono::days>(history.timestamps[i])];
    d[0] += history.wind[i];
    d[1] += history.pv[i];
    d[2] += history.demand[i];
    d[3] += 1.0;
  }
  std::array<std::vector<double>, 3> means;
  for (const auto& [day, d] : days) {
    if (d[3] < 24.0) continue;  // partial days would bias the means
    for (int v = 0; v < 3; ++v) means[v].push_back(d[v] / d[3]);
  }
  if (means[0].size() < 30) {
    throw ValidationError("terminal scenarios need at least 30 full days of history, found " +
                          std::to_string(means[0].size()));
  }
  ForecastQuantiles q;
  q.start = history.timestamps.front();
  for (int v = 0; v < 3; ++v) {
    q.values[v].resize(3, n_hours);
    for (int l = 0; l < 3; ++l) q.values[v].row(l).setConstant(sample_quantile(means[v], kQuantileLevels[l]));
  }
  return reduce_by_net_production(combine_quantiles(q));
}

ScenarioSet terminal_scenarios(const TimeSeriesSet& history, const StageLayout& layout,
                               const SystemSpec& spec) {
  layout.validate();
  return to_scenarios(terminal_combinations(history, layout.durations.back()), spec);
}

}  // namespace mgsddp
