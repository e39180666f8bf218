#include "mgsddp/sim.hpp"

#include "mgsddp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace mgsddp {

using nlohmann::json;

char to_char(Method m) { return static_cast<char>('a' + static_cast<int>(m)); }

Method method_from_char(char c) {
  if (c >= 'A' && c <= 'F') c = static_cast<char>(c - 'A' + 'a');
  if (c < 'a' || c > 'f') throw ValidationError(std::string("method must be one of a..f, got '") + c + "'");
  return static_cast<Method>(c - 'a');
}

StageFlags method_flags(Method m) {
  switch (m) {
    case Method::A: return {true, true};
    case Method::B: return {false, false};
    case Method::C: return {false, false};
    case Method::D: return {false, true};
    case Method::E: return {true, false};
    case Method::F: return {true, true};
  }
  return {};
}

SystemSpec named_case(int number) {
  if (number < 1 || number > 3) throw ValidationError("case must be 1, 2 or 3");
  SystemSpec spec;
  spec.generators.push_back({"diesel", number == 2 ? 75.0 : 25.0, 0.1});
  spec.vres.push_back({"wind", 135.0, VresSource::Wind});
  spec.vres.push_back({"pv", 86.0, VresSource::Pv});
  spec.loads.push_back({"demand", 5.0, 1.0});
  StorageSpec battery;
  battery.name = "battery";
  battery.soc_max = number == 3 ? 1000.0 : 500.0;
  battery.p_charge_max = battery.p_discharge_max = 500.0;
  battery.eta_c = battery.eta_d = 0.96;
  battery.replacement_cost_per_kwh = 100.0;
  battery.degradation = DegradationModel{};
  spec.storages.push_back(battery);
  if (number != 3) {
    StorageSpec h2;
    h2.name = "hydrogen";
    h2.soc_max = 3300.0;
    h2.p_charge_max = 55.0;
    h2.p_discharge_max = 100.0;
    h2.eta_c = 0.64;
    h2.eta_d = 0.5;
    spec.storages.push_back(h2);
  }
  return spec;
}

void SimulationConfig::validate() const {
  std::vector<std::string> issues;
  try {
    validate_system(system);
  } catch (const ValidationError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  try {
    layout.validate();
  } catch (const ValidationError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!layout.durations.empty() && layout.roll_hours != layout.durations.front()) {
    issues.push_back("layout: the simulator rolls by exactly the first node duration");
  }
  if (iterations < 1) issues.push_back("iterations must be positive");
  if (!(wind_scale >= 0.0)) issues.push_back("wind_scale must be >= 0");
  if (!(initial_soc >= 0.0 && initial_soc <= 1.0)) issues.push_back("initial_soc must lie in [0, 1]");
  if (hours < 0) issues.push_back("hours must be >= 0");
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

// ---------------------------------------------------------------------------
// Configuration documents

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  const auto it = doc.find(key);
  return it == doc.end() ? fallback : it->get<T>();
}

json fade_to_json(const DegradationModel& m) {
  return {{"k_delta", m.dod.k_delta},
          {"k_sigma1", m.soc.k_sigma1},
          {"k_sigma2", m.soc.k_sigma2},
          {"sigma_ref", m.soc.sigma_ref_exp},
          {"flat_low", m.soc.flat_low},
          {"flat_high", m.soc.flat_high},
          {"dod_segments", m.dod_segments},
          {"soc_up_segments", m.soc_up_segments},
          {"soc_dn_segments", m.soc_dn_segments}};
}

DegradationModel fade_from_json(const json& doc) {
  DegradationModel m;
  m.dod.k_delta = get_or(doc, "k_delta", m.dod.k_delta);
  m.soc.k_sigma1 = get_or(doc, "k_sigma1", m.soc.k_sigma1);
  m.soc.k_sigma2 = get_or(doc, "k_sigma2", m.soc.k_sigma2);
  m.soc.sigma_ref_exp = get_or(doc, "sigma_ref", m.soc.sigma_ref_exp);
  m.soc.flat_low = get_or(doc, "flat_low", m.soc.flat_low);
  m.soc.flat_high = get_or(doc, "flat_high", m.soc.flat_high);
  m.dod_segments = get_or(doc, "dod_segments", m.dod_segments);
  m.soc_up_segments = get_or(doc, "soc_up_segments", m.soc_up_segments);
  m.soc_dn_segments = get_or(doc, "soc_dn_segments", m.soc_dn_segments);
  return m;
}

}  // namespace

json system_to_json(const SystemSpec& spec) {
  json doc = {{"generators", json::array()}, {"vres", json::array()}, {"loads", json::array()},
              {"storages", json::array()}};
  for (const auto& g : spec.generators) {
    doc["generators"].push_back({{"name", g.name}, {"p_max", g.p_max}, {"marginal_cost", g.marginal_cost}});
  }
  for (const auto& v : spec.vres) {
    doc["vres"].push_back({{"name", v.name},
                           {"capacity", v.capacity},
                           {"source", v.source == VresSource::Wind ? "wind" : "pv"}});
  }
  for (const auto& l : spec.loads) {
    doc["loads"].push_back({{"name", l.name}, {"shed_cost", l.shed_cost}, {"share", l.share}});
  }
  for (const auto& s : spec.storages) {
    json e = {{"name", s.name},
              {"soc_min", s.soc_min},
              {"soc_max", s.soc_max},
              {"p_charge_max", s.p_charge_max},
              {"p_discharge_max", s.p_discharge_max},
              {"eta_c", s.eta_c},
              {"eta_d", s.eta_d},
              {"replacement_cost_per_kwh", s.replacement_cost_per_kwh}};
    if (s.degradation) e["degradation"] = fade_to_json(*s.degradation);
    doc["storages"].push_back(std::move(e));
  }
  return doc;
}

SystemSpec system_from_json(const json& doc) {
  SystemSpec spec;
  try {
    for (const auto& g : doc.value("generators", json::array())) {
      spec.generators.push_back({g.at("name").get<std::string>(), g.at("p_max").get<double>(),
                                 g.at("marginal_cost").get<double>()});
    }
    for (const auto& v : doc.value("vres", json::array())) {
      const std::string source = v.value("source", "wind");
      if (source != "wind" && source != "pv") {
        throw ValidationError("vres." + v.at("name").get<std::string>() + ".source: must be wind or pv");
      }
      spec.vres.push_back({v.at("name").get<std::string>(), v.at("capacity").get<double>(),
                           source == "wind" ? VresSource::Wind : VresSource::Pv});
    }
    for (const auto& l : doc.value("loads", json::array())) {
      spec.loads.push_back({l.at("name").get<std::string>(), l.at("shed_cost").get<double>(),
                            get_or(l, "share", 1.0)});
    }
    for (const auto& e : doc.value("storages", json::array())) {
      StorageSpec s;
      s.name = e.at("name").get<std::string>();
      s.soc_min = get_or(e, "soc_min", 0.0);
      s.soc_max = e.at("soc_max").get<double>();
      s.p_charge_max = e.at("p_charge_max").get<double>();
      s.p_discharge_max = e.at("p_discharge_max").get<double>();
      s.eta_c = get_or(e, "eta_c", 1.0);
      s.eta_d = get_or(e, "eta_d", 1.0);
      s.replacement_cost_per_kwh = get_or(e, "replacement_cost_per_kwh", 0.0);
      if (e.contains("degradation") && !e["degradation"].is_null()) {
        s.degradation = fade_from_json(e["degradation"]);
      }
      spec.storages.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("system: ") + e.what());
  }
  return spec;
}

SimulationConfig config_from_json(const json& doc) {
  SimulationConfig c;
  try {
    if (doc.contains("system")) {
      c.system = system_from_json(doc["system"]);
      c.case_number = 0;
    } else {
      c.case_number = get_or(doc, "case", 2);
      c.system = named_case(c.case_number);
    }
    const std::string method = get_or<std::string>(doc, "method", "f");
    if (method.size() != 1) throw ValidationError("method must be a single letter a..f");
    c.method = method_from_char(method[0]);
    if (doc.contains("layout")) {
      const json& l = doc["layout"];
      c.layout.durations = get_or(l, "durations", c.layout.durations);
      c.layout.discount = get_or(l, "discount", c.layout.discount);
      c.layout.roll_hours = get_or(l, "roll_hours", c.layout.roll_hours);
    }
    c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
    c.iterations = get_or(doc, "iterations", c.iterations);
    c.wind_scale = get_or(doc, "wind_scale", c.wind_scale);
    c.initial_soc = get_or(doc, "initial_soc", c.initial_soc);
    if (doc.contains("start")) c.start = parse_timestamp(doc["start"].get<std::string>());
    c.hours = get_or(doc, "hours", c.hours);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const SimulationConfig& c) {
  json doc = {{"method", std::string(1, to_char(c.method))},
              {"layout",
               {{"durations", c.layout.durations},
                {"discount", c.layout.discount},
                {"roll_hours", c.layout.roll_hours}}},
              {"seed", c.seed},
              {"iterations", c.iterations},
              {"wind_scale", c.wind_scale},
              {"initial_soc", c.initial_soc},
              {"hours", c.hours}};
  if (c.case_number > 0) {
    doc["case"] = c.case_number;
  } else {
    doc["system"] = system_to_json(c.system);
  }
  if (c.start) doc["start"] = format_timestamp(*c.start);
  return doc;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

// ---------------------------------------------------------------------------
// Metrics

MetricsReport accumulate_metrics(const std::vector<RealizedStep>& steps, const SystemSpec& spec,
                                 const TableSet& tables, const StateVector& initial, double dt) {
  MetricsReport r;
  const StateLayout layout = state_layout(spec);
  const int n_store = static_cast<int>(spec.storages.size());
  int total = 0;
  for (const auto& s : steps) total += static_cast<int>(s.solution.generation.cols());

  SimulationTraces& tr = r.traces;
  tr.soc_max.resize(n_store);
  for (int e = 0; e < n_store; ++e) {
    tr.storage_names.push_back(spec.storages[e].name);
    tr.soc_max[e] = spec.storages[e].soc_max;
  }
  for (Eigen::VectorXd* v : {&tr.generation, &tr.vres_available, &tr.vres_used, &tr.demand, &tr.shedding}) {
    v->setZero(total);
  }
  for (Eigen::MatrixXd* m : {&tr.charge, &tr.discharge, &tr.soc}) m->setZero(n_store, total);

  std::vector<std::optional<DodLadder>> ladders(n_store);
  for (int e = 0; e < n_store; ++e) {
    if (!tables[e] || tables[e]->dod_segments() == 0) continue;
    const int k = layout.segments[e];
    ladders[e].emplace(tables[e]->dod_costs, spec.storages[e].usable() / k, spec.storages[e].eta_d,
                       Eigen::VectorXd(initial.segment(layout.offset[e], k)));
  }

  int h = 0;
  for (const auto& step : steps) {
    const StageSolution& sol = step.solution;
    const auto hours = static_cast<int>(sol.generation.cols());
    for (int t = 0; t < hours; ++t, ++h) {
      tr.timestamps.push_back(step.start + std::chrono::hours(t));
      for (std::size_t g = 0; g < spec.generators.size(); ++g) {
        const double p = sol.generation(static_cast<Eigen::Index>(g), t);
        tr.generation[h] += p;
        r.diesel_cost += spec.generators[g].marginal_cost * p * dt;
      }
      for (std::size_t d = 0; d < spec.loads.size(); ++d) {
        const double s = sol.shedding(static_cast<Eigen::Index>(d), t);
        tr.shedding[h] += s;
        r.shedding_cost += spec.loads[d].shed_cost * s * dt;
      }
      tr.vres_available[h] = step.observed.vres_availability.col(t).sum();
      tr.vres_used[h] = sol.vres.col(t).sum();
      tr.demand[h] = step.observed.demand.col(t).sum();
      for (int e = 0; e < n_store; ++e) {
        const StorageSpec& st = spec.storages[e];
        const StorageTrace& s = sol.storage[e];
        const double c = s.charge.col(t).sum();
        const double d = s.discharge.col(t).sum();
        const double soc = st.soc_min + s.soc.col(t).sum();
        tr.charge(e, h) = c;
        tr.discharge(e, h) = d;
        tr.soc(e, h) = soc;
        if (ladders[e]) r.dod_cost += ladders[e]->step(st.eta_c * c * dt, d * dt / st.eta_d);
        if (tables[e]) {
          const SocCost cost = soc_holding_cost(soc, *tables[e], dt);
          r.soc_up_cost += cost.up;
          r.soc_dn_cost += cost.dn;
        }
        const bool battery = tables[e].has_value();
        (battery ? r.battery_charge_mwh : r.h2_charge_mwh) += c * dt / 1000.0;
        (battery ? r.battery_discharge_mwh : r.h2_discharge_mwh) += d * dt / 1000.0;
      }
      r.vres_mwh += tr.vres_used[h] * dt / 1000.0;
    }
  }
  r.hours = total * dt;
  r.total_cost = r.shedding_cost + r.diesel_cost + r.dod_cost + r.soc_up_cost + r.soc_dn_cost;
  if (r.hours > 0.0) r.lifetime_years = estimate_lifetime(r, spec).years;
  return r;
}

LifetimeEstimate estimate_lifetime(double priced, double window_hours, const SocFade<double>& fade,
                                   double replacement_total) {
  if (!(window_hours > 0.0)) throw ValidationError("lifetime: the window must be longer than zero hours");
  if (!(replacement_total > 0.0)) throw ValidationError("lifetime: replacement cost must be positive");
  LifetimeEstimate out;
  // Calendar fade at the level where the calendar life was calibrated.
  const double calendar = 8760.0 * fade.exponential(fade.sigma_ref_exp);
  out.annual_fade = calendar + priced * (8760.0 / window_hours) / replacement_total;
  out.years = 1.0 / out.annual_fade;
  return out;
}

LifetimeEstimate estimate_lifetime(const MetricsReport& report, const SystemSpec& spec) {
  double replacement = 0.0;
  const SocFade<double>* fade = nullptr;
  for (const auto& s : spec.storages) {
    if (!s.degradation) continue;
    replacement += s.soc_max * s.replacement_cost_per_kwh;
    if (!fade) fade = &s.degradation->soc;
  }
  if (!fade || replacement <= 0.0) return {};
  return estimate_lifetime(report.degradation_cost(), report.hours, *fade, replacement);
}

// ---------------------------------------------------------------------------
// Rolling horizon

PolicyGraph roll_graph(const SimulationConfig& config, const ForecastQuantiles& forecast,
                       const ScenarioSet& terminal) {
  const StageLayout& layout = config.layout;
  const bool deterministic = config.method == Method::B;
  const StageFlags flags = method_flags(config.method);
  if (forecast.hours() < layout.in_horizon_hours()) {
    throw ValidationError("forecast issued " + format_timestamp(forecast.start) + " covers " +
                          std::to_string(forecast.hours()) + " h, the in-horizon nodes need " +
                          std::to_string(layout.in_horizon_hours()) + " h");
  }
  PolicyGraph graph;
  graph.cyclic = true;
  graph.discount = layout.discount;
  int offset = 0;
  for (std::size_t s = 0; s + 1 < layout.durations.size(); ++s) {
    const int hours = layout.durations[s];
    const ForecastQuantiles window = forecast.window(offset, hours);
    PolicyNode node;
    node.hours = hours;
    node.flags = flags;
    node.scenarios = deterministic ? median_scenario(window, config.system)
                                   : to_scenarios(reduce_by_net_production(combine_quantiles(window)),
                                                  config.system);
    graph.nodes.push_back(std::move(node));
    offset += hours;
  }
  PolicyNode last;
  last.hours = layout.durations.back();
  last.flags = flags;
  if (deterministic) {
    // The central band holds the median of the daily means.
    StageRealization w = terminal.realizations.at(terminal.realizations.size() / 2);
    w.probability = 1.0;
    last.scenarios.realizations.push_back(std::move(w));
  } else {
    last.scenarios = terminal;
  }
  graph.nodes.push_back(std::move(last));
  return graph;
}

PolicyGraph climatology_graph(const SimulationConfig& config, const TimeSeriesSet& history) {
  config.validate();
  PolicyGraph graph;
  graph.cyclic = true;
  graph.discount = config.layout.discount;
  const StageFlags flags = method_flags(config.method);
  for (int hours : config.layout.durations) {
    PolicyNode node;
    node.hours = hours;
    node.flags = flags;
    node.scenarios = to_scenarios(terminal_combinations(history, hours), config.system);
    if (config.method == Method::B) {
      StageRealization w = node.scenarios.realizations.at(node.scenarios.realizations.size() / 2);
      w.probability = 1.0;
      node.scenarios.realizations = {std::move(w)};
    }
    graph.nodes.push_back(std::move(node));
  }
  return graph;
}

namespace {

Eigen::Index index_of(const TimeSeriesSet& data, TimePoint t) {
  const auto it = std::lower_bound(data.timestamps.begin(), data.timestamps.end(), t);
  if (it == data.timestamps.end() || *it != t) {
    throw ValidationError("no observation at " + format_timestamp(t));
  }
  return it - data.timestamps.begin();
}

std::uint64_t roll_seed(std::uint64_t seed, int roll) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(roll + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

StateVector initial_for(const SimulationConfig& config) {
  return initial_state(config.system, config.initial_soc);
}

}  // namespace

MetricsReport run_rolling_horizon(const SimulationConfig& config, const SimulationInputs& inputs) {
  config.validate();
  const TimeSeriesSet& data = inputs.data;
  if (data.size() == 0) throw ValidationError("simulation: no observations");
  const Eigen::Index begin = config.start ? index_of(data, *config.start) : 0;
  const int roll = config.layout.roll_hours;
  const auto available = static_cast<int>(data.size() - begin);
  int hours = config.hours > 0 ? config.hours : available - available % roll;
  if (config.method != Method::A) hours -= hours % roll;
  if (hours < 1 || hours > available) {
    throw ValidationError("simulation: the window needs " + std::to_string(hours) + " h, " +
                          std::to_string(available) + " h observed");
  }

  const TableSet tables = make_table_set(config.system);
  const StateVector initial = initial_for(config);
  std::vector<RealizedStep> steps;

  // Unpriced DOD segments only split the same total, so the optimizer gets a
  // single segment per storage; metrics still replay the full ladder.
  SystemSpec model_spec = config.system;
  if (!method_flags(config.method).dod) {
    for (StorageSpec& st : model_spec.storages) {
      if (st.degradation) st.degradation->dod_segments = 1;
    }
  }
  const TableSet model_tables = make_table_set(model_spec);
  const StateVector model_initial = initial_state(model_spec, config.initial_soc);

  if (config.method == Method::A) {
    StageModel model(config.system, tables, hours, 1.0, method_flags(Method::A));
    StageRealization w = observed_realization(data, begin, hours, config.system);
    model.apply(w);
    model.fix_state(initial);
    const LpSolution s = model.solve();
    if (!s.optimal()) {
      throw SolveError("perfect-information LP over " + std::to_string(hours) + " h: " +
                       to_string(s.status) + " " + s.diagnostics);
    }
    steps.push_back({data.timestamps[begin], std::move(w), model.extract(s)});
  } else {
    const ScenarioSet terminal = terminal_scenarios(data, config.layout, config.system);
    StateVector x = model_initial;
    for (int r = 0; r * roll < hours; ++r) {
      const Eigen::Index at = begin + static_cast<Eigen::Index>(r) * roll;
      const TimePoint t = data.timestamps[at];
      try {
        const PolicyGraph graph = roll_graph(config, inputs.forecasts.at(t), terminal);
        Sddp sddp(graph, model_spec, model_tables);
        sddp.train(x, config.iterations, roll_seed(config.seed, r));
        StageRealization w = observed_realization(data, at, roll, config.system);
        StageSolution sol = sddp.evaluate_stage(0, x, w);
        x = sol.outgoing_state;
        steps.push_back({t, std::move(w), std::move(sol)});
      } catch (const SolveError& e) {
        throw SolveError("roll at " + format_timestamp(t) + ": " + e.what());
      }
    }
  }

  MetricsReport report = accumulate_metrics(steps, config.system, tables, initial);
  report.case_number = config.case_number;
  report.method = to_char(config.method);
  report.label = (config.case_number > 0 ? std::to_string(config.case_number) : std::string("custom")) +
                 report.method;
  return report;
}

}  // namespace mgsddp
