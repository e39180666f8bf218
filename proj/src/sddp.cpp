#include "mgsddp/sddp.hpp"

#include "mgsddp/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>

namespace mgsddp {

void PolicyGraph::validate() const {
  std::vector<std::string> issues;
  if (nodes.empty()) issues.push_back("policy graph: at least one node is required");
  if (!(discount >= 0.0 && discount < 1.0)) issues.push_back("policy graph: discount outside [0, 1)");
  if (!(dt_hours > 0.0)) issues.push_back("policy graph: step length must be positive");
  for (std::size_t s = 0; s < nodes.size(); ++s) {
    const PolicyNode& n = nodes[s];
    if (n.hours < 1) issues.push_back("node " + std::to_string(s) + ": hours must be positive");
    if (n.scenarios.realizations.empty()) {
      issues.push_back("node " + std::to_string(s) + ": no realizations");
      continue;
    }
    try {
      check_scenarios(n.scenarios, n.hours);
    } catch (const ValidationError& e) {
      for (const auto& i : e.issues()) issues.push_back("node " + std::to_string(s) + ": " + i);
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

std::size_t CutPool::total() const {
  std::size_t n = 0;
  for (const auto& c : cuts) n += c.size();
  return n;
}

double CutPool::evaluate(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                         double theta_min) const {
  double best = theta_min;
  for (const Cut& c : cuts[node]) best = std::max(best, c.value(x));
  return best;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int sample_index(const std::vector<double>& probabilities, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the accumulated mass: take the last positive entry.
  for (std::size_t i = probabilities.size(); i-- > 0;) {
    if (probabilities[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

// ---------------------------------------------------------------------------

Sddp::Sddp(PolicyGraph graph, SystemSpec spec, TableSet tables, SddpOptions options)
    : graph_(std::move(graph)),
      spec_(std::move(spec)),
      tables_(std::move(tables)),
      options_(options) {
  graph_.validate();
  validate_system(spec_);
  for (const PolicyNode& n : graph_.nodes) {
    models_.emplace_back(spec_, tables_, n.hours, graph_.dt_hours, n.flags, graph_.theta_min);
    bases_.emplace_back(n.scenarios.realizations.size());
  }
  spare_.resize(models_.size());
  pool_.cuts.resize(models_.size());
}

StageSolution Sddp::solve(int node, const StateVector& incoming, const StageRealization& w,
                          Basis& basis) {
  StageModel& m = models_[node];
  m.apply(w);
  m.fix_state(incoming);
  LpSolution s = m.solve(options_.lp, basis.empty() ? nullptr : &basis);
  if (!s.optimal() && !basis.empty()) s = m.solve(options_.lp);  // retry cold
  if (!s.optimal()) {
    throw SolveError("node " + std::to_string(node) + ": " + to_string(s.status) +
                     (s.diagnostics.empty() ? "" : " (" + s.diagnostics + ")"));
  }
  basis = s.basis;
  return m.extract(s);
}

void Sddp::add_cut(int node, const Cut& cut) {
  models_[node].add_cut(cut.alpha, cut.beta);
  pool_.cuts[node].push_back(cut);
}

namespace {

std::vector<double> probabilities(const ScenarioSet& set) {
  std::vector<double> p;
  for (const auto& w : set.realizations) p.push_back(w.probability);
  return p;
}

int index_at(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

std::vector<int> Sddp::sample_path(std::mt19937_64& rng) {
  std::vector<int> pick;
  for (const PolicyNode& n : graph_.nodes) pick.push_back(sample_index(probabilities(n.scenarios), rng));
  return pick;
}

std::vector<int> Sddp::rotate_path(double& phase) {
  // Golden-ratio rotation on [0, 1), decoded into one index per node by
  // nested inverse CDFs: each path is hit with frequency equal to its
  // probability and revisited at nearly even spacing.
  phase += 0.6180339887498949;
  phase -= std::floor(phase);
  double u = phase;
  std::vector<int> pick;
  for (const PolicyNode& n : graph_.nodes) {
    const std::vector<double> p = probabilities(n.scenarios);
    const int i = index_at(p, u);
    double before = 0.0;
    for (int j = 0; j < i; ++j) before += p[j];
    u = std::clamp((u - before) / p[i], 0.0, std::nextafter(1.0, 0.0));
    pick.push_back(i);
  }
  return pick;
}

std::vector<TrajectoryStep> Sddp::forward_pass(const StateVector& initial, std::mt19937_64& rng) {
  return forward_pass(initial, sample_path(rng));
}

std::vector<TrajectoryStep> Sddp::forward_pass(const StateVector& initial,
                                               const std::vector<int>& pick) {
  if (static_cast<int>(pick.size()) != graph_.size()) {
    throw std::invalid_argument("forward pass needs one realization per node");
  }
  std::vector<TrajectoryStep> path;
  StateVector x = initial;
  for (int s = 0; s < graph_.size(); ++s) {
    const ScenarioSet& set = graph_.nodes[s].scenarios;
    const int r = pick[s];
    TrajectoryStep step{s, r, x, solve(s, x, set.realizations.at(r), bases_[s][r])};
    x = step.solution.outgoing_state;
    path.push_back(std::move(step));
  }
  return path;
}

std::vector<Cut> Sddp::backward_pass(const std::vector<TrajectoryStep>& trajectory,
                                     int iteration) {
  std::vector<Cut> added;
  const int last = graph_.size() - 1;
  for (int s = last; s >= 0; --s) {
    const bool self = graph_.cyclic && s == last;
    if (s == 0 && !self) break;
    const StateVector& x = trajectory[s].incoming;
    const ScenarioSet& set = graph_.nodes[s].scenarios;
    Cut cut;
    cut.beta = Eigen::VectorXd::Zero(x.size());
    cut.iteration = iteration;
    cut.stage = s;
    for (std::size_t r = 0; r < set.realizations.size(); ++r) {
      const StageRealization& w = set.realizations[r];
      const StageSolution sol = solve(s, x, w, bases_[s][r]);
      const double obj = sol.immediate_cost + sol.future_cost_estimate;
      cut.alpha += w.probability * (obj - sol.state_duals.dot(x));
      cut.beta += w.probability * sol.state_duals;
    }
    if (s > 0) add_cut(s - 1, cut);
    if (self) {
      Cut scaled = cut;
      scaled.alpha *= graph_.discount;
      scaled.beta *= graph_.discount;
      add_cut(s, scaled);
    }
    added.push_back(std::move(cut));
  }
  return added;
}

StageSolution Sddp::evaluate_stage(int node, const StateVector& incoming,
                                   const StageRealization& realization) {
  return solve(node, incoming, realization, spare_[node]);
}

double Sddp::lower_bound(const StateVector& initial) {
  const ScenarioSet& set = graph_.nodes[0].scenarios;
  double bound = 0.0;
  for (std::size_t r = 0; r < set.realizations.size(); ++r) {
    const StageSolution sol = solve(0, initial, set.realizations[r], bases_[0][r]);
    bound += set.realizations[r].probability * (sol.immediate_cost + sol.future_cost_estimate);
  }
  return bound;
}

double Sddp::simulate(const StateVector& initial, std::mt19937_64& rng, double tail) {
  std::vector<TrajectoryStep> path = forward_pass(initial, rng);
  double cost = 0.0;
  for (const auto& step : path) cost += step.solution.immediate_cost;
  if (!graph_.cyclic) return cost;
  const int last = graph_.size() - 1;
  const ScenarioSet& set = graph_.nodes[last].scenarios;
  const std::vector<double> p = probabilities(set);
  StateVector x = path.back().solution.outgoing_state;
  for (double weight = graph_.discount; weight >= tail; weight *= graph_.discount) {
    const int r = sample_index(p, rng);
    const StageSolution sol = solve(last, x, set.realizations[r], bases_[last][r]);
    cost += weight * sol.immediate_cost;
    x = sol.outgoing_state;
  }
  return cost;
}

double Sddp::expected_from(int node, const StateVector& incoming) {
  if (node == graph_.size()) return 0.0;
  const ScenarioSet& set = graph_.nodes[node].scenarios;
  double total = 0.0;
  for (std::size_t r = 0; r < set.realizations.size(); ++r) {
    const StageSolution sol = solve(node, incoming, set.realizations[r], bases_[node][r]);
    total += set.realizations[r].probability *
             (sol.immediate_cost + expected_from(node + 1, sol.outgoing_state));
  }
  return total;
}

double Sddp::expected_policy_cost(const StateVector& initial) {
  if (graph_.cyclic) throw std::logic_error("exact policy evaluation needs an acyclic graph");
  return expected_from(0, initial);
}

TrainingLog Sddp::train(const StateVector& initial, int iterations, std::uint64_t seed) {
  if (iterations < 0) throw ValidationError("training: iteration count must be >= 0");
  TrainingLog log;
  std::mt19937_64 rng(seed);
  double phase = uniform01(rng);
  for (int it = 1; it <= iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = it;
    try {
      const auto path = forward_pass(initial, options_.sampling == ForwardSampling::Rotation
                                                  ? rotate_path(phase)
                                                  : sample_path(rng));
      for (const auto& step : path) rec.forward_cost += step.solution.immediate_cost;
      backward_pass(path, it);
      rec.lower_bound = lower_bound(initial);
    } catch (const SolveError& e) {
      throw SolveError("iteration " + std::to_string(it) + ", " + e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.records.push_back(rec);
  }
  return log;
}

TrainingResult train(const PolicyGraph& graph, const SystemSpec& spec, const TableSet& tables,
                     const StateVector& initial, int iterations, std::uint64_t seed) {
  Sddp sddp(graph, spec, tables);
  TrainingLog log = sddp.train(initial, iterations, seed);
  return {sddp.pool(), std::move(log)};
}

// ---------------------------------------------------------------------------

namespace {
constexpr const char* kPolicyFormat = "mgsddp-policy";
constexpr int kPolicyVersion = 1;
}  // namespace

void write_policy(const PolicyGraph& graph, const CutPool& pool, std::ostream& out) {
  nlohmann::json doc;
  doc["format"] = kPolicyFormat;
  doc["version"] = kPolicyVersion;
  doc["cyclic"] = graph.cyclic;
  doc["discount"] = graph.discount;
  doc["theta_min"] = graph.theta_min;
  int dim = 0;
  nlohmann::json nodes = nlohmann::json::array();
  for (int s = 0; s < graph.size(); ++s) {
    nlohmann::json node;
    node["hours"] = graph.nodes[s].hours;
    node["soc_flag"] = graph.nodes[s].flags.soc;
    node["dod_flag"] = graph.nodes[s].flags.dod;
    nlohmann::json cuts = nlohmann::json::array();
    if (s < static_cast<int>(pool.cuts.size())) {
      for (const Cut& c : pool.cuts[s]) {
        dim = static_cast<int>(c.beta.size());
        cuts.push_back({{"alpha", c.alpha},
                        {"beta", std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size())},
                        {"iteration", c.iteration},
                        {"stage", c.stage}});
      }
    }
    node["cuts"] = std::move(cuts);
    nodes.push_back(std::move(node));
  }
  doc["state_dimension"] = dim;
  doc["nodes"] = std::move(nodes);
  out << doc.dump(1) << '\n';
}

StoredPolicy read_policy(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("policy: ") + e.what());
  }
  if (doc.value("format", "") != kPolicyFormat || doc.value("version", 0) != kPolicyVersion) {
    throw ValidationError("policy: unsupported format or version");
  }
  StoredPolicy p;
  try {
    p.cyclic = doc.at("cyclic").get<bool>();
    p.discount = doc.at("discount").get<double>();
    p.state_dimension = doc.at("state_dimension").get<int>();
    for (const auto& node : doc.at("nodes")) {
      p.durations.push_back(node.at("hours").get<int>());
      std::vector<Cut> cuts;
      for (const auto& c : node.at("cuts")) {
        Cut cut;
        cut.alpha = c.at("alpha").get<double>();
        const auto beta = c.at("beta").get<std::vector<double>>();
        if (static_cast<int>(beta.size()) != p.state_dimension) {
          throw ValidationError("policy: cut slope dimension mismatch");
        }
        cut.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        cut.iteration = c.at("iteration").get<int>();
        cut.stage = c.at("stage").get<int>();
        cuts.push_back(std::move(cut));
      }
      p.pool.cuts.push_back(std::move(cuts));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("policy: ") + e.what());
  }
  return p;
}

}  // namespace mgsddp
