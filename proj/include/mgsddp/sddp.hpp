#pragma once

#include "mgsddp/core_model.hpp"
#include "mgsddp/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

namespace mgsddp {

struct PolicyNode {
  int hours = 1;
  ScenarioSet scenarios;
  StageFlags flags;
};

/// Linear chain of stage nodes. When `cyclic`, the final node loops to
/// itself with discount `discount` on its own future cost.
struct PolicyGraph {
  std::vector<PolicyNode> nodes;
  bool cyclic = false;
  double discount = 0.7;
  double dt_hours = 1.0;
  double theta_min = 0.0;

  int size() const { return static_cast<int>(nodes.size()); }
  void validate() const;
};

/// theta >= alpha + beta . x_out
struct Cut {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  int iteration = 0;
  int stage = 0;  // node whose value function the cut supports

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const { return alpha + beta.dot(x); }
};

/// cuts[s] bound the future cost seen from node s.
struct CutPool {
  std::vector<std::vector<Cut>> cuts;

  std::size_t total() const;
  /// Max over the cuts of node s at x, or theta_min without cuts.
  double evaluate(int node, const Eigen::Ref<const Eigen::VectorXd>& x, double theta_min) const;
};

struct IterationRecord {
  int iteration = 0;
  double lower_bound = 0.0;
  double forward_cost = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<IterationRecord> records;
};

struct TrajectoryStep {
  int node = 0;
  int realization = 0;
  StateVector incoming;
  StageSolution solution;
};

/// How training picks the realization of each node on the forward pass.
/// Rotation drives a seeded low-discrepancy sequence over whole paths, so
/// every path is visited in proportion to its probability; it still yields
/// one path per iteration.
enum class ForwardSampling { MonteCarlo, Rotation };

struct SddpOptions {
  SolverOptions lp;
  ForwardSampling sampling = ForwardSampling::Rotation;
};

/// Owns one stage LP per node and the cut pool attached to them.
///
/// Node models are built once; realizations and states are applied in place
/// and each (node, realization) pair keeps its last basis for warm starts.
class Sddp {
 public:
  Sddp(PolicyGraph graph, SystemSpec spec, TableSet tables, SddpOptions options = {});

  TrainingLog train(const StateVector& initial, int iterations, std::uint64_t seed);

  /// One Monte Carlo pass through the nodes; the cyclic node is not unrolled.
  std::vector<TrajectoryStep> forward_pass(const StateVector& initial, std::mt19937_64& rng);
  /// Forward pass with realization `pick[s]` at node s.
  std::vector<TrajectoryStep> forward_pass(const StateVector& initial, const std::vector<int>& pick);
  /// Adds one averaged cut per visited linkage and returns the new cuts.
  std::vector<Cut> backward_pass(const std::vector<TrajectoryStep>& trajectory, int iteration);

  /// Solves node `node` against the current pool. Realizations outside the
  /// training set are allowed.
  StageSolution evaluate_stage(int node, const StateVector& incoming,
                               const StageRealization& realization);
  /// Expectation of the first node's objective over its realizations.
  double lower_bound(const StateVector& initial);

  /// Immediate cost of one sampled policy path. The cyclic node is repeated
  /// with weight discount^k until that weight drops below `tail`.
  double simulate(const StateVector& initial, std::mt19937_64& rng, double tail = 1e-6);
  /// Exact expected policy cost over every realization path (acyclic only).
  double expected_policy_cost(const StateVector& initial);

  void add_cut(int node, const Cut& cut);

  const PolicyGraph& graph() const { return graph_; }
  const CutPool& pool() const { return pool_; }
  const SystemSpec& spec() const { return spec_; }
  const StageModel& model(int node) const { return models_[node]; }

 private:
  std::vector<int> sample_path(std::mt19937_64& rng);
  std::vector<int> rotate_path(double& phase);
  StageSolution solve(int node, const StateVector& incoming, const StageRealization& w,
                      Basis& basis);
  double expected_from(int node, const StateVector& incoming);

  PolicyGraph graph_;
  SystemSpec spec_;
  TableSet tables_;
  SddpOptions options_;
  std::vector<StageModel> models_;
  std::vector<std::vector<Basis>> bases_;  // [node][realization]
  std::vector<Basis> spare_;               // out-of-sample solves per node
  CutPool pool_;
};

struct TrainingResult {
  CutPool pool;
  TrainingLog log;
};

TrainingResult train(const PolicyGraph& graph, const SystemSpec& spec, const TableSet& tables,
                     const StateVector& initial, int iterations, std::uint64_t seed);

/// Uniform [0, 1) draw from the top 53 bits, identical on every platform.
double uniform01(std::mt19937_64& rng);
/// Index drawn with the given probabilities.
int sample_index(const std::vector<double>& probabilities, std::mt19937_64& rng);

/// Versioned JSON document holding node durations, discount and cuts.
void write_policy(const PolicyGraph& graph, const CutPool& pool, std::ostream& out);
struct StoredPolicy {
  std::vector<int> durations;
  bool cyclic = false;
  double discount = 0.0;
  int state_dimension = 0;
  CutPool pool;
};
StoredPolicy read_policy(std::istream& in);

}  // namespace mgsddp
