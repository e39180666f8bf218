#pragma once

#include "mgsddp/degradation.hpp"
#include "mgsddp/lp.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace mgsddp {

struct GeneratorSpec {
  std::string name;
  double p_max = 0.0;          // kW
  double marginal_cost = 0.0;  // EUR/kWh
};

enum class VresSource { Wind, Pv };

struct VresSpec {
  std::string name;
  double capacity = 0.0;  // kW
  VresSource source = VresSource::Wind;
};

struct LoadSpec {
  std::string name;
  double shed_cost = 0.0;  // EUR/kWh
  double share = 1.0;      // fraction of the demand series served by this load
};

struct StorageSpec {
  std::string name;
  double soc_min = 0.0;  // kWh
  double soc_max = 0.0;
  double p_charge_max = 0.0;  // kW
  double p_discharge_max = 0.0;
  double eta_c = 1.0;
  double eta_d = 1.0;
  double replacement_cost_per_kwh = 0.0;
  /// Absent for storages whose ageing is not priced (hydrogen).
  std::optional<DegradationModel> degradation;

  double usable() const { return soc_max - soc_min; }
};

struct SystemSpec {
  std::vector<GeneratorSpec> generators;
  std::vector<VresSpec> vres;
  std::vector<LoadSpec> loads;
  std::vector<StorageSpec> storages;
};

/// Returns `spec` when every invariant holds; otherwise throws
/// ValidationError listing each violation as "<element>.<field>: <problem>".
const SystemSpec& validate_system(const SystemSpec& spec);

/// Per-storage tables; empty entries for storages without a degradation model.
using TableSet = std::vector<std::optional<DegradationTables>>;
TableSet make_table_set(const SystemSpec& spec);

/// Number of DOD segments modelled for storage `e`: one without degradation.
int dod_segments(const StorageSpec& storage);

/// Flat per-segment stored energy, storages in declaration order.
using StateVector = Eigen::VectorXd;

struct StateLayout {
  std::vector<int> offset;  // first entry of each storage
  std::vector<int> segments;
  int size = 0;
};
StateLayout state_layout(const SystemSpec& spec);

/// Each storage at `fraction` of usable energy, cheapest DOD segment filled first.
StateVector initial_state(const SystemSpec& spec, double fraction = 0.5);

/// Availability is vres x hours, demand is loads x hours, both in kW.
struct StageRealization {
  Eigen::MatrixXd vres_availability;
  Eigen::MatrixXd demand;
  double probability = 1.0;

  int hours() const { return static_cast<int>(demand.cols()); }
};

struct StageFlags {
  bool soc = false;
  bool dod = false;
};

/// Matrices are (segments or ladder steps) x hours. Ladders are empty when
/// the SOC cost is not modelled for that storage.
struct StorageTrace {
  Eigen::MatrixXd charge, discharge, soc;
  Eigen::MatrixXd soc_up, soc_dn;

  Eigen::VectorXd total_soc() const { return soc.colwise().sum().transpose(); }
};

struct StageSolution {
  Eigen::MatrixXd generation;  // generators x hours
  Eigen::MatrixXd vres;
  Eigen::MatrixXd shedding;  // loads x hours
  std::vector<StorageTrace> storage;
  StateVector outgoing_state;
  double immediate_cost = 0.0;
  double future_cost_estimate = 0.0;
  /// Marginal value of the incoming state, one entry per state component.
  Eigen::VectorXd state_duals;
  Basis basis;
};

/// One stage of the dispatch model as an LP with a stable index map.
///
/// Structure is fixed at construction; realizations, the incoming state and
/// new cuts are applied in place so a basis stays valid across solves.
/// Hour-0 energy balance rows pin the incoming state and are tagged
/// StateFixing; cut rows read  theta - beta . x_out >= alpha.
class StageModel {
 public:
  StageModel(const SystemSpec& spec, TableSet tables, int hours, double dt_hours,
             StageFlags flags, double theta_min = 0.0);

  void apply(const StageRealization& realization);
  void fix_state(const StateVector& incoming);
  void add_cut(double alpha, const Eigen::Ref<const Eigen::VectorXd>& beta);

  LpSolution solve(const SolverOptions& options = {}, const Basis* warm = nullptr) const;
  /// Throws SolveError unless `solution` is optimal.
  StageSolution extract(const LpSolution& solution) const;

  const LinearProgram& lp() const { return lp_; }
  const SystemSpec& spec() const { return spec_; }
  const TableSet& tables() const { return tables_; }
  const StateLayout& layout() const { return layout_; }
  int hours() const { return hours_; }
  double dt() const { return dt_; }
  StageFlags flags() const { return flags_; }
  int num_cuts() const { return num_cuts_; }

  int theta_column() const { return theta_; }
  int generation_column(int g, int t) const { return gen_[g][t]; }
  int vres_column(int r, int t) const { return vres_[r][t]; }
  int shed_column(int d, int t) const { return shed_[d][t]; }
  int charge_column(int e, int k, int t) const { return store_[e].charge[k][t]; }
  int discharge_column(int e, int k, int t) const { return store_[e].discharge[k][t]; }
  int soc_column(int e, int k, int t) const { return store_[e].soc[k][t]; }
  int balance_row(int t) const { return balance_[t]; }
  /// Incoming-state row of component `i` of the flat state.
  int state_row(int i) const { return state_rows_[i]; }
  /// Final-hour segment column of component `i`.
  int outgoing_column(int i) const { return outgoing_[i]; }

 private:
  struct StorageIndex {
    std::vector<std::vector<int>> charge, discharge, soc;  // [segment][hour]
    std::vector<std::vector<int>> up, dn;                  // [step][hour]
    bool ladders = false;
  };

  SystemSpec spec_;
  TableSet tables_;
  StateLayout layout_;
  int hours_;
  double dt_;
  StageFlags flags_;
  LinearProgram lp_;

  int theta_ = -1;
  int num_cuts_ = 0;
  std::vector<std::vector<int>> gen_, vres_, shed_;
  std::vector<StorageIndex> store_;
  std::vector<int> balance_;
  std::vector<int> state_rows_, outgoing_;
};

/// Builds the stage model and applies `realization` to it.
StageModel build_stage_subproblem(const SystemSpec& spec, const TableSet& tables, int hours,
                                  double dt_hours, const StageRealization& realization,
                                  StageFlags flags, double theta_min = 0.0);

}  // namespace mgsddp
