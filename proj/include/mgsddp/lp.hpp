#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mgsddp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RowSense : std::uint8_t { LessEqual, Equal, GreaterEqual };

/// Role of a row inside a stage subproblem. State-fixing rows pin the
/// incoming state and provide the cut slopes; cut rows carry the
/// future-cost approximation.
enum class RowTag : std::uint8_t { Plain, StateFixing, Cut };

struct RowEntry {
  int column;
  double value;
};

/// A sparse linear program  min c'x  s.t.  rows (<=|=|>=) rhs,  l <= x <= u.
///
/// Columns and rows carry unique names; the name maps give a bijection onto
/// indices. Bounds, costs and right-hand sides may be changed in place
/// without invalidating warm-start bases.
class LinearProgram {
 public:
  int add_column(std::string name, double cost, double lower, double upper);
  int add_row(std::string name, RowSense sense, double rhs,
              std::span<const RowEntry> entries, RowTag tag = RowTag::Plain);
  int add_row(std::string name, RowSense sense, double rhs,
              std::initializer_list<RowEntry> entries,
              RowTag tag = RowTag::Plain) {
    return add_row(std::move(name), sense, rhs,
                   std::span<const RowEntry>(entries.begin(), entries.size()),
                   tag);
  }

  int num_columns() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }

  double cost(int j) const { return cost_[j]; }
  double lower(int j) const { return lower_[j]; }
  double upper(int j) const { return upper_[j]; }
  const std::string& column_name(int j) const { return column_names_[j]; }

  RowSense sense(int i) const { return sense_[i]; }
  double rhs(int i) const { return rhs_[i]; }
  RowTag tag(int i) const { return tag_[i]; }
  const std::string& row_name(int i) const { return row_names_[i]; }
  std::span<const RowEntry> row(int i) const { return rows_[i]; }

  void set_cost(int j, double c) { cost_[j] = c; }
  void set_bounds(int j, double lower, double upper);
  void set_rhs(int i, double rhs) { rhs_[i] = rhs; }

  std::optional<int> column_index(const std::string& name) const;
  std::optional<int> row_index(const std::string& name) const;
  std::vector<int> rows_tagged(RowTag tag) const;

  /// Column-major copy of the constraint matrix; cached until the next
  /// structural change.
  const Eigen::SparseMatrix<double, Eigen::ColMajor>& column_matrix() const;
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& row_matrix() const;

 private:
  void compile() const;

  std::vector<double> cost_, lower_, upper_;
  std::vector<std::string> column_names_;
  std::vector<RowSense> sense_;
  std::vector<double> rhs_;
  std::vector<RowTag> tag_;
  std::vector<std::string> row_names_;
  std::vector<std::vector<RowEntry>> rows_;
  std::unordered_map<std::string, int> column_lookup_, row_lookup_;

  struct Compiled {
    Eigen::SparseMatrix<double, Eigen::ColMajor> by_column;
    Eigen::SparseMatrix<double, Eigen::RowMajor> by_row;
  };
  mutable std::shared_ptr<const Compiled> compiled_;
};

enum class LpStatus : std::uint8_t {
  Optimal,
  Infeasible,
  Unbounded,
  IterationLimit,
  NumericalFailure
};

const char* to_string(LpStatus status);

enum class VarStatus : std::uint8_t { Basic, AtLower, AtUpper, Free };

/// Simplex basis over structural columns followed by one logical per row.
/// Rows appended after the basis was taken start with their logical basic.
struct Basis {
  int num_columns = 0;
  std::vector<VarStatus> status;
  bool empty() const { return status.empty(); }
};

struct SolverOptions {
  double primal_tolerance = 1e-9;
  double dual_tolerance = 1e-9;
  double pivot_tolerance = 1e-9;
  int refactor_interval = 80;
  int max_iterations = 0;  // 0: 50 * (rows + columns) + 10000
  /// Consecutive degenerate pivots before the dual simplex perturbs costs;
  /// a second stall, or any primal stall, switches to Bland's rule.
  int stall_limit = 400;
};

struct LpSolution {
  LpStatus status = LpStatus::NumericalFailure;
  double objective = 0.0;
  Eigen::VectorXd primal;        // per column
  Eigen::VectorXd duals;         // per row, d objective / d rhs
  Eigen::VectorXd reduced_costs; // per column
  Basis basis;
  int iterations = 0;
  std::string diagnostics;

  bool optimal() const { return status == LpStatus::Optimal; }
};

/// Bounded revised simplex. Starts from `warm` when it is dimensionally
/// compatible, otherwise from the all-logical basis. Uses the dual simplex
/// whenever the starting basis is dual feasible and the two-phase primal
/// simplex otherwise. Deterministic for identical inputs.
LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {},
                 const Basis* warm = nullptr);

/// Writes `lp` in CPLEX LP text format for cross-checking with external tools.
void write_lp_format(const LinearProgram& lp, std::ostream& out);

}  // namespace mgsddp
