#include "mgsddp/lp.hpp"

#include "mgsddp/errors.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mgsddp {

// ---------------------------------------------------------------------------
// LinearProgram

int LinearProgram::add_column(std::string name, double cost, double lower,
                              double upper) {
  if (lower > upper) {
    throw std::invalid_argument("column " + name + ": lower bound exceeds upper");
  }
  const int j = num_columns();
  if (!column_lookup_.emplace(name, j).second) {
    throw std::invalid_argument("duplicate column name " + name);
  }
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  column_names_.push_back(std::move(name));
  compiled_.reset();
  return j;
}

int LinearProgram::add_row(std::string name, RowSense sense, double rhs,
                           std::span<const RowEntry> entries, RowTag tag) {
  const int i = num_rows();
  if (!row_lookup_.emplace(name, i).second) {
    throw std::invalid_argument("duplicate row name " + name);
  }
  std::vector<RowEntry> row;
  row.reserve(entries.size());
  for (const RowEntry& e : entries) {
    if (e.column < 0 || e.column >= num_columns()) {
      throw std::out_of_range("row " + name + " references unknown column");
    }
    if (!std::isfinite(e.value)) {
      throw std::invalid_argument("row " + name + " has a non-finite coefficient");
    }
    if (e.value != 0.0) row.push_back(e);
  }
  sense_.push_back(sense);
  rhs_.push_back(rhs);
  tag_.push_back(tag);
  row_names_.push_back(std::move(name));
  rows_.push_back(std::move(row));
  compiled_.reset();
  return i;
}

void LinearProgram::set_bounds(int j, double lower, double upper) {
  if (lower > upper) {
    throw std::invalid_argument("column " + column_names_[j] +
                                ": lower bound exceeds upper");
  }
  lower_[j] = lower;
  upper_[j] = upper;
}

std::optional<int> LinearProgram::column_index(const std::string& name) const {
  auto it = column_lookup_.find(name);
  if (it == column_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> LinearProgram::row_index(const std::string& name) const {
  auto it = row_lookup_.find(name);
  if (it == row_lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> LinearProgram::rows_tagged(RowTag tag) const {
  std::vector<int> out;
  for (int i = 0; i < num_rows(); ++i) {
    if (tag_[i] == tag) out.push_back(i);
  }
  return out;
}

void LinearProgram::compile() const {
  auto c = std::make_shared<Compiled>();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < num_rows(); ++i) {
    for (const RowEntry& e : rows_[i]) triplets.emplace_back(i, e.column, e.value);
  }
  c->by_column.resize(num_rows(), num_columns());
  c->by_column.setFromTriplets(triplets.begin(), triplets.end());
  c->by_column.makeCompressed();
  c->by_row = c->by_column;
  c->by_row.makeCompressed();
  compiled_ = std::move(c);
}

const Eigen::SparseMatrix<double, Eigen::ColMajor>& LinearProgram::column_matrix()
    const {
  if (!compiled_) compile();
  return compiled_->by_column;
}

const Eigen::SparseMatrix<double, Eigen::RowMajor>& LinearProgram::row_matrix()
    const {
  if (!compiled_) compile();
  return compiled_->by_row;
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration limit";
    case LpStatus::NumericalFailure: return "numerical failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Simplex engine
//
// Computational form: [A  -I] (x, r) = 0 with one logical r_i per row whose
// bounds encode the row sense and right-hand side.

namespace {

struct Eta {
  int pivot_row;
  double pivot;
  std::vector<std::pair<int, double>> column;  // off-pivot entries
};

enum class Outcome { Optimal, Infeasible, Unbounded, IterationLimit, Singular };

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolverOptions& opts)
      : lp_(lp),
        opts_(opts),
        a_(lp.column_matrix()),
        ar_(lp.row_matrix()),
        n_(lp.num_columns()),
        m_(lp.num_rows()),
        total_(n_ + m_) {
    lb_.resize(total_);
    ub_.resize(total_);
    cost_ = Eigen::VectorXd::Zero(total_);
    for (int j = 0; j < n_; ++j) {
      lb_[j] = lp.lower(j);
      ub_[j] = lp.upper(j);
      cost_[j] = lp.cost(j);
    }
    for (int i = 0; i < m_; ++i) {
      const double b = lp.rhs(i);
      switch (lp.sense(i)) {
        case RowSense::LessEqual: lb_[n_ + i] = -kInfinity; ub_[n_ + i] = b; break;
        case RowSense::Equal: lb_[n_ + i] = b; ub_[n_ + i] = b; break;
        case RowSense::GreaterEqual: lb_[n_ + i] = b; ub_[n_ + i] = kInfinity; break;
      }
    }
    max_iterations_ = opts.max_iterations > 0 ? opts.max_iterations
                                              : 50 * total_ + 10000;
    alpha_row_ = Eigen::VectorXd::Zero(total_);
  }

  LpSolution run(const Basis* warm) {
    LpSolution out;
    bool started = warm != nullptr && load_basis(*warm);
    if (!started) slack_basis();
    if (!factorize()) {
      slack_basis();
      if (!factorize()) return fail(out, "slack basis singular");
    }

    Outcome result = Outcome::Singular;
    for (int attempt = 0; attempt < 4; ++attempt) {
      result = optimize();
      if (result != Outcome::Singular) break;
      slack_basis();
      if (!factorize()) return fail(out, "slack basis singular");
    }
    out.iterations = iterations_;
    switch (result) {
      case Outcome::Optimal: out.status = LpStatus::Optimal; break;
      case Outcome::Infeasible: out.status = LpStatus::Infeasible; break;
      case Outcome::Unbounded: out.status = LpStatus::Unbounded; break;
      case Outcome::IterationLimit: out.status = LpStatus::IterationLimit; break;
      case Outcome::Singular:
        return fail(out, "basis repeatedly singular");
    }
    fill(out);
    return out;
  }

 private:
  // -- basis bookkeeping ----------------------------------------------------

  VarStatus resting_status(int j) const {
    if (std::isfinite(lb_[j])) return VarStatus::AtLower;
    if (std::isfinite(ub_[j])) return VarStatus::AtUpper;
    return VarStatus::Free;
  }

  void slack_basis() {
    status_.assign(total_, VarStatus::Basic);
    for (int j = 0; j < n_; ++j) status_[j] = resting_status(j);
    rebuild_head();
  }

  bool load_basis(const Basis& warm) {
    if (warm.num_columns != n_) return false;
    const int old_rows = static_cast<int>(warm.status.size()) - n_;
    if (old_rows < 0 || old_rows > m_) return false;
    status_.assign(total_, VarStatus::Basic);
    std::copy(warm.status.begin(), warm.status.end(), status_.begin());
    int basics = 0;
    for (int j = 0; j < total_; ++j) {
      VarStatus& s = status_[j];
      if (s == VarStatus::Basic) {
        ++basics;
        continue;
      }
      if (s == VarStatus::AtLower && !std::isfinite(lb_[j])) s = resting_status(j);
      if (s == VarStatus::AtUpper && !std::isfinite(ub_[j])) s = resting_status(j);
      if (s == VarStatus::Free && (std::isfinite(lb_[j]) || std::isfinite(ub_[j]))) {
        s = resting_status(j);
      }
    }
    if (basics != m_) return false;
    rebuild_head();
    return true;
  }

  void rebuild_head() {
    head_.clear();
    head_.reserve(m_);
    position_.assign(total_, -1);
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic) {
        position_[j] = static_cast<int>(head_.size());
        head_.push_back(j);
      }
    }
  }

  double nonbasic_value(int j) const {
    switch (status_[j]) {
      case VarStatus::AtLower: return lb_[j];
      case VarStatus::AtUpper: return ub_[j];
      default: return 0.0;
    }
  }

  // -- linear algebra --------------------------------------------------------

  bool factorize() {
    etas_.clear();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(m_) * 3);
    for (int p = 0; p < m_; ++p) {
      const int j = head_[p];
      if (j < n_) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it) {
          triplets.emplace_back(static_cast<int>(it.row()), p, it.value());
        }
      } else {
        triplets.emplace_back(j - n_, p, -1.0);
      }
    }
    Eigen::SparseMatrix<double> basis(m_, m_);
    basis.setFromTriplets(triplets.begin(), triplets.end());
    basis.makeCompressed();
    lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(basis);
    if (lu_->info() != Eigen::Success) return false;
    // Reject numerically singular factors that SparseLU lets through.
    Eigen::VectorXd probe = Eigen::VectorXd::Ones(m_);
    Eigen::VectorXd solved = lu_->solve(probe);
    if (!solved.allFinite()) return false;
    compute_primal();
    return true;
  }

  void ftran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    v = lu_->solve(v).eval();
    for (const Eta& e : etas_) {
      const double vp = v[e.pivot_row] / e.pivot;
      if (vp != 0.0) {
        for (const auto& [i, a] : e.column) v[i] -= a * vp;
      }
      v[e.pivot_row] = vp;
    }
  }

  void btran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v[it->pivot_row];
      for (const auto& [i, a] : it->column) s -= a * v[i];
      v[it->pivot_row] = s / it->pivot;
    }
    v = lu_->transpose().solve(v).eval();
  }

  void load_column(int j, Eigen::VectorXd& v) const {
    v.setZero(m_);
    if (j < n_) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it) {
        v[it.row()] = it.value();
      }
    } else {
      v[j - n_] = -1.0;
    }
  }

  double column_dot(int j, const Eigen::VectorXd& y) const {
    if (j >= n_) return -y[j - n_];
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it) {
      s += it.value() * y[it.row()];
    }
    return s;
  }

  void compute_primal() {
    x_.resize(total_);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic) continue;
      const double v = nonbasic_value(j);
      x_[j] = v;
      if (v == 0.0) continue;
      if (j < n_) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it) {
          rhs[it.row()] -= it.value() * v;
        }
      } else {
        rhs[j - n_] += v;
      }
    }
    ftran(rhs);
    for (int p = 0; p < m_; ++p) x_[head_[p]] = rhs[p];
  }

  /// Simplex multipliers and reduced costs for `cost`.
  void compute_duals(const Eigen::VectorXd& cost) {
    y_.resize(m_);
    for (int p = 0; p < m_; ++p) y_[p] = cost[head_[p]];
    btran(y_);
    d_.resize(total_);
    for (int j = 0; j < total_; ++j) {
      d_[j] = status_[j] == VarStatus::Basic ? 0.0 : cost[j] - column_dot(j, y_);
    }
  }

  /// Row p of B^-1 [A -I], scattered into alpha_row_; touched_ lists the
  /// nonzero positions.
  void pivot_row(int p) {
    for (int j : touched_) alpha_row_[j] = 0.0;
    touched_.clear();
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(m_);
    rho[p] = 1.0;
    btran(rho);
    for (int i = 0; i < m_; ++i) {
      const double r = rho[i];
      if (std::abs(r) < 1e-13) continue;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(ar_, i); it;
           ++it) {
        const int j = static_cast<int>(it.col());
        if (alpha_row_[j] == 0.0) touched_.push_back(j);
        alpha_row_[j] += r * it.value();
        if (alpha_row_[j] == 0.0) alpha_row_[j] = 1e-300;
      }
      touched_.push_back(n_ + i);
      alpha_row_[n_ + i] = -r;
    }
  }

  void replace(int p, int entering, const Eigen::VectorXd& column,
               VarStatus leaving_status) {
    const int leaving = head_[p];
    Eta eta;
    eta.pivot_row = p;
    eta.pivot = column[p];
    for (int i = 0; i < m_; ++i) {
      if (i != p && column[i] != 0.0) eta.column.emplace_back(i, column[i]);
    }
    etas_.push_back(std::move(eta));
    status_[leaving] = leaving_status;
    position_[leaving] = -1;
    x_[leaving] = nonbasic_value(leaving);
    status_[entering] = VarStatus::Basic;
    position_[entering] = p;
    head_[p] = entering;
  }

  double feas_tol(double bound) const {
    return opts_.primal_tolerance * std::max(1.0, std::abs(bound));
  }

  /// Signed violation of basic position p: negative below lb, positive above ub.
  double violation(int p) const {
    const int j = head_[p];
    if (x_[j] < lb_[j] - feas_tol(lb_[j])) return x_[j] - lb_[j];
    if (x_[j] > ub_[j] + feas_tol(ub_[j])) return x_[j] - ub_[j];
    return 0.0;
  }

  bool primal_feasible() const {
    for (int p = 0; p < m_; ++p) {
      if (violation(p) != 0.0) return false;
    }
    return true;
  }

  bool dual_infeasible(int j) const {
    const double tol = opts_.dual_tolerance;
    switch (status_[j]) {
      case VarStatus::Basic: return false;
      case VarStatus::AtLower: return lb_[j] != ub_[j] && d_[j] < -tol;
      case VarStatus::AtUpper: return lb_[j] != ub_[j] && d_[j] > tol;
      case VarStatus::Free: return std::abs(d_[j]) > tol;
    }
    return false;
  }

  /// Flips boxed nonbasics with wrong-signed reduced cost; returns true when
  /// the basis is then dual feasible.
  bool flip_to_dual_feasible() {
    bool flipped = false;
    bool feasible = true;
    for (int j = 0; j < total_; ++j) {
      if (!dual_infeasible(j)) continue;
      if (std::isfinite(lb_[j]) && std::isfinite(ub_[j])) {
        status_[j] = status_[j] == VarStatus::AtLower ? VarStatus::AtUpper
                                                      : VarStatus::AtLower;
        flipped = true;
      } else {
        feasible = false;
      }
    }
    if (flipped) compute_primal();
    return feasible;
  }

  /// Widens every nonbasic reduced cost away from zero by a small
  /// index-dependent amount, keeping the basis dual feasible. The true costs
  /// are restored before optimality is verified.
  bool perturb_costs() {
    true_cost_ = cost_;
    bool any = false;
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic || status_[j] == VarStatus::Free) continue;
      if (lb_[j] == ub_[j]) continue;
      const double jitter = 1.0 + 0.5 * ((j * 2654435761u) % 1024) / 1024.0;
      const double shift = opts_.dual_tolerance * 100.0 * jitter * (1.0 + std::abs(true_cost_[j]));
      const double sign = status_[j] == VarStatus::AtLower ? 1.0 : -1.0;
      cost_[j] += sign * shift;
      d_[j] += sign * shift;
      any = true;
    }
    perturbed_ = any;
    return any;
  }

  // -- drivers ----------------------------------------------------------------

  Outcome optimize() {
    for (int round = 0; round < 8; ++round) {
      compute_duals(cost_);
      Outcome r;
      if (flip_to_dual_feasible()) {
        r = dual_simplex();
      } else {
        r = primal_simplex();
      }
      if (perturbed_) {
        cost_ = true_cost_;
        perturbed_ = false;
      }
      if (r != Outcome::Optimal) return r;
      // Verify on a fresh factorization before accepting.
      if (!factorize()) return Outcome::Singular;
      compute_duals(cost_);
      bool dual_ok = true;
      for (int j = 0; j < total_ && dual_ok; ++j) dual_ok = !dual_infeasible(j);
      if (dual_ok && primal_feasible()) return Outcome::Optimal;
    }
    return Outcome::IterationLimit;
  }

  Outcome dual_simplex() {
    Eigen::VectorXd column(m_);
    int degenerate = 0;
    bool bland = false;
    while (true) {
      if (iterations_ >= max_iterations_) return Outcome::IterationLimit;
      if (static_cast<int>(etas_.size()) >= opts_.refactor_interval) {
        if (!factorize()) return Outcome::Singular;
        compute_duals(cost_);
        if (!flip_to_dual_feasible()) return primal_simplex();
      }

      // Leaving row.
      int p = -1;
      double best = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double v = violation(i);
        if (v == 0.0) continue;
        if (bland) {
          if (p < 0 || head_[i] < head_[p]) p = i;
        } else if (std::abs(v) > best) {
          best = std::abs(v);
          p = i;
        }
      }
      if (p < 0) return Outcome::Optimal;
      const int leaving = head_[p];
      const double delta = violation(p);
      const bool to_lower = delta < 0.0;

      pivot_row(p);

      // Ratio test (Harris two-pass; smallest index under Bland's rule).
      const double ptol = opts_.pivot_tolerance;
      const double dtol = opts_.dual_tolerance;
      auto eligible = [&](int j) {
        if (status_[j] == VarStatus::Basic) return false;
        if (lb_[j] == ub_[j]) return false;
        const double a = alpha_row_[j];
        switch (status_[j]) {
          case VarStatus::AtLower: return to_lower ? a < -ptol : a > ptol;
          case VarStatus::AtUpper: return to_lower ? a > ptol : a < -ptol;
          case VarStatus::Free: return std::abs(a) > ptol;
          default: return false;
        }
      };
      double bound = kInfinity;
      for (int j : touched_) {
        if (!eligible(j)) continue;
        bound = std::min(bound, (std::abs(d_[j]) + dtol) / std::abs(alpha_row_[j]));
      }
      if (!std::isfinite(bound)) {
        // Dual unbounded: primal infeasible, unless the factors drifted.
        if (!etas_.empty()) {
          if (!factorize()) return Outcome::Singular;
          compute_duals(cost_);
          if (!flip_to_dual_feasible()) return primal_simplex();
          continue;
        }
        return Outcome::Infeasible;
      }
      int q = -1;
      double q_alpha = 0.0, q_ratio = kInfinity;
      for (int j : touched_) {
        if (!eligible(j)) continue;
        const double a = std::abs(alpha_row_[j]);
        const double ratio = std::abs(d_[j]) / a;
        if (bland) {
          if (ratio < q_ratio - 1e-12 || (ratio <= q_ratio + 1e-12 && j < q)) {
            q = j;
            q_ratio = ratio;
          }
        } else if (ratio <= bound && a > q_alpha) {
          q = j;
          q_alpha = a;
        }
      }

      load_column(q, column);
      ftran(column);
      const double alpha_q = alpha_row_[q];
      if (std::abs(column[p] - alpha_q) > 1e-7 * (1.0 + std::abs(alpha_q)) ||
          std::abs(column[p]) < ptol) {
        if (etas_.empty()) return Outcome::Singular;
        if (!factorize()) return Outcome::Singular;
        compute_duals(cost_);
        if (!flip_to_dual_feasible()) return primal_simplex();
        continue;
      }

      // Dual update.
      const double theta_d = d_[q] / alpha_q;
      for (int j : touched_) {
        if (status_[j] != VarStatus::Basic) d_[j] -= theta_d * alpha_row_[j];
      }
      d_[q] = 0.0;
      d_[leaving] = -theta_d;

      // Primal update.
      const double theta_p = delta / column[p];
      for (int i = 0; i < m_; ++i) {
        if (column[i] != 0.0) x_[head_[i]] -= theta_p * column[i];
      }
      x_[q] += theta_p;
      replace(p, q, column, to_lower ? VarStatus::AtLower : VarStatus::AtUpper);
      ++iterations_;

      if (std::abs(theta_d) < 1e-12) {
        if (++degenerate > opts_.stall_limit) {
          if (perturbed_ || !perturb_costs()) {
            bland = true;
          }
          degenerate = 0;
        }
      } else {
        degenerate = 0;
      }
    }
  }

  Outcome primal_simplex() {
    Eigen::VectorXd column(m_);
    Eigen::VectorXd phase_cost = Eigen::VectorXd::Zero(total_);
    int degenerate = 0;
    bool bland = false;
    while (true) {
      if (iterations_ >= max_iterations_) return Outcome::IterationLimit;
      if (static_cast<int>(etas_.size()) >= opts_.refactor_interval) {
        if (!factorize()) return Outcome::Singular;
      }

      // Phase-one costs from the current infeasibilities.
      bool phase_one = false;
      phase_cost.setZero();
      for (int p = 0; p < m_; ++p) {
        const double v = violation(p);
        if (v < 0.0) {
          phase_cost[head_[p]] = -1.0;
          phase_one = true;
        } else if (v > 0.0) {
          phase_cost[head_[p]] = 1.0;
          phase_one = true;
        }
      }
      compute_duals(phase_one ? phase_cost : cost_);

      // Entering column.
      int q = -1;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (!dual_infeasible(j)) continue;
        if (bland) {
          q = j;
          break;
        }
        if (std::abs(d_[j]) > best) {
          best = std::abs(d_[j]);
          q = j;
        }
      }
      if (q < 0) return phase_one ? Outcome::Infeasible : Outcome::Optimal;
      const double dir = d_[q] < 0.0 ? 1.0 : -1.0;

      load_column(q, column);
      ftran(column);

      // Ratio test over basics; x_B moves by -dir * t * column. In phase one
      // an infeasible basic blocks where it re-enters its range.
      const double ptol = opts_.pivot_tolerance;
      struct Block {
        double ratio = kInfinity;
        VarStatus at = VarStatus::AtLower;
      };
      auto limit = [&](int p, bool relaxed) -> Block {
        const double change = -dir * column[p];
        if (std::abs(change) <= ptol) return {};
        const int j = head_[p];
        const double xv = x_[j];
        if (change < 0.0) {
          if (xv > ub_[j] + feas_tol(ub_[j])) {
            return {std::max(0.0, (xv - ub_[j]) / -change), VarStatus::AtUpper};
          }
          if (xv < lb_[j] - feas_tol(lb_[j]) || !std::isfinite(lb_[j])) return {};
          const double slack = xv - lb_[j] + (relaxed ? feas_tol(lb_[j]) : 0.0);
          return {std::max(0.0, slack / -change), VarStatus::AtLower};
        }
        if (xv < lb_[j] - feas_tol(lb_[j])) {
          return {std::max(0.0, (lb_[j] - xv) / change), VarStatus::AtLower};
        }
        if (xv > ub_[j] + feas_tol(ub_[j]) || !std::isfinite(ub_[j])) return {};
        const double slack = ub_[j] - xv + (relaxed ? feas_tol(ub_[j]) : 0.0);
        return {std::max(0.0, slack / change), VarStatus::AtUpper};
      };
      double bound = kInfinity;
      for (int p = 0; p < m_; ++p) bound = std::min(bound, limit(p, true).ratio);
      int leave = -1;
      Block chosen;
      double leave_size = 0.0;
      for (int p = 0; p < m_; ++p) {
        const Block b = limit(p, false);
        if (!std::isfinite(b.ratio)) continue;
        if (bland) {
          if (b.ratio < chosen.ratio - 1e-12 ||
              (b.ratio <= chosen.ratio + 1e-12 && leave >= 0 &&
               head_[p] < head_[leave])) {
            leave = p;
            chosen = b;
          }
        } else if (b.ratio <= bound && std::abs(column[p]) > leave_size) {
          leave = p;
          chosen = b;
          leave_size = std::abs(column[p]);
        }
      }
      const double range = ub_[q] - lb_[q];
      if (leave < 0 && !std::isfinite(range)) {
        if (phase_one) return Outcome::Singular;
        return Outcome::Unbounded;
      }

      if (std::isfinite(range) && range <= chosen.ratio) {
        // Bound flip.
        for (int i = 0; i < m_; ++i) {
          if (column[i] != 0.0) x_[head_[i]] -= dir * range * column[i];
        }
        status_[q] = status_[q] == VarStatus::AtLower ? VarStatus::AtUpper
                                                      : VarStatus::AtLower;
        x_[q] = nonbasic_value(q);
        ++iterations_;
        degenerate = 0;
        continue;
      }

      const double t = chosen.ratio;
      for (int i = 0; i < m_; ++i) {
        if (column[i] != 0.0) x_[head_[i]] -= dir * t * column[i];
      }
      x_[q] += dir * t;
      const VarStatus leaving_status = chosen.at;
      replace(leave, q, column, leaving_status);
      ++iterations_;
      if (t < 1e-12) {
        if (++degenerate > opts_.stall_limit) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  // -- results ----------------------------------------------------------------

  LpSolution& fail(LpSolution& out, const std::string& why) {
    out.status = LpStatus::NumericalFailure;
    out.diagnostics = why;
    out.iterations = iterations_;
    return out;
  }

  void fill(LpSolution& out) {
    out.primal = x_.head(n_);
    out.objective = 0.0;
    for (int j = 0; j < n_; ++j) out.objective += cost_[j] * x_[j];
    if (out.status == LpStatus::Optimal) {
      compute_duals(cost_);
      out.duals = y_;
      out.reduced_costs = d_.head(n_);
    } else {
      out.duals = Eigen::VectorXd::Zero(m_);
      out.reduced_costs = Eigen::VectorXd::Zero(n_);
    }
    out.basis.num_columns = n_;
    out.basis.status = status_;
    std::ostringstream msg;
    msg << to_string(out.status) << " after " << iterations_ << " iterations";
    out.diagnostics = msg.str();
  }

  const LinearProgram& lp_;
  const SolverOptions& opts_;
  const Eigen::SparseMatrix<double, Eigen::ColMajor>& a_;
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& ar_;
  const int n_, m_, total_;
  int max_iterations_ = 0;
  int iterations_ = 0;

  Eigen::VectorXd lb_, ub_, cost_, true_cost_;
  bool perturbed_ = false;
  std::vector<VarStatus> status_;
  std::vector<int> head_, position_;
  Eigen::VectorXd x_, y_, d_;
  Eigen::VectorXd alpha_row_;
  std::vector<int> touched_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
  std::vector<Eta> etas_;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& options,
                 const Basis* warm) {
  for (int j = 0; j < lp.num_columns(); ++j) {
    if (!std::isfinite(lp.cost(j)) || std::isnan(lp.lower(j)) ||
        std::isnan(lp.upper(j))) {
      throw std::invalid_argument("column " + lp.column_name(j) +
                                  " has non-finite data");
    }
  }
  for (int i = 0; i < lp.num_rows(); ++i) {
    if (!std::isfinite(lp.rhs(i))) {
      throw std::invalid_argument("row " + lp.row_name(i) + " has a non-finite rhs");
    }
  }
  Simplex engine(lp, options);
  return engine.run(warm);
}

// ---------------------------------------------------------------------------
// CPLEX LP format

namespace {

void write_term(std::ostream& out, double coef, const std::string& name, bool first) {
  if (coef < 0) {
    out << " - ";
  } else if (!first) {
    out << " + ";
  } else {
    out << " ";
  }
  out << std::abs(coef) << ' ' << name;
}

}  // namespace

void write_lp_format(const LinearProgram& lp, std::ostream& out) {
  out.precision(17);
  out << "\\ written by mgsddp\nMinimize\n obj:";
  bool first = true;
  for (int j = 0; j < lp.num_columns(); ++j) {
    if (lp.cost(j) == 0.0) continue;
    write_term(out, lp.cost(j), lp.column_name(j), first);
    first = false;
  }
  if (first) out << " 0 " << (lp.num_columns() > 0 ? lp.column_name(0) : "x");
  out << "\nSubject To\n";
  for (int i = 0; i < lp.num_rows(); ++i) {
    out << ' ' << lp.row_name(i) << ':';
    bool row_first = true;
    for (const RowEntry& e : lp.row(i)) {
      write_term(out, e.value, lp.column_name(e.column), row_first);
      row_first = false;
    }
    if (row_first) out << " 0 " << (lp.num_columns() > 0 ? lp.column_name(0) : "x");
    switch (lp.sense(i)) {
      case RowSense::LessEqual: out << " <= "; break;
      case RowSense::Equal: out << " = "; break;
      case RowSense::GreaterEqual: out << " >= "; break;
    }
    out << lp.rhs(i) << '\n';
  }
  out << "Bounds\n";
  for (int j = 0; j < lp.num_columns(); ++j) {
    const double l = lp.lower(j), u = lp.upper(j);
    const std::string& name = lp.column_name(j);
    if (!std::isfinite(l) && !std::isfinite(u)) {
      out << ' ' << name << " free\n";
    } else if (l == u) {
      out << ' ' << name << " = " << l << '\n';
    } else {
      out << ' ';
      if (std::isfinite(l)) {
        out << l;
      } else {
        out << "-inf";
      }
      out << " <= " << name << " <= ";
      if (std::isfinite(u)) {
        out << u;
      } else {
        out << "+inf";
      }
      out << '\n';
    }
  }
  out << "End\n";
}

}  // namespace mgsddp
