#include "mgsddp/degradation.hpp"

#include <algorithm>
#include <cmath>

namespace mgsddp {

DegradationTables make_tables(const DegradationModel& model, double soc_max,
                              double replacement_cost_per_kwh, double eta_d) {
  DegradationTables t;
  t.soc_max = soc_max;
  t.replacement_cost_total = replacement_cost_per_kwh * soc_max;
  t.dod_costs = dod_cost_table<double>(model.dod, t.replacement_cost_total, eta_d,
                                       soc_max, model.dod_segments);
  t.soc_ref_energy = soc_reference(model.soc, soc_max);
  auto soc = soc_cost_tables<double>(model.soc, t.replacement_cost_total, soc_max,
                                     t.soc_ref_energy, model.soc_up_segments,
                                     model.soc_dn_segments);
  t.soc_up_costs = std::move(soc.up);
  t.soc_dn_costs = std::move(soc.dn);
  check_tables(t);
  return t;
}

void check_tables(const DegradationTables& t) {
  auto ladder = [](const Eigen::VectorXd& c, const char* what) {
    if (!c.allFinite()) throw std::domain_error(std::string(what) + " costs not finite");
    for (Eigen::Index k = 1; k < c.size(); ++k) {
      if (c[k] < c[k - 1] - 1e-12 * (std::abs(c[k]) + std::abs(c[k - 1]))) {
        throw std::domain_error(std::string(what) + " costs decrease with segment");
      }
    }
  };
  ladder(t.dod_costs, "DOD");
  ladder(t.soc_up_costs, "SOC up");
  ladder(t.soc_dn_costs, "SOC down");
  if (t.soc_dn_costs.size() && t.soc_dn_costs.minCoeff() < -1e-15) {
    throw std::domain_error("SOC down costs negative");
  }
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> reversals(const Eigen::Ref<const Eigen::VectorXd>& trace) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    const double v = trace[i];
    if (!out.empty() && v == out.back()) continue;
    if (out.size() >= 2) {
      const double a = out[out.size() - 2], b = out.back();
      if ((b - a) * (v - b) > 0.0) {
        out.back() = v;  // same direction: extend the ramp
        continue;
      }
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<RainflowCycle> rainflow_cycles(const Eigen::Ref<const Eigen::VectorXd>& trace) {
  if (trace.size() < 2) throw std::invalid_argument("rainflow needs at least two points");
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    if (!(trace[i] >= 0.0 && trace[i] <= 1.0)) {
      throw std::domain_error("SOC trace value outside [0, 1]");
    }
  }
  std::vector<RainflowCycle> cycles;
  std::vector<double> stack;
  for (double point : reversals(trace)) {
    stack.push_back(point);
    while (stack.size() >= 3) {
      const std::size_t n = stack.size();
      const double x = std::abs(stack[n - 1] - stack[n - 2]);
      const double y = std::abs(stack[n - 2] - stack[n - 3]);
      if (x < y) break;
      if (n == 3) {
        cycles.push_back({y, 0.5});
        stack.erase(stack.begin());
      } else {
        cycles.push_back({y, 1.0});
        stack.erase(stack.end() - 3, stack.end() - 1);
      }
    }
  }
  for (std::size_t i = 1; i < stack.size(); ++i) {
    cycles.push_back({std::abs(stack[i] - stack[i - 1]), 0.5});
  }
  return cycles;
}

double rainflow_fade(const Eigen::Ref<const Eigen::VectorXd>& trace,
                     const DodFade<double>& f) {
  double total = 0.0;
  for (const RainflowCycle& c : rainflow_cycles(trace)) total += c.weight * f(c.depth);
  return total;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd fill_segments(double stored, int segments, double segment_width) {
  Eigen::VectorXd level = Eigen::VectorXd::Zero(segments);
  double rest = std::max(0.0, stored);
  for (int k = 0; k < segments && rest > 0.0; ++k) {
    level[k] = std::min(segment_width, rest);
    rest -= level[k];
  }
  return level;
}

DodLadder::DodLadder(Eigen::VectorXd costs, double segment_width, double eta_d,
                     double stored)
    : costs_(std::move(costs)), width_(segment_width), eta_d_(eta_d) {
  level_ = fill_segments(stored, static_cast<int>(costs_.size()), width_);
}

DodLadder::DodLadder(Eigen::VectorXd costs, double segment_width, double eta_d,
                     Eigen::VectorXd segments)
    : costs_(std::move(costs)), width_(segment_width), eta_d_(eta_d),
      level_(std::move(segments)) {
  if (level_.size() != costs_.size()) {
    throw std::invalid_argument("ladder state and cost table differ in length");
  }
}

double DodLadder::step(double energy_in, double energy_out) {
  if (costs_.size() == 0) return 0.0;
  const double through = std::min(energy_in, energy_out);
  double cost = costs_[0] * eta_d_ * through;
  double net = energy_in - energy_out;
  if (net > 0.0) {
    for (Eigen::Index k = 0; k < level_.size() && net > 0.0; ++k) {
      const double add = std::min(width_ - level_[k], net);
      if (add <= 0.0) continue;
      level_[k] += add;
      net -= add;
    }
  } else {
    double need = -net;
    for (Eigen::Index k = 0; k < level_.size() && need > 0.0; ++k) {
      const double take = std::min(level_[k], need);
      level_[k] -= take;
      need -= take;
      cost += costs_[k] * eta_d_ * take;
    }
  }
  return cost;
}

double ladder_dod_cost(const Eigen::Ref<const Eigen::VectorXd>& trace,
                       const DegradationTables& tables, double eta_d) {
  if (trace.size() < 2) return 0.0;
  const double cap = tables.soc_max;
  const int segments = tables.dod_segments();
  DodLadder ladder(tables.dod_costs, cap / segments, eta_d, trace[0] * cap);
  double cost = 0.0;
  for (Eigen::Index t = 1; t < trace.size(); ++t) {
    const double delta = (trace[t] - trace[t - 1]) * cap;
    cost += delta > 0.0 ? ladder.step(delta, 0.0) : ladder.step(0.0, -delta);
  }
  return cost;
}

SocCost soc_holding_cost(double soc, const DegradationTables& t, double dt_hours) {
  SocCost out;
  double above = soc - t.soc_ref_energy;
  if (above > 0.0 && t.soc_up_costs.size()) {
    const double w = t.up_width();
    for (Eigen::Index k = 0; k < t.soc_up_costs.size() && above > 0.0; ++k) {
      const double part = k + 1 == t.soc_up_costs.size() ? above : std::min(w, above);
      out.up += t.soc_up_costs[k] * part * dt_hours;
      above -= part;
    }
  }
  double below = t.soc_ref_energy - soc;
  if (below > 0.0 && t.soc_dn_costs.size()) {
    const double w = t.dn_width();
    for (Eigen::Index k = 0; k < t.soc_dn_costs.size() && below > 0.0; ++k) {
      const double part = k + 1 == t.soc_dn_costs.size() ? below : std::min(w, below);
      out.dn += t.soc_dn_costs[k] * part * dt_hours;
      below -= part;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CalibratedCoefficients calibrate(const CalibrationAssumptions& a) {
  if (!(a.fade_ratio > 0.0) || !(a.calendar_years > 0.0) || !(a.cycle_count > 0.0) ||
      !(a.cycle_depth > 0.0) || !(a.cycle_years > 0.0) || !(a.eol_fade > 0.0) ||
      !(a.sigma_high > a.sigma_low)) {
    throw std::invalid_argument("calibration inputs must be positive");
  }
  constexpr double kHoursPerYear = 8760.0;
  CalibratedCoefficients c{};
  c.k_sigma2 = std::log(a.fade_ratio) / (a.sigma_high - a.sigma_low);
  c.k_sigma1 = a.eol_fade / (a.calendar_years * kHoursPerYear);
  const double calendar = a.cycle_years * kHoursPerYear * c.k_sigma1;
  const double cycling = a.eol_fade - calendar;
  if (!(cycling > 0.0)) {
    throw std::invalid_argument("calendar fade alone exhausts the end-of-life budget");
  }
  c.k_delta = cycling / (a.cycle_count * a.cycle_depth * a.cycle_depth);
  return c;
}

}  // namespace mgsddp
