#pragma once

// Battery capacity-fade functions and their piecewise-linear cost ladders.
//
// Fade is normalised so that 1.0 means end of life. Depth-of-discharge fade
// is priced per kWh discharged at the terminals; state-of-charge fade is
// priced per kWh of distance from the reference level per hour.

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgsddp {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename F, typename Scalar>
concept FadeFunction = std::regular_invocable<const F&, Scalar> &&
                       std::convertible_to<std::invoke_result_t<const F&, Scalar>, Scalar>;

/// Quadratic cycle-depth fade  f(delta) = k_delta * delta^2.
template <typename Scalar = double>
struct DodFade {
  Scalar k_delta{0};

  Scalar operator()(Scalar delta) const { return k_delta * delta * delta; }
};

/// State-of-charge fade per hour: exponential above `flat_high`, flat on
/// [flat_low, flat_high), and a linear ramp below `flat_low` that reaches
/// f(1) at zero SOC.
template <typename Scalar = double>
struct SocFade {
  Scalar k_sigma1{0};
  Scalar k_sigma2{0};
  Scalar sigma_ref_exp{0.5};
  Scalar flat_low{0.1};
  Scalar flat_high{0.2};

  Scalar exponential(Scalar sigma) const {
    using std::exp;
    return k_sigma1 * exp(k_sigma2 * (sigma - sigma_ref_exp));
  }

  Scalar operator()(Scalar sigma) const {
    if (sigma >= flat_high) return exponential(sigma);
    const Scalar plateau = exponential(flat_high);
    if (sigma >= flat_low) return plateau;
    const Scalar top = exponential(Scalar(1));
    return top + sigma / flat_low * (plateau - top);
  }
};

template <typename Scalar>
Scalar eval_fade_dod(const DodFade<Scalar>& f, Scalar delta) {
  if (!(delta >= Scalar(0) && delta <= Scalar(1))) {
    throw std::domain_error("cycle depth outside [0, 1]");
  }
  return f(delta);
}

template <typename Scalar>
Scalar eval_fade_soc(const SocFade<Scalar>& f, Scalar sigma) {
  if (!(sigma >= Scalar(0) && sigma <= Scalar(1))) {
    throw std::domain_error("state of charge outside [0, 1]");
  }
  return f(sigma);
}

/// Marginal cost per kWh discharged for each of `segments` equal cycle-depth
/// segments:  C_k = R / (eta_d * soc_max) * K * [f(k/K) - f((k-1)/K)].
template <typename Scalar, typename Fade>
  requires FadeFunction<Fade, Scalar>
VectorX<Scalar> dod_cost_table(const Fade& f, Scalar replacement_total, Scalar eta_d,
                               Scalar soc_max, int segments) {
  if (segments < 1) throw std::invalid_argument("need at least one DOD segment");
  if (!(eta_d > Scalar(0)) || !(soc_max > Scalar(0))) {
    throw std::invalid_argument("DOD table needs positive efficiency and capacity");
  }
  VectorX<Scalar> costs(segments);
  const Scalar scale = replacement_total / (eta_d * soc_max) * Scalar(segments);
  for (int k = 1; k <= segments; ++k) {
    costs[k - 1] = scale * (f(Scalar(k) / Scalar(segments)) -
                            f(Scalar(k - 1) / Scalar(segments)));
  }
  return costs;
}

/// Upper edge of the plateau that minimises `f` on [0, 1], scaled to kWh.
/// Grid search followed by bisection on the plateau's right boundary.
template <typename Scalar, typename Fade>
  requires FadeFunction<Fade, Scalar>
Scalar soc_reference(const Fade& f, Scalar soc_max) {
  using std::abs;
  constexpr int kGrid = 10000;
  Scalar best = f(Scalar(0));
  for (int i = 1; i <= kGrid; ++i) {
    const Scalar v = f(Scalar(i) / Scalar(kGrid));
    if (v < best) best = v;
  }
  const Scalar tol = Scalar(1e-12) * (abs(best) > Scalar(0) ? abs(best) : Scalar(1));
  int first = -1, last = -1;
  for (int i = 0; i <= kGrid; ++i) {
    const bool on = f(Scalar(i) / Scalar(kGrid)) <= best + tol;
    if (on && first < 0) first = i;
    if (first >= 0) {
      if (!on) break;
      last = i;
    }
  }
  Scalar edge = Scalar(last) / Scalar(kGrid);
  if (last < kGrid) {
    Scalar lo = edge, hi = Scalar(last + 1) / Scalar(kGrid);
    for (int it = 0; it < 60; ++it) {
      const Scalar mid = (lo + hi) / Scalar(2);
      if (f(mid) <= best + tol) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    edge = lo;
  }
  return edge * soc_max;
}

/// The plateau of the piecewise SOC fade is known in closed form: with an
/// increasing exponential branch it ends at `flat_high`.
template <typename Scalar>
Scalar soc_reference(const SocFade<Scalar>& f, Scalar soc_max) {
  if (f.k_sigma2 > Scalar(0)) return f.flat_high * soc_max;
  return soc_max;
}

template <typename Scalar>
struct SocCostTables {
  VectorX<Scalar> up;  // nearest the reference first
  VectorX<Scalar> dn;
};

/// SOC ladders above and below the reference level:
///   C_up_k = R / soc_max * K_up * [f(s_ref + k/K_up (1 - s_ref)) - f(s_ref + (k-1)/K_up (1 - s_ref))]
///   C_dn_k = R / soc_max * K_dn * [f(s_ref - k/K_dn s_ref) - f(s_ref - (k-1)/K_dn s_ref)]
/// A side with zero width yields an empty table. Throws when a ladder is
/// not nondecreasing, which happens when the fade is not convex on that side.
template <typename Scalar, typename Fade>
  requires FadeFunction<Fade, Scalar>
SocCostTables<Scalar> soc_cost_tables(const Fade& f, Scalar replacement_total,
                                      Scalar soc_max, Scalar soc_ref, int seg_up,
                                      int seg_dn) {
  using std::abs;
  if (seg_up < 1 || seg_dn < 1) throw std::invalid_argument("need at least one SOC segment");
  if (!(soc_ref >= Scalar(0) && soc_ref <= soc_max)) {
    throw std::invalid_argument("SOC reference outside [0, soc_max]");
  }
  SocCostTables<Scalar> out;
  if (!(soc_max > Scalar(0))) {
    out.up.resize(0);
    out.dn.resize(0);
    return out;
  }
  const Scalar s_ref = soc_ref / soc_max;
  const Scalar scale = replacement_total / soc_max;
  auto check = [](const VectorX<Scalar>& t, const char* side) {
    for (Eigen::Index k = 1; k < t.size(); ++k) {
      const Scalar slack = Scalar(1e-12) * (abs(t[k]) + abs(t[k - 1]));
      if (t[k] < t[k - 1] - slack) {
        throw std::domain_error(std::string("SOC ") + side +
                                " ladder is not nondecreasing; fade is not convex there");
      }
    }
    if (t.size() > 0 && t[0] < -Scalar(1e-12) * (Scalar(1) + abs(t[0]))) {
      throw std::domain_error(std::string("SOC ") + side + " ladder has negative cost");
    }
  };
  if (s_ref < Scalar(1)) {
    out.up.resize(seg_up);
    const Scalar span = Scalar(1) - s_ref;
    for (int k = 1; k <= seg_up; ++k) {
      out.up[k - 1] = scale * Scalar(seg_up) *
                      (f(s_ref + Scalar(k) / Scalar(seg_up) * span) -
                       f(s_ref + Scalar(k - 1) / Scalar(seg_up) * span));
    }
    check(out.up, "up");
  } else {
    out.up.resize(0);
  }
  if (s_ref > Scalar(0)) {
    out.dn.resize(seg_dn);
    for (int k = 1; k <= seg_dn; ++k) {
      out.dn[k - 1] = scale * Scalar(seg_dn) *
                      (f(s_ref - Scalar(k) / Scalar(seg_dn) * s_ref) -
                       f(s_ref - Scalar(k - 1) / Scalar(seg_dn) * s_ref));
    }
    check(out.dn, "down");
  } else {
    out.dn.resize(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concrete double-precision model used by the dispatch LP.

/// Fade shapes and segment counts for one battery.
struct DegradationModel {
  DodFade<double> dod{3.092e-4};
  SocFade<double> soc{5.708e-6, 0.769, 0.5, 0.1, 0.2};
  int dod_segments = 5;
  int soc_up_segments = 4;
  int soc_dn_segments = 4;
};

/// Cost ladders for one storage.
struct DegradationTables {
  Eigen::VectorXd dod_costs;     // EUR per kWh discharged, per depth segment
  double soc_ref_energy = 0.0;   // kWh
  Eigen::VectorXd soc_up_costs;  // EUR per kWh above reference per hour
  Eigen::VectorXd soc_dn_costs;  // EUR per kWh below reference per hour
  double replacement_cost_total = 0.0;
  double soc_max = 0.0;

  int dod_segments() const { return static_cast<int>(dod_costs.size()); }
  double up_width() const {
    return soc_up_costs.size() ? (soc_max - soc_ref_energy) / soc_up_costs.size() : 0.0;
  }
  double dn_width() const {
    return soc_dn_costs.size() ? soc_ref_energy / soc_dn_costs.size() : 0.0;
  }
};

/// Builds the ladders for a battery of `soc_max` kWh with the given
/// replacement cost per kWh of capacity and discharge efficiency.
DegradationTables make_tables(const DegradationModel& model, double soc_max,
                              double replacement_cost_per_kwh, double eta_d);

/// Throws std::domain_error if a ladder is not nondecreasing or not finite.
void check_tables(const DegradationTables& tables);

// ---------------------------------------------------------------------------
// Cycle accounting

struct RainflowCycle {
  double depth;   // normalised range
  double weight;  // 1 for a full cycle, 0.5 for a residual half cycle
};

/// Rainflow counting (three-point rule, residual counted as half cycles) on
/// a normalised SOC trace.
std::vector<RainflowCycle> rainflow_cycles(const Eigen::Ref<const Eigen::VectorXd>& trace);

/// Total cycle fade of a normalised SOC trace: sum of weight * f(depth).
double rainflow_fade(const Eigen::Ref<const Eigen::VectorXd>& trace,
                     const DodFade<double>& f);

/// Cheapest-segment-first bookkeeping of the depth ladder. Energy held in a
/// segment is measured in stored kWh above the minimum SOC.
class DodLadder {
 public:
  /// `stored` is distributed over segments cheapest first.
  DodLadder(Eigen::VectorXd costs, double segment_width, double eta_d, double stored);
  DodLadder(Eigen::VectorXd costs, double segment_width, double eta_d,
            Eigen::VectorXd segments);

  /// Applies one step that adds `energy_in` and removes `energy_out` stored
  /// kWh (both >= 0). Throughput passes the cheapest segment; only the net
  /// change touches other segments. Returns the discharge cost in EUR.
  double step(double energy_in, double energy_out);

  const Eigen::VectorXd& segments() const { return level_; }
  double stored() const { return level_.sum(); }

 private:
  Eigen::VectorXd costs_;
  double width_;
  double eta_d_;
  Eigen::VectorXd level_;
};

/// Per-segment energy for `stored` kWh filled cheapest segment first.
Eigen::VectorXd fill_segments(double stored, int segments, double segment_width);

/// DOD cost of a normalised SOC trace priced by the ladder, starting from the
/// trace's first level filled cheapest first.
double ladder_dod_cost(const Eigen::Ref<const Eigen::VectorXd>& trace,
                       const DegradationTables& tables, double eta_d);

struct SocCost {
  double up = 0.0;
  double dn = 0.0;
};

/// SOC ladder cost of holding `soc` kWh (absolute) for `dt_hours`.
SocCost soc_holding_cost(double soc, const DegradationTables& tables, double dt_hours);

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationAssumptions {
  double fade_ratio = 1.85;       // fade at sigma_high relative to sigma_low
  double sigma_low = 0.1;
  double sigma_high = 0.9;
  double calendar_years = 20.0;   // end of life at the reference SOC, no cycling
  double cycle_count = 3000.0;    // cycles to end of life ...
  double cycle_depth = 0.8;       // ... at this depth ...
  double cycle_years = 10.0;      // ... over this many years
  double eol_fade = 1.0;
};

struct CalibratedCoefficients {
  double k_delta;
  double k_sigma1;
  double k_sigma2;
};

/// k_sigma2 from the SOC fade ratio, k_sigma1 from calendar life, and
/// k_delta so that cycling plus calendar fade over the cycle-life scenario
/// exhausts the end-of-life budget.
CalibratedCoefficients calibrate(const CalibrationAssumptions& a);

}  // namespace mgsddp
