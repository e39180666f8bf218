#include "mgsddp/core_model.hpp"

#include "mgsddp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mgsddp {

namespace {

std::string tag(const std::string& kind, const std::string& element, int t) {
  return kind + "[" + element + "," + std::to_string(t) + "]";
}

std::string tag(const std::string& kind, const std::string& element, int k, int t) {
  return kind + "[" + element + "," + std::to_string(k) + "," + std::to_string(t) + "]";
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

const SystemSpec& validate_system(const SystemSpec& spec) {
  std::vector<std::string> issues;
  std::set<std::string> names;
  auto name = [&](const std::string& n) {
    if (n.empty()) issues.push_back("element with empty name");
    if (!names.insert(n).second) issues.push_back(n + ": duplicate name");
  };
  auto nonneg = [&](const std::string& n, const char* field, double v) {
    if (!finite_nonneg(v)) issues.push_back(n + "." + field + ": must be finite and >= 0");
  };

  for (const auto& g : spec.generators) {
    name(g.name);
    nonneg(g.name, "p_max", g.p_max);
    nonneg(g.name, "marginal_cost", g.marginal_cost);
  }
  for (const auto& r : spec.vres) {
    name(r.name);
    nonneg(r.name, "capacity", r.capacity);
  }
  if (spec.loads.empty()) issues.push_back("system: at least one load is required");
  for (const auto& d : spec.loads) {
    name(d.name);
    nonneg(d.name, "shed_cost", d.shed_cost);
    nonneg(d.name, "share", d.share);
  }
  for (const auto& e : spec.storages) {
    name(e.name);
    nonneg(e.name, "soc_min", e.soc_min);
    nonneg(e.name, "p_charge_max", e.p_charge_max);
    nonneg(e.name, "p_discharge_max", e.p_discharge_max);
    nonneg(e.name, "replacement_cost_per_kwh", e.replacement_cost_per_kwh);
    if (!(std::isfinite(e.soc_max) && e.soc_min < e.soc_max)) {
      issues.push_back(e.name + ".soc_max: must exceed soc_min");
    }
    if (!(e.eta_c > 0.0 && e.eta_c <= 1.0)) issues.push_back(e.name + ".eta_c: efficiency out of range");
    if (!(e.eta_d > 0.0 && e.eta_d <= 1.0)) issues.push_back(e.name + ".eta_d: efficiency out of range");
    if (e.degradation) {
      const DegradationModel& m = *e.degradation;
      if (m.dod_segments < 1 || m.soc_up_segments < 1 || m.soc_dn_segments < 1) {
        issues.push_back(e.name + ".degradation: segment counts must be >= 1");
      }
      if (!(m.dod.k_delta >= 0.0) || !(m.soc.k_sigma1 >= 0.0) || !(m.soc.k_sigma2 >= 0.0)) {
        issues.push_back(e.name + ".degradation: fade coefficients must be >= 0");
      }
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return spec;
}

TableSet make_table_set(const SystemSpec& spec) {
  TableSet out;
  for (const auto& e : spec.storages) {
    if (e.degradation) {
      out.push_back(make_tables(*e.degradation, e.soc_max, e.replacement_cost_per_kwh, e.eta_d));
    } else {
      out.emplace_back();
    }
  }
  return out;
}

int dod_segments(const StorageSpec& storage) {
  return storage.degradation ? storage.degradation->dod_segments : 1;
}

StateLayout state_layout(const SystemSpec& spec) {
  StateLayout layout;
  for (const auto& e : spec.storages) {
    layout.offset.push_back(layout.size);
    layout.segments.push_back(dod_segments(e));
    layout.size += layout.segments.back();
  }
  return layout;
}

StateVector initial_state(const SystemSpec& spec, double fraction) {
  const StateLayout layout = state_layout(spec);
  StateVector x(layout.size);
  for (std::size_t e = 0; e < spec.storages.size(); ++e) {
    const int k = layout.segments[e];
    const double usable = spec.storages[e].usable();
    x.segment(layout.offset[e], k) = fill_segments(fraction * usable, k, usable / k);
  }
  return x;
}

// ---------------------------------------------------------------------------

StageModel::StageModel(const SystemSpec& spec, TableSet tables, int hours, double dt_hours,
                       StageFlags flags, double theta_min)
    : spec_(validate_system(spec)),
      tables_(std::move(tables)),
      layout_(state_layout(spec)),
      hours_(hours),
      dt_(dt_hours),
      flags_(flags) {
  if (hours_ < 1) throw ValidationError("stage: hour count must be positive");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw ValidationError("stage: step length must be positive");
  if (!std::isfinite(theta_min)) throw ValidationError("stage: theta_min must be finite");
  if (tables_.size() != spec_.storages.size()) {
    throw ValidationError("stage: one degradation table entry per storage is required");
  }
  for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
    const auto& s = spec_.storages[e];
    if (s.degradation && (flags_.soc || flags_.dod) && !tables_[e]) {
      throw ValidationError(s.name + ": degradation tables missing");
    }
    if (tables_[e] && tables_[e]->dod_segments() != layout_.segments[e]) {
      throw ValidationError(s.name + ": table segment count differs from the model");
    }
  }

  const int nt = hours_;
  theta_ = lp_.add_column("theta", 1.0, theta_min, kInfinity);

  gen_.assign(spec_.generators.size(), std::vector<int>(nt));
  vres_.assign(spec_.vres.size(), std::vector<int>(nt));
  shed_.assign(spec_.loads.size(), std::vector<int>(nt));
  store_.resize(spec_.storages.size());
  for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
    const int k = layout_.segments[e];
    StorageIndex& ix = store_[e];
    ix.charge.assign(k, std::vector<int>(nt));
    ix.discharge.assign(k, std::vector<int>(nt));
    ix.soc.assign(k, std::vector<int>(nt));
    ix.ladders = flags_.soc && tables_[e].has_value();
    if (ix.ladders) {
      ix.up.assign(tables_[e]->soc_up_costs.size(), std::vector<int>(nt));
      ix.dn.assign(tables_[e]->soc_dn_costs.size(), std::vector<int>(nt));
    }
  }

  std::vector<RowEntry> row;
  for (int t = 0; t < nt; ++t) {
    for (std::size_t g = 0; g < spec_.generators.size(); ++g) {
      const auto& gen = spec_.generators[g];
      gen_[g][t] = lp_.add_column(tag("p", gen.name, t), gen.marginal_cost * dt_, 0.0, gen.p_max);
    }
    for (std::size_t r = 0; r < spec_.vres.size(); ++r) {
      vres_[r][t] = lp_.add_column(tag("pr", spec_.vres[r].name, t), 0.0, 0.0, 0.0);
    }
    for (std::size_t d = 0; d < spec_.loads.size(); ++d) {
      const auto& load = spec_.loads[d];
      shed_[d][t] = lp_.add_column(tag("pls", load.name, t), load.shed_cost * dt_, 0.0, 0.0);
    }
    for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
      const auto& s = spec_.storages[e];
      StorageIndex& ix = store_[e];
      const int nk = layout_.segments[e];
      const double width = s.usable() / nk;
      for (int k = 0; k < nk; ++k) {
        const double dod_cost = flags_.dod && tables_[e] ? tables_[e]->dod_costs[k] * dt_ : 0.0;
        ix.charge[k][t] = lp_.add_column(tag("psc", s.name, k, t), 0.0, 0.0, s.p_charge_max);
        ix.discharge[k][t] =
            lp_.add_column(tag("psd", s.name, k, t), dod_cost, 0.0, s.p_discharge_max);
        ix.soc[k][t] = lp_.add_column(tag("soc", s.name, k, t), 0.0, 0.0, width);
      }
      if (ix.ladders) {
        const DegradationTables& tb = *tables_[e];
        for (std::size_t k = 0; k < ix.up.size(); ++k) {
          ix.up[k][t] = lp_.add_column(tag("socup", s.name, static_cast<int>(k), t),
                                       tb.soc_up_costs[k] * dt_, 0.0, tb.up_width());
        }
        for (std::size_t k = 0; k < ix.dn.size(); ++k) {
          ix.dn[k][t] = lp_.add_column(tag("socdn", s.name, static_cast<int>(k), t),
                                       tb.soc_dn_costs[k] * dt_, 0.0, tb.dn_width());
        }
      }
    }

    // Power balance: supply + discharge + shedding = demand + charge.
    row.clear();
    for (const auto& g : gen_) row.push_back({g[t], 1.0});
    for (const auto& r : vres_) row.push_back({r[t], 1.0});
    for (const auto& d : shed_) row.push_back({d[t], 1.0});
    for (const auto& ix : store_) {
      for (std::size_t k = 0; k < ix.charge.size(); ++k) {
        row.push_back({ix.discharge[k][t], 1.0});
        row.push_back({ix.charge[k][t], -1.0});
      }
    }
    balance_.push_back(lp_.add_row("balance[" + std::to_string(t) + "]", RowSense::Equal, 0.0, row));

    for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
      const auto& s = spec_.storages[e];
      const StorageIndex& ix = store_[e];
      const int nk = layout_.segments[e];
      if (nk > 1) {
        row.clear();
        for (int k = 0; k < nk; ++k) row.push_back({ix.charge[k][t], 1.0});
        lp_.add_row(tag("charge_sum", s.name, t), RowSense::LessEqual, s.p_charge_max, row);
        row.clear();
        for (int k = 0; k < nk; ++k) row.push_back({ix.discharge[k][t], 1.0});
        lp_.add_row(tag("discharge_sum", s.name, t), RowSense::LessEqual, s.p_discharge_max, row);
      }
      for (int k = 0; k < nk; ++k) {
        row.clear();
        row.push_back({ix.soc[k][t], 1.0});
        row.push_back({ix.charge[k][t], -dt_ * s.eta_c});
        row.push_back({ix.discharge[k][t], dt_ / s.eta_d});
        if (t > 0) {
          row.push_back({ix.soc[k][t - 1], -1.0});
          lp_.add_row(tag("energy", s.name, k, t), RowSense::Equal, 0.0, row);
        } else {
          state_rows_.push_back(
              lp_.add_row(tag("energy", s.name, k, t), RowSense::Equal, 0.0, row,
                          RowTag::StateFixing));
        }
      }
      if (ix.ladders) {
        const double ref = tables_[e]->soc_ref_energy;
        row.clear();
        for (const auto& c : ix.up) row.push_back({c[t], 1.0});
        for (int k = 0; k < nk; ++k) row.push_back({ix.soc[k][t], -1.0});
        lp_.add_row(tag("soc_up", s.name, t), RowSense::GreaterEqual, s.soc_min - ref, row);
        row.clear();
        for (const auto& c : ix.dn) row.push_back({c[t], 1.0});
        for (int k = 0; k < nk; ++k) row.push_back({ix.soc[k][t], 1.0});
        lp_.add_row(tag("soc_dn", s.name, t), RowSense::GreaterEqual, ref - s.soc_min, row);
      }
    }
  }

  for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
    for (int k = 0; k < layout_.segments[e]; ++k) outgoing_.push_back(store_[e].soc[k][nt - 1]);
  }
}

void StageModel::apply(const StageRealization& w) {
  const auto nr = static_cast<Eigen::Index>(spec_.vres.size());
  const auto nd = static_cast<Eigen::Index>(spec_.loads.size());
  if (w.vres_availability.rows() != nr || w.vres_availability.cols() != hours_ ||
      w.demand.rows() != nd || w.demand.cols() != hours_) {
    throw ValidationError("realization: dimension mismatch with the stage (" +
                          std::to_string(hours_) + " hours)");
  }
  std::vector<std::string> issues;
  for (Eigen::Index r = 0; r < nr; ++r) {
    const double cap = spec_.vres[r].capacity;
    for (int t = 0; t < hours_; ++t) {
      const double a = w.vres_availability(r, t);
      if (!finite_nonneg(a) || a > cap * (1.0 + 1e-9) + 1e-9) {
        issues.push_back(tag("availability", spec_.vres[r].name, t) +
                         ": outside [0, capacity]");
        continue;
      }
      lp_.set_bounds(vres_[r][t], 0.0, std::min(a, cap));
    }
  }
  for (int t = 0; t < hours_; ++t) {
    double total = 0.0;
    for (Eigen::Index d = 0; d < nd; ++d) {
      const double v = w.demand(d, t);
      if (!finite_nonneg(v)) {
        issues.push_back(tag("demand", spec_.loads[d].name, t) + ": must be finite and >= 0");
        continue;
      }
      lp_.set_bounds(shed_[d][t], 0.0, v);
      total += v;
    }
    lp_.set_rhs(balance_[t], total);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

void StageModel::fix_state(const StateVector& x) {
  if (x.size() != layout_.size) throw ValidationError("state: dimension mismatch");
  for (std::size_t e = 0; e < spec_.storages.size(); ++e) {
    const double width = spec_.storages[e].usable() / layout_.segments[e];
    for (int k = 0; k < layout_.segments[e]; ++k) {
      const int i = layout_.offset[e] + k;
      if (!(x[i] >= -1e-7 && x[i] <= width + 1e-7)) {
        throw ValidationError(spec_.storages[e].name + " segment " + std::to_string(k) +
                              ": state outside [0, segment width]");
      }
      lp_.set_rhs(state_rows_[i], std::clamp(x[i], 0.0, width));
    }
  }
}

void StageModel::add_cut(double alpha, const Eigen::Ref<const Eigen::VectorXd>& beta) {
  if (beta.size() != layout_.size) throw ValidationError("cut: slope dimension mismatch");
  if (!std::isfinite(alpha) || !beta.allFinite()) throw ValidationError("cut: non-finite coefficient");
  std::vector<RowEntry> row;
  row.push_back({theta_, 1.0});
  for (int i = 0; i < layout_.size; ++i) {
    if (beta[i] != 0.0) row.push_back({outgoing_[i], -beta[i]});
  }
  lp_.add_row("cut[" + std::to_string(num_cuts_++) + "]", RowSense::GreaterEqual, alpha, row,
              RowTag::Cut);
}

LpSolution StageModel::solve(const SolverOptions& options, const Basis* warm) const {
  return mgsddp::solve(lp_, options, warm);
}

StageSolution StageModel::extract(const LpSolution& s) const {
  if (!s.optimal()) {
    throw SolveError(std::string("stage LP not optimal: ") + to_string(s.status) +
                     (s.diagnostics.empty() ? "" : " (" + s.diagnostics + ")"));
  }
  auto value = [&](int j) { return std::max(0.0, s.primal[j]); };
  auto fill = [&](const std::vector<std::vector<int>>& cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(cols.size()), hours_);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (int t = 0; t < hours_; ++t) m(static_cast<Eigen::Index>(i), t) = value(cols[i][t]);
    }
    return m;
  };

  StageSolution out;
  out.generation = fill(gen_);
  out.vres = fill(vres_);
  out.shedding = fill(shed_);
  for (const StorageIndex& ix : store_) {
    StorageTrace tr;
    tr.charge = fill(ix.charge);
    tr.discharge = fill(ix.discharge);
    tr.soc = fill(ix.soc);
    tr.soc_up = fill(ix.up);
    tr.soc_dn = fill(ix.dn);
    out.storage.push_back(std::move(tr));
  }
  out.outgoing_state.resize(layout_.size);
  out.state_duals.resize(layout_.size);
  for (int i = 0; i < layout_.size; ++i) {
    out.outgoing_state[i] = value(outgoing_[i]);
    out.state_duals[i] = s.duals[state_rows_[i]];
  }
  out.future_cost_estimate = s.primal[theta_];
  out.immediate_cost = std::max(0.0, s.objective - out.future_cost_estimate);
  out.basis = s.basis;
  return out;
}

StageModel build_stage_subproblem(const SystemSpec& spec, const TableSet& tables, int hours,
                                  double dt_hours, const StageRealization& realization,
                                  StageFlags flags, double theta_min) {
  StageModel model(spec, tables, hours, dt_hours, flags, theta_min);
  model.apply(realization);
  return model;
}

}  // namespace mgsddp
