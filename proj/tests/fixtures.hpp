#pragma once

#include "mgsddp/core_model.hpp"

namespace mgsddp::testing {

inline StorageSpec battery(double capacity = 500.0, double power = 500.0) {
  StorageSpec s;
  s.name = "battery";
  s.soc_max = capacity;
  s.p_charge_max = power;
  s.p_discharge_max = power;
  s.eta_c = 0.96;
  s.eta_d = 0.96;
  s.replacement_cost_per_kwh = 100.0;
  s.degradation = DegradationModel{};
  return s;
}

inline StorageSpec hydrogen() {
  StorageSpec s;
  s.name = "h2";
  s.soc_max = 3300.0;
  s.p_charge_max = 55.0;
  s.p_discharge_max = 100.0;
  s.eta_c = 0.64;
  s.eta_d = 0.5;
  return s;
}

/// One diesel unit, one load, no renewables, no storage.
inline SystemSpec single_bus(double diesel_kw = 25.0) {
  SystemSpec s;
  s.generators.push_back({"diesel", diesel_kw, 0.1});
  s.loads.push_back({"demand", 5.0, 1.0});
  return s;
}

inline SystemSpec microgrid(double diesel_kw = 25.0, double battery_kwh = 500.0,
                            bool with_h2 = true) {
  SystemSpec s = single_bus(diesel_kw);
  s.vres.push_back({"wind", 135.0, VresSource::Wind});
  s.vres.push_back({"pv", 86.0, VresSource::Pv});
  s.storages.push_back(battery(battery_kwh));
  if (with_h2) s.storages.push_back(hydrogen());
  return s;
}

inline StageRealization flat_realization(const SystemSpec& spec, int hours, double demand,
                                         double vres_each = 0.0) {
  StageRealization w;
  w.demand = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(spec.loads.size()), hours, demand);
  w.vres_availability =
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(spec.vres.size()), hours, vres_each);
  return w;
}

}  // namespace mgsddp::testing
