#include "ef_oracle.hpp"
#include "fixtures.hpp"
#include "mgsddp/errors.hpp"
#include "mgsddp/sddp.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace mgsddp;
using namespace mgsddp::testing;

namespace {

double relative_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

/// Two stages, one realization in stage 1 and two equiprobable demands in stage 2.
ToyInstance two_stage_toy() {
  ToyInstance toy;
  toy.spec = single_bus(20.0);
  toy.spec.vres.push_back({"wind", 80.0, VresSource::Wind});
  StorageSpec b = battery(100.0, 40.0);
  b.degradation->dod_segments = 2;
  toy.spec.storages.push_back(b);
  PolicyNode first;
  first.hours = 2;
  first.flags = {false, true};
  StageRealization w1 = flat_realization(toy.spec, 2, 10.0, 50.0);
  first.scenarios.realizations.push_back(w1);
  PolicyNode second;
  second.hours = 2;
  second.flags = {false, true};
  for (double demand : {15.0, 55.0}) {
    StageRealization w = flat_realization(toy.spec, 2, demand, 0.0);
    w.probability = 0.5;
    second.scenarios.realizations.push_back(w);
  }
  toy.graph.nodes = {first, second};
  toy.initial = initial_state(toy.spec, 0.2);
  return toy;
}

}  // namespace

TEST_CASE("sddp: sampling helpers are deterministic") {
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == uniform01(b));
  }
  std::mt19937_64 rng(1);
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 30000; ++i) ++hits[sample_index({0.2, 0.0, 0.8}, rng)];
  CHECK(hits[1] == 0);
  CHECK(hits[0] == doctest::Approx(6000).epsilon(0.05));
}

TEST_CASE("sddp: graph validation") {
  PolicyGraph g;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  ToyInstance toy = two_stage_toy();
  toy.graph.nodes[1].scenarios.realizations[0].probability = 0.4;
  CHECK_THROWS_AS(toy.graph.validate(), ValidationError);
  toy = two_stage_toy();
  toy.graph.discount = 1.0;
  CHECK_THROWS_AS(toy.graph.validate(), ValidationError);
}

TEST_CASE("sddp: single stage bound is the LP optimum") {
  ToyInstance toy = two_stage_toy();
  toy.graph.nodes.resize(1);
  Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
  const TrainingLog log = sddp.train(toy.initial, 1, 3);
  StageModel m = build_stage_subproblem(toy.spec, make_table_set(toy.spec), 2, 1.0,
                                        toy.graph.nodes[0].scenarios.realizations[0], {false, true});
  m.fix_state(toy.initial);
  const double direct = m.solve().objective;
  CHECK(log.records.at(0).lower_bound == doctest::Approx(direct).epsilon(1e-9));
  CHECK(sddp.pool().total() == 0);
}

TEST_CASE("sddp: two-stage toy reaches the extensive form") {
  const ToyInstance toy = two_stage_toy();
  const double ef = extensive_form(toy);
  Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
  const TrainingLog log = sddp.train(toy.initial, 30, 5);
  CHECK(relative_gap(log.records.back().lower_bound, ef) < 1e-6);
  CHECK(relative_gap(sddp.expected_policy_cost(toy.initial), ef) < 1e-6);
}

TEST_CASE("sddp: first forward pass is myopic") {
  const ToyInstance toy = two_stage_toy();
  Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
  std::mt19937_64 rng(1);
  const auto path = sddp.forward_pass(toy.initial, rng);
  CHECK(path[0].solution.future_cost_estimate == 0.0);
  // Hand solve of stage 1 alone: wind covers the 10 kW load, nothing else has value.
  CHECK(path[0].solution.immediate_cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sddp: single-realization cut supports the value function") {
  ToyInstance toy = two_stage_toy();
  toy.graph.nodes[1].scenarios.realizations.resize(1);
  toy.graph.nodes[1].scenarios.realizations[0].probability = 1.0;
  const TableSet tables = make_table_set(toy.spec);
  Sddp sddp(toy.graph, toy.spec, tables);
  std::mt19937_64 rng(2);
  const auto path = sddp.forward_pass(toy.initial, rng);
  const auto cuts = sddp.backward_pass(path, 1);
  REQUIRE(cuts.size() == 1);
  const StateVector x = path[1].incoming;

  auto value = [&](const StateVector& state) {
    StageModel m = build_stage_subproblem(toy.spec, tables, 2, 1.0,
                                          toy.graph.nodes[1].scenarios.realizations[0], {false, true});
    m.fix_state(state);
    return m.solve().objective;
  };
  CHECK(cuts[0].value(x) == doctest::Approx(value(x)).epsilon(1e-9));
  // Convexity: the cut stays below the value function elsewhere.
  std::mt19937_64 probe(4);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 20; ++i) {
    StateVector y(x.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) y[k] = u(probe);
    CHECK(cuts[0].value(y) <= value(y) + 1e-7);
  }
}

TEST_CASE("sddp: determinism and degenerate sampling") {
  const ToyInstance toy = two_stage_toy();
  auto run = [&](std::uint64_t seed) {
    Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
    sddp.train(toy.initial, 5, seed);
    std::ostringstream out;
    write_policy(sddp.graph(), sddp.pool(), out);
    return out.str();
  };
  CHECK(run(11) == run(11));

  ToyInstance det = toy;
  det.graph.nodes[1].scenarios.realizations.resize(1);
  det.graph.nodes[1].scenarios.realizations[0].probability = 1.0;
  Sddp a(det.graph, det.spec, make_table_set(det.spec)), b(det.graph, det.spec, make_table_set(det.spec));
  std::mt19937_64 r1(1), r2(99);
  const auto pa = a.forward_pass(det.initial, r1);
  const auto pb = b.forward_pass(det.initial, r2);
  for (std::size_t s = 0; s < pa.size(); ++s) {
    CHECK(pa[s].solution.outgoing_state.isApprox(pb[s].solution.outgoing_state));
  }
}

TEST_CASE("sddp: random acyclic toys match the extensive form") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 6; ++trial) {
    const ToyInstance toy = random_toy(rng);
    const double ef = extensive_form(toy);
    Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
    const TrainingLog log = sddp.train(toy.initial, 150, 1000 + trial);
    for (std::size_t i = 1; i < log.records.size(); ++i) {
      const double prev = log.records[i - 1].lower_bound;
      CHECK(log.records[i].lower_bound >= prev - 1e-6 * (1.0 + std::abs(prev)));
    }
    CHECK(relative_gap(log.records.back().lower_bound, ef) < 1e-6);
    CHECK(relative_gap(sddp.expected_policy_cost(toy.initial), ef) < 1e-6);
  }
}

TEST_CASE("sddp: cuts never exceed the expected future cost") {
  std::mt19937_64 rng(7);
  ToyInstance toy = random_toy(rng);
  toy.graph.nodes.resize(2);
  const TableSet tables = make_table_set(toy.spec);
  Sddp sddp(toy.graph, toy.spec, tables);
  sddp.train(toy.initial, 10, 8);
  const PolicyNode& next = toy.graph.nodes[1];
  const double width = toy.spec.storages[0].usable() / state_layout(toy.spec).segments[0];
  std::uniform_real_distribution<double> u(0.0, width);
  for (int probe = 0; probe < 100; ++probe) {
    StateVector x(state_layout(toy.spec).size);
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = u(rng);
    double expected = 0.0;
    for (const auto& w : next.scenarios.realizations) {
      StageModel m = build_stage_subproblem(toy.spec, tables, next.hours, 1.0, w, next.flags);
      m.fix_state(x);
      expected += w.probability * m.solve().objective;
    }
    for (const Cut& c : sddp.pool().cuts[0]) CHECK(c.value(x) <= expected + 1e-6);
  }
}

TEST_CASE("sddp: cyclic node") {
  ToyInstance toy = two_stage_toy();
  toy.graph.cyclic = true;

  SUBCASE("zero discount gives zero self-cuts") {
    toy.graph.discount = 0.0;
    Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
    sddp.train(toy.initial, 3, 1);
    REQUIRE(!sddp.pool().cuts[1].empty());
    for (const Cut& c : sddp.pool().cuts[1]) {
      CHECK(c.alpha == 0.0);
      CHECK(c.beta.isZero());
    }
  }

  SUBCASE("discounted theta stays below the geometric bound") {
    toy.graph.discount = 0.7;
    Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
    const TrainingLog log = sddp.train(toy.initial, 20, 1);
    // Worst stage cost: every hour fully shed.
    double worst = 0.0;
    for (const auto& w : toy.graph.nodes[1].scenarios.realizations) {
      worst = std::max(worst, w.demand.sum() * toy.spec.loads[0].shed_cost);
    }
    for (const auto& w : toy.graph.nodes[1].scenarios.realizations) {
      const StageSolution s = sddp.evaluate_stage(1, toy.initial, w);
      CHECK(s.future_cost_estimate <= worst / (1.0 - 0.7) + 1e-6);
    }
    for (std::size_t i = 1; i < log.records.size(); ++i) {
      CHECK(log.records[i].lower_bound >= log.records[i - 1].lower_bound - 1e-6);
    }
    std::mt19937_64 rng(3);
    double mean = 0.0;
    for (int i = 0; i < 50; ++i) mean += sddp.simulate(toy.initial, rng) / 50.0;
    CHECK(log.records.back().lower_bound <= mean * (1.0 + 1e-3) + 1e-6);
  }
}

TEST_CASE("sddp: policy document round trip") {
  const ToyInstance toy = two_stage_toy();
  Sddp sddp(toy.graph, toy.spec, make_table_set(toy.spec));
  sddp.train(toy.initial, 4, 2);
  std::stringstream doc;
  write_policy(sddp.graph(), sddp.pool(), doc);
  const StoredPolicy p = read_policy(doc);
  CHECK(p.durations == std::vector<int>{2, 2});
  REQUIRE(p.pool.cuts.size() == 2);
  REQUIRE(p.pool.cuts[0].size() == sddp.pool().cuts[0].size());
  for (std::size_t i = 0; i < p.pool.cuts[0].size(); ++i) {
    CHECK(p.pool.cuts[0][i].alpha == sddp.pool().cuts[0][i].alpha);
    CHECK(p.pool.cuts[0][i].beta == sddp.pool().cuts[0][i].beta);
  }
  std::stringstream bad("{\"format\":\"other\"}");
  CHECK_THROWS_AS(read_policy(bad), ValidationError);
}
