#include "etcons/demo.hpp"
#include "etcons/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace etcons;

namespace {

Scenario chain_scenario() {
  Scenario s;
  s.graph = build_graph({{0, 0}, {1, 0}});
  s.x0.resize(2, 1);
  s.x0 << 1.0, -1.0;
  s.trigger.beta = 1.0;
  s.trigger.lambda = 0.4;
  s.trigger.delta_bar = 1.5;
  s.trigger.gamma_d = 1.0;
  s.dropout.rho = 2;
  s.t_final = 20.0;
  s.tau_s = 1e-3;
  return s;
}

Scenario average_pair() {
  Scenario s = chain_scenario();
  s.graph = build_graph({{0, 1}, {1, 0}});
  s.mode = ConsensusMode::average;
  s.consistency = Consistency::consistent;
  s.dropout = {3, 0.3};
  s.delay_min = 0.005;
  s.delay_max = 0.02;
  return s;
}

Scenario short_demo(double t_final = 8.0) {
  Scenario s = demo_scenario();
  s.t_final = t_final;
  return s;
}

}  // namespace

TEST(Disagreement, Examples) {
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(4, 2, 3.0);
  EXPECT_EQ(disagreement(same, 0), 0.0);
  Eigen::MatrixXd pair(2, 1);
  pair << 1.0, -1.0;
  EXPECT_DOUBLE_EQ(disagreement(pair, 0), 2.0);
  const Scenario s = demo_scenario();
  // [-1, 2, 3, 5, 4] - 1 = [-2, 1, 2, 4, 3]
  EXPECT_DOUBLE_EQ(disagreement(s.x0, 0), std::sqrt(34.0));
}

TEST(Run, GridLengthAndInitialBroadcast) {
  const auto trace = run(chain_scenario());
  EXPECT_EQ(trace.steps(), 20001u);
  EXPECT_DOUBLE_EQ(trace.times.back(), 20.0);
  ASSERT_GE(trace.events.size(), 2u);
  EXPECT_EQ(trace.events[0].cause, TriggerCause::initial);
  EXPECT_EQ(trace.events[1].cause, TriggerCause::initial);
  EXPECT_EQ(trace.state(0, 1)(0), -1.0);
}

TEST(Run, ChainFollowerTracksLeader) {
  const auto trace = run(chain_scenario());
  const std::size_t last = trace.steps() - 1;
  for (std::size_t k = 0; k < trace.steps(); k += 1000) EXPECT_EQ(trace.state(k, 0)(0), 1.0);
  EXPECT_LT(std::abs(trace.state(last, 1)(0) - 1.0), 1e-3);
}

TEST(Run, AveragePairConvergesToZero) {
  const auto trace = run(average_pair());
  const std::size_t last = trace.steps() - 1;
  EXPECT_LT(std::abs(trace.state(last, 0)(0)), 1e-3);
  EXPECT_LT(std::abs(trace.state(last, 1)(0)), 1e-3);
  for (std::size_t k = 0; k < trace.steps(); ++k)
    ASSERT_LT(std::abs(trace.state(k, 0)(0) + trace.state(k, 1)(0)), 1e-12);
}

TEST(Run, SixAgentsConverge) {
  const auto trace = run(demo_scenario());
  const double s5 = spread(trace, step_at(trace, 5.0));
  const double s10 = spread(trace, step_at(trace, 10.0));
  const double s15 = spread(trace, step_at(trace, 15.0));
  EXPECT_GT(s5, s10);
  EXPECT_GT(s10, s15);
  EXPECT_LT(spread(trace, trace.steps() - 1), 1e-2);
}

TEST(Run, DeterministicForFixedSeed) {
  const auto a = run(short_demo(4.0));
  const auto b = run(short_demo(4.0));
  EXPECT_EQ(a.states, b.states);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    EXPECT_EQ(a.events[k].agent, b.events[k].agent);
    EXPECT_EQ(a.events[k].step, b.events[k].step);
  }
  Scenario other = short_demo(4.0);
  other.seed = 2;
  EXPECT_NE(run(other).states, a.states);
}

TEST(Run, StatesAffineBetweenEventsAndDeliveries) {
  const Scenario s = short_demo(3.0);
  const auto trace = run(s);
  std::vector<bool> busy(trace.steps(), false);
  for (const auto& e : trace.events) busy[e.step] = true;
  for (const auto& d : trace.deliveries)
    if (d.arrived_step) busy[*d.arrived_step] = true;
  std::size_t checked = 0;
  for (std::size_t k = 1; k + 1 < trace.steps(); ++k) {
    if (busy[k] || busy[k + 1]) continue;
    for (AgentId i = 0; i < trace.agents(); ++i) {
      const double second = trace.state(k + 1, i)(0) - 2.0 * trace.state(k, i)(0) + trace.state(k - 1, i)(0);
      EXPECT_NEAR(second, 0.0, 1e-12);
    }
    ++checked;
  }
  EXPECT_GT(checked, trace.steps() / 2);
}

TEST(Run, ZeroMotionWhenStatesAgree) {
  Scenario s = short_demo(2.0);
  s.x0.setConstant(2.5);
  const auto trace = run(s);
  for (double d : trace.disagreement) EXPECT_EQ(d, 0.0);
  for (double u : trace.inputs) EXPECT_EQ(u, 0.0);
}

TEST(Run, VectorStates) {
  Scenario s = chain_scenario();
  s.x0.resize(2, 3);
  s.x0 << 1.0, 0.0, -2.0, 0.0, 1.0, 2.0;
  const auto trace = run(s);
  EXPECT_LT((trace.state(trace.steps() - 1, 1) - trace.state(0, 0)).norm(), 1e-3);
}

TEST(Run, RandomSpanningTreeScenariosReachConsensus) {
  std::mt19937_64 gen(2024);
  std::bernoulli_distribution edge(0.4);
  std::uniform_real_distribution<double> x(-3.0, 3.0);
  int done = 0;
  while (done < 5) {
    const std::size_t n = 3 + static_cast<std::size_t>(done);
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && edge(gen)) adj[i][j] = 1;
    Scenario s = chain_scenario();
    s.graph = build_graph(adj);
    if (!has_spanning_tree(s.graph).exists) continue;
    s.x0.resize(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index i = 0; i < s.x0.rows(); ++i) s.x0(i, 0) = x(gen);
    s.dropout = {3, 0.4};
    s.delay_min = 0.005;
    s.delay_max = 0.02;
    s.t_final = 30.0;
    s.seed = static_cast<std::uint64_t>(done + 1);
    const auto trace = run(s);
    const double bound = std::max(1e-2, 10.0 * std::exp(-0.4 * s.t_final));
    EXPECT_LT(spread(trace, trace.steps() - 1), bound) << "graph " << done;
    ++done;
  }
}

TEST(Run, ReplayedInputsMatchRecordedInputs) {
  const auto theorem = run(short_demo(4.0));
  EXPECT_EQ(replay_inputs(theorem, demo_scenario().graph, ConsensusMode::theorem), theorem.inputs);
  const Scenario avg = average_pair();
  const auto average = run(avg);
  EXPECT_EQ(replay_inputs(average, avg.graph, ConsensusMode::average), average.inputs);
}

TEST(Run, RejectsGraphWithoutSpanningTree) {
  Scenario s = chain_scenario();
  s.graph = build_graph({{0, 0}, {0, 0}});
  EXPECT_THROW(run(s), AssumptionViolated);
}

TEST(Run, AverageModeNeedsConsistentUndirectedSetup) {
  Scenario s = average_pair();
  s.consistency = Consistency::non_consistent;
  EXPECT_THROW(run(s), AssumptionViolated);
  s = average_pair();
  s.graph = build_graph({{0, 0}, {1, 0}});
  EXPECT_THROW(run(s), AssumptionViolated);
}

TEST(Verify, SixAgentRunPasses) {
  const Scenario s = demo_scenario();
  const auto bounds = certify(s);
  const auto trace = run(s);
  const auto rep = verify(trace, bounds, s);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.checks.size(), 6u);
  for (const char* name : {"error_threshold", "disagreement_envelope", "inter_event", "mansd"}) {
    const auto* c = rep.find(name);
    ASSERT_NE(c, nullptr);
    EXPECT_TRUE(c->pass) << name;
    EXPECT_FALSE(c->exempt) << name;
  }
  EXPECT_TRUE(rep.find("average_preserved")->exempt);
}

TEST(Verify, WideDelaysExemptViewCheckOnly) {
  Scenario s = short_demo(10.0);
  const auto bounds = certify(s);
  s.delay_max = 100.0 * bounds.d_max;
  const auto rep = verify(run(s), bounds, s);
  EXPECT_TRUE(rep.find("view_error")->exempt);
  EXPECT_TRUE(rep.passed());
}

TEST(Verify, ViewCheckActiveWhenDelaysCertified) {
  Scenario s = chain_scenario();
  s.delay_min = 0.0;
  s.delay_max = 0.0;
  s.dropout = {3, 0.3};
  const auto bounds = certify(s);
  const auto rep = verify(run(s), bounds, s);
  EXPECT_FALSE(rep.find("view_error")->exempt);
  EXPECT_TRUE(rep.passed());
}

TEST(Verify, AverageModeMeanPreserved) {
  const Scenario s = average_pair();
  const auto rep = verify(run(s), certify(s), s);
  const auto* avg = rep.find("average_preserved");
  ASSERT_NE(avg, nullptr);
  EXPECT_FALSE(avg->exempt);
  EXPECT_TRUE(avg->pass);
}

TEST(Verify, TamperedTraceFails) {
  const Scenario s = short_demo(4.0);
  const auto bounds = certify(s);
  auto trace = run(s);
  const std::size_t k = step_at(trace, 2.0);
  trace.states[k * trace.agents() + 3] += 5.0;
  const auto rep = verify(trace, bounds, s);
  EXPECT_FALSE(rep.passed());
  EXPECT_FALSE(rep.find("error_threshold")->pass);
  EXPECT_NEAR(*rep.find("error_threshold")->first_violation, 2.0, 1e-9);
}

TEST(Verify, InterEventBoundsAndTimeouts) {
  const Scenario s = chain_scenario();
  const auto trace = run(s);
  for (const auto& per_agent : inter_event_intervals(trace))
    for (double dt : per_agent) {
      EXPECT_GE(dt, s.tau_s * (1 - 1e-9));
      EXPECT_LE(dt, s.trigger.delta_bar + s.tau_s * (1 + 1e-9));
    }
  const auto m = summarize(trace);
  EXPECT_GT(m.timeout_events, 0u);
}

TEST(Metrics, CountsAreConsistent) {
  const auto trace = run(short_demo(5.0));
  const auto m = summarize(trace);
  EXPECT_EQ(m.transmissions, m.delivered + m.dropped);
  EXPECT_LE(m.max_consecutive_drops, 3);
  std::size_t events = 0;
  for (auto c : m.events_per_agent) events += c;
  EXPECT_EQ(events, trace.events.size());
  EXPECT_EQ(m.links.size(), 9u);
}
