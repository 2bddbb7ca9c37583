#pragma once

#include "etcons/graph.hpp"
#include "etcons/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace etcons {

// Everything needed to certify and simulate one experiment.
struct Scenario {
  DirectedGraph graph;
  Eigen::MatrixXd x0;  // N x n, row i is agent i's initial state
  TriggerParams trigger;
  DropoutSpec dropout;
  double delay_min = 0.0;
  double delay_max = 0.0;
  Consistency consistency = Consistency::non_consistent;
  ConsensusMode mode = ConsensusMode::theorem;
  double t_final = 10.0;
  double tau_s = 1e-3;
  std::uint64_t seed = 1;
  std::optional<AgentId> root;  // smallest valid root when unset

  std::size_t agents() const { return graph.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(x0.cols()); }

  ChannelConfig channel() const {
    return ChannelConfig{delay_min, delay_max, dropout.drop_prob, consistency, dropout.rho, seed};
  }
};

// Root used for η and the reduced Laplacians.
inline AgentId resolve_root(const Scenario& s) {
  if (s.root) return *s.root;
  const auto info = has_spanning_tree(s.graph);
  if (!info.exists) throw AssumptionViolated("communication graph has no directed spanning tree");
  return info.roots.front();
}

// Euclidean norm of the stacked η_i = x_i - x_root, i != root. Rows are agents.
inline double disagreement(const Eigen::MatrixXd& states, AgentId root) {
  double sq = 0.0;
  const auto r = static_cast<Eigen::Index>(root);
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    if (i != r) sq += (states.row(i) - states.row(r)).squaredNorm();
  return std::sqrt(sq);
}

// Structural and parameter checks shared by certify and the engine.
inline void validate_scenario(const Scenario& s) {
  const auto n = s.agents();
  if (static_cast<std::size_t>(s.x0.rows()) != n || s.x0.cols() < 1)
    throw ScenarioError("x0 must have one row per agent and at least one column");
  const auto& p = s.trigger;
  if (!p.per_agent.empty()) {
    if (p.per_agent.size() != n) throw ScenarioError("per_agent must list one entry per agent");
    for (const auto& a : p.per_agent)
      if (!(a.beta > 0.0) || !(a.lambda > 0.0)) throw ScenarioError("per_agent beta/lambda must be positive");
  } else if (!(p.beta > 0.0) || !(p.lambda > 0.0)) {
    throw ScenarioError("beta and lambda must be positive");
  }
  if (!p.clock_offsets.empty()) {
    if (p.clock_offsets.size() != n) throw ScenarioError("clock_offsets must list one entry per agent");
    for (double o : p.clock_offsets)
      if (!(o >= 0.0)) throw ScenarioError("clock offsets must be nonnegative");
  }
  if (!(p.delta_bar > 0.0)) throw ScenarioError("delta_bar must be positive");
  if (!(p.gamma_d > 0.0)) throw ScenarioError("gamma_d must be positive");
  if (s.dropout.rho < 2) throw ScenarioError("rho must be an integer >= 2");
  if (!(s.dropout.drop_prob >= 0.0 && s.dropout.drop_prob <= 1.0))
    throw ScenarioError("drop_prob must lie in [0, 1]");
  if (!(s.delay_min >= 0.0 && s.delay_min <= s.delay_max))
    throw ScenarioError("delays must satisfy 0 <= delay_min <= delay_max");
  if (!(s.tau_s > 0.0)) throw ScenarioError("tau_s must be positive");
  if (!(s.t_final > 0.0)) throw ScenarioError("t_final must be positive");

  if (s.mode == ConsensusMode::theorem) {
    if (!has_spanning_tree(s.graph).exists)
      throw AssumptionViolated("communication graph has no directed spanning tree");
  } else {
    if (!is_undirected_connected(s.graph))
      throw AssumptionViolated("average mode needs an undirected connected graph");
    if (s.consistency != Consistency::consistent)
      throw AssumptionViolated("average mode needs a consistent channel");
  }
  if (s.root) {
    const auto info = has_spanning_tree(s.graph);
    if (std::find(info.roots.begin(), info.roots.end(), *s.root) == info.roots.end())
      throw NotARoot("agent " + std::to_string(*s.root + 1) + " is not a spanning-tree root");
  }
}

}  // namespace etcons
