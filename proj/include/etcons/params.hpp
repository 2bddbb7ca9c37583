#pragma once

#include "etcons/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

namespace etcons {

struct AgentThreshold {
  double beta = 1.0;
  double lambda = 0.1;

  friend bool operator==(const AgentThreshold&, const AgentThreshold&) = default;
};

// Event-trigger design parameters. When `per_agent` is non-empty each agent
// uses its own (β_i, λ_i); the certificate then works with max β_i and min λ_i.
struct TriggerParams {
  double beta = 1.0;
  double lambda = 0.1;
  double delta_bar = 1.0;  // timeout: maximum inter-event time
  double gamma_d = 1.0;    // delay-error budget
  std::vector<AgentThreshold> per_agent;
  std::vector<double> clock_offsets;  // t_δ^i >= 0, empty means synchronized clocks

  double effective_beta() const {
    if (per_agent.empty()) return beta;
    return std::max_element(per_agent.begin(), per_agent.end(),
                            [](const auto& a, const auto& b) { return a.beta < b.beta; })
        ->beta;
  }

  double effective_lambda() const {
    if (per_agent.empty()) return lambda;
    return std::min_element(per_agent.begin(), per_agent.end(),
                            [](const auto& a, const auto& b) { return a.lambda < b.lambda; })
        ->lambda;
  }

  AgentThreshold threshold_for(AgentId i) const {
    return per_agent.empty() ? AgentThreshold{beta, lambda} : per_agent.at(i);
  }

  double clock_offset(AgentId i) const { return clock_offsets.empty() ? 0.0 : clock_offsets.at(i); }

  friend bool operator==(const TriggerParams&, const TriggerParams&) = default;
};

// MANSD = rho - 1 consecutive losses per link.
struct DropoutSpec {
  int rho = 2;
  double drop_prob = 0.0;

  friend bool operator==(const DropoutSpec&, const DropoutSpec&) = default;
};

enum class ConsensusMode { theorem, average };
enum class Consistency { non_consistent, consistent };

inline std::string_view to_string(ConsensusMode m) {
  return m == ConsensusMode::theorem ? "theorem" : "average";
}

inline std::string_view to_string(Consistency c) {
  return c == Consistency::consistent ? "consistent" : "non-consistent";
}

struct ChannelConfig {
  double delay_min = 0.0;
  double delay_max = 0.0;
  double drop_prob = 0.0;
  Consistency mode = Consistency::non_consistent;
  int rho = 2;
  std::uint64_t seed = 1;
};

}  // namespace etcons
