#pragma once

#include "etcons/graph.hpp"
#include "etcons/scenario.hpp"

namespace etcons {

// Six agents on a directed, strongly connected graph with non-consistent
// losses (MANSD 3) and delays in [0.005, 0.02]. Edge list is a_ij = 1 for
// (1,2) (2,3) (2,5) (3,2) (3,6) (4,3) (4,5) (5,4) (6,1).
inline Scenario demo_scenario() {
  Scenario s;
  s.graph = build_graph({
      {0, 1, 0, 0, 0, 0},
      {0, 0, 1, 0, 1, 0},
      {0, 1, 0, 0, 0, 1},
      {0, 0, 1, 0, 1, 0},
      {0, 0, 0, 1, 0, 0},
      {1, 0, 0, 0, 0, 0},
  });
  s.x0.resize(6, 1);
  s.x0 << 1.0, -1.0, 2.0, 3.0, 5.0, 4.0;
  s.trigger.beta = 1.0;
  s.trigger.lambda = 0.4;
  s.trigger.gamma_d = 9.0;
  s.trigger.delta_bar = 1.5;
  s.dropout.rho = 4;
  // Loss rate and horizon are not part of the published setup.
  s.dropout.drop_prob = 0.5;
  s.delay_min = 0.005;
  s.delay_max = 0.02;
  s.consistency = Consistency::non_consistent;
  s.mode = ConsensusMode::theorem;
  s.t_final = 20.0;
  s.tau_s = 0.0002;
  s.seed = 1;
  return s;
}

}  // namespace etcons
