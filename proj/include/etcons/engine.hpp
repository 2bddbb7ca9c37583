#pragma once

#include "etcons/agent.hpp"
#include "etcons/certificates.hpp"
#include "etcons/errors.hpp"
#include "etcons/network.hpp"
#include "etcons/scenario.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace etcons {

struct EventRecord {
  AgentId agent = 0;
  std::size_t step = 0;
  double time = 0.0;
  TriggerCause cause = TriggerCause::none;
};

// One (broadcast, receiver) pair. Undelivered-but-not-dropped rows are still
// in flight when the run ended.
struct DeliveryRecord {
  AgentId sender = 0;
  AgentId receiver = 0;
  std::size_t sent_step = 0;
  double sent_at = 0.0;
  bool dropped = false;
  std::optional<std::size_t> arrived_step;
  std::optional<double> arrived_at;
};

struct LinkSummary {
  AgentId sender = 0;
  AgentId receiver = 0;
  LinkStats stats;
};

// Grid-sampled record of a run. States and inputs are stored flat as
// [step][agent][component]; every series has `steps()` samples.
class TraceLog {
 public:
  TraceLog() = default;
  TraceLog(std::size_t agents, std::size_t dim, double tau_s, AgentId root)
      : agents_(agents), dim_(dim), tau_s_(tau_s), root_(root) {}

  std::size_t agents() const { return agents_; }
  std::size_t dim() const { return dim_; }
  double tau_s() const { return tau_s_; }
  AgentId root() const { return root_; }
  std::size_t steps() const { return times.size(); }

  Eigen::Map<const Eigen::VectorXd> state(std::size_t step, AgentId i) const {
    return {states.data() + (step * agents_ + i) * dim_, static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<const Eigen::VectorXd> input(std::size_t step, AgentId i) const {
    return {inputs.data() + (step * agents_ + i) * dim_, static_cast<Eigen::Index>(dim_)};
  }
  Eigen::MatrixXd state_matrix(std::size_t step) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(agents_), static_cast<Eigen::Index>(dim_));
    for (AgentId i = 0; i < agents_; ++i) m.row(static_cast<Eigen::Index>(i)) = state(step, i).transpose();
    return m;
  }

  void push_sample(double t, const Eigen::MatrixXd& x, const Eigen::MatrixXd& u) {
    times.push_back(t);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        states.push_back(x(i, c));
        inputs.push_back(u(i, c));
      }
    disagreement.push_back(etcons::disagreement(x, root_));
  }

  std::vector<double> times;
  std::vector<double> states;
  std::vector<double> inputs;
  std::vector<double> disagreement;
  std::vector<EventRecord> events;
  std::vector<DeliveryRecord> deliveries;
  std::vector<LinkSummary> links;
  std::vector<double> realized_delays;

 private:
  std::size_t agents_ = 0;
  std::size_t dim_ = 0;
  double tau_s_ = 0.0;
  AgentId root_ = 0;
};

inline std::size_t grid_steps(const Scenario& s) {
  return static_cast<std::size_t>(std::llround(s.t_final / s.tau_s));
}

struct RunOptions {
  bool strict = false;  // throw InvariantBreach on the first runtime violation
};

// Fixed-step simulation. Per grid instant t_k: trigger checks in ascending
// agent order and broadcast submission, then every delivery due by t_k
// (including zero-delay ones just submitted) and its ACK, then all inputs
// are recomputed and x <- x + u τ_s. Inputs are constant over a step, so the
// update is exact. The synchronized broadcast at t = 0 reaches everyone
// instantly.
inline TraceLog run(const Scenario& s, const RunOptions& opt = {}) {
  validate_scenario(s);
  const AgentId root = resolve_root(s);
  const std::size_t n = s.agents();
  const auto dim = static_cast<Eigen::Index>(s.state_dim());
  const std::size_t steps = grid_steps(s);

  std::vector<Agent> agents;
  std::vector<std::vector<AgentId>> receivers(n);
  agents.reserve(n);
  for (AgentId i = 0; i < n; ++i) {
    AgentConfig cfg{s.trigger.threshold_for(i), s.trigger.delta_bar, s.trigger.clock_offset(i), s.mode};
    agents.emplace_back(i, s.graph.in_neighbors(i), s.x0.row(static_cast<Eigen::Index>(i)).transpose(), cfg);
    receivers[i] = s.graph.out_neighbors(i);
  }
  LossyNetwork net(s.channel(), n, s.mode == ConsensusMode::average);

  TraceLog trace(n, s.state_dim(), s.tau_s, root);
  trace.times.reserve(steps + 1);
  trace.states.reserve((steps + 1) * n * s.state_dim());
  trace.inputs.reserve((steps + 1) * n * s.state_dim());

  // (sender, receiver, seq) -> row in trace.deliveries for packets in flight
  std::map<std::tuple<AgentId, AgentId, Seq>, std::size_t> in_flight;

  auto deliver = [&](const Packet& p, AgentId j) {
    if (auto ack = agents[j].on_receive(p)) agents[ack->sender].on_ack(net.ack_submit(*ack));
  };

  const double beta = s.trigger.effective_beta();
  const double lambda = s.trigger.effective_lambda();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), dim);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(n), dim);

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * s.tau_s;

    for (AgentId i = 0; i < n; ++i) {
      const TriggerCause cause = agents[i].trigger_cause(t);
      if (cause == TriggerCause::none) continue;
      const Packet p = agents[i].make_broadcast(t);
      trace.events.push_back({i, k, t, cause});
      if (cause == TriggerCause::initial) {
        for (AgentId j : receivers[i]) {
          deliver(p, j);
          trace.deliveries.push_back({i, j, k, t, false, k, t});
        }
        continue;
      }
      const auto sent = net.submit(p, receivers[i], t);
      for (AgentId j : receivers[i]) {
        const bool ok = std::any_of(sent.begin(), sent.end(), [j](const InTransit& m) { return m.receiver == j; });
        if (ok) in_flight[{i, j, p.seq}] = trace.deliveries.size();
        trace.deliveries.push_back({i, j, k, t, !ok, std::nullopt, std::nullopt});
      }
    }

    for (const InTransit& m : net.poll(t)) {
      deliver(m.packet, m.receiver);
      const auto it = in_flight.find({m.packet.sender, m.receiver, m.packet.seq});
      trace.deliveries[it->second].arrived_step = k;
      trace.deliveries[it->second].arrived_at = t;
      in_flight.erase(it);
    }

    for (AgentId i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      x.row(r) = agents[i].state().transpose();
      u.row(r) = agents[i].input().transpose();
    }
    trace.push_sample(t, x, u);

    if (opt.strict) {
      for (AgentId i = 0; i < n; ++i) {
        if (!x.row(static_cast<Eigen::Index>(i)).allFinite())
          throw InvariantBreach("non-finite state for agent " + std::to_string(i + 1) + " at t=" + std::to_string(t));
        if (agents[i].local_error().norm() > beta * std::exp(-lambda * t))
          throw InvariantBreach("local error above threshold for agent " + std::to_string(i + 1) +
                                " at t=" + std::to_string(t));
        for (AgentId j : receivers[i])
          if (net.link(i, j).consecutive_drops > s.dropout.rho - 1)
            throw InvariantBreach("MANSD exceeded on link " + std::to_string(i + 1) + "->" + std::to_string(j + 1));
      }
    }

    if (k < steps)
      for (AgentId i = 0; i < n; ++i) agents[i].integrate(u.row(static_cast<Eigen::Index>(i)).transpose(), s.tau_s);
  }

  for (AgentId i = 0; i < n; ++i)
    for (AgentId j : receivers[i]) trace.links.push_back({i, j, net.link(i, j)});
  trace.realized_delays = net.realized_delays();
  return trace;
}

// Largest pairwise distance between agent states at one sample.
inline double spread(const TraceLog& trace, std::size_t step) {
  double best = 0.0;
  for (AgentId i = 0; i < trace.agents(); ++i)
    for (AgentId j = i + 1; j < trace.agents(); ++j)
      best = std::max(best, (trace.state(step, i) - trace.state(step, j)).norm());
  return best;
}

inline std::size_t step_at(const TraceLog& trace, double t) {
  const auto k = static_cast<std::size_t>(std::llround(t / trace.tau_s()));
  return std::min(k, trace.steps() - 1);
}

inline double max_input_norm(const TraceLog& trace) {
  double best = 0.0;
  for (std::size_t k = 0; k < trace.steps(); ++k)
    for (AgentId i = 0; i < trace.agents(); ++i) best = std::max(best, trace.input(k, i).norm());
  return best;
}

// Per-agent broadcast intervals t_{k+1} - t_k.
inline std::vector<std::vector<double>> inter_event_intervals(const TraceLog& trace) {
  std::vector<std::vector<double>> out(trace.agents());
  std::vector<std::optional<double>> last(trace.agents());
  for (const auto& e : trace.events) {
    if (last[e.agent]) out[e.agent].push_back(e.time - *last[e.agent]);
    last[e.agent] = e.time;
  }
  return out;
}

// Longest run of consecutive losses per link, recomputed from the delivery log.
inline std::map<std::pair<AgentId, AgentId>, int> consecutive_drop_runs(const TraceLog& trace) {
  std::map<std::pair<AgentId, AgentId>, int> current;
  std::map<std::pair<AgentId, AgentId>, int> worst;
  for (const auto& d : trace.deliveries) {
    const auto key = std::make_pair(d.sender, d.receiver);
    int& c = current[key];
    c = d.dropped ? c + 1 : 0;
    worst[key] = std::max(worst[key], c);
  }
  return worst;
}

// ‖e_i‖ per step and agent, after trigger processing. Row-major [step][agent].
inline std::vector<double> local_error_norms(const TraceLog& trace) {
  const std::size_t n = trace.agents();
  std::vector<double> out(trace.steps() * n, 0.0);
  std::vector<std::size_t> sample(n, 0);
  std::size_t next = 0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    while (next < trace.events.size() && trace.events[next].step <= k) {
      sample[trace.events[next].agent] = trace.events[next].step;
      ++next;
    }
    for (AgentId i = 0; i < n; ++i) out[k * n + i] = (trace.state(sample[i], i) - trace.state(k, i)).norm();
  }
  return out;
}

// Largest view error max_{i->j} ‖x_ij - x_i(t)‖ per step, replaying the
// delivery log with the same staleness rule as the agents.
inline std::vector<double> view_error_norms(const TraceLog& trace) {
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < trace.deliveries.size(); ++r)
    if (trace.deliveries[r].arrived_step) order.push_back(r);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = trace.deliveries[a];
    const auto& db = trace.deliveries[b];
    return std::tie(*da.arrived_step, da.sender, da.receiver, da.sent_step) <
           std::tie(*db.arrived_step, db.sender, db.receiver, db.sent_step);
  });
  std::map<std::pair<AgentId, AgentId>, std::size_t> view;  // link -> sample step of held value
  std::vector<double> out(trace.steps(), 0.0);
  std::size_t next = 0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    while (next < order.size() && *trace.deliveries[order[next]].arrived_step <= k) {
      const auto& d = trace.deliveries[order[next]];
      const auto key = std::make_pair(d.sender, d.receiver);
      const auto it = view.find(key);
      if (it == view.end() || d.sent_step > it->second) view[key] = d.sent_step;
      ++next;
    }
    double worst = 0.0;
    for (const auto& [link, sent] : view)
      worst = std::max(worst, (trace.state(sent, link.first) - trace.state(k, link.first)).norm());
    out[k] = worst;
  }
  return out;
}

// Recomputes every control input from the event and delivery logs, the way
// the agents formed them: own sample (theorem mode) or last acknowledged
// sample (average mode) against the newest delivered neighbour samples.
// Returns the flat [step][agent][component] layout of TraceLog::inputs.
inline std::vector<double> replay_inputs(const TraceLog& trace, const DirectedGraph& g, ConsensusMode mode) {
  const std::size_t n = trace.agents();
  const std::size_t dim = trace.dim();
  // Per link (sender, receiver): (arrived_step, sent_step) in arrival order.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> arrivals(n * n);
  for (const auto& d : trace.deliveries)
    if (d.arrived_step) arrivals[d.sender * n + d.receiver].emplace_back(*d.arrived_step, d.sent_step);
  for (auto& a : arrivals) std::sort(a.begin(), a.end());
  std::vector<std::vector<std::size_t>> event_steps(n);
  for (const auto& e : trace.events) event_steps[e.agent].push_back(e.step);

  std::vector<std::size_t> next(n * n, 0);
  std::vector<std::optional<std::size_t>> held(n * n);  // sent_step of the newest sample on each link
  std::vector<std::size_t> event_cursor(n, 0);
  std::vector<std::optional<std::size_t>> own(n);
  std::vector<std::optional<std::size_t>> acked(n);
  std::vector<double> out(trace.steps() * n * dim, 0.0);

  for (std::size_t k = 0; k < trace.steps(); ++k) {
    for (AgentId i = 0; i < n; ++i) {
      auto& cur = event_cursor[i];
      while (cur < event_steps[i].size() && event_steps[i][cur] <= k) own[i] = event_steps[i][cur++];
    }
    for (std::size_t link = 0; link < n * n; ++link) {
      const auto& a = arrivals[link];
      while (next[link] < a.size() && a[next[link]].first <= k) {
        const std::size_t sent = a[next[link]++].second;
        if (!held[link] || sent > *held[link]) held[link] = sent;
        const AgentId sender = link / n;
        if (!acked[sender] || sent > *acked[sender]) acked[sender] = sent;
      }
    }
    for (AgentId i = 0; i < n; ++i) {
      const auto& mine = mode == ConsensusMode::average ? acked[i] : own[i];
      const Eigen::VectorXd own_value = mine ? Eigen::VectorXd(trace.state(*mine, i)) : Eigen::VectorXd(trace.state(0, i));
      Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
      for (AgentId j : g.in_neighbors(i)) {
        const auto& h = held[j * n + i];
        if (!h) throw ProtocolViolation("no sample of agent " + std::to_string(j + 1) + " reached agent " +
                                        std::to_string(i + 1) + " by step " + std::to_string(k));
        u -= own_value - trace.state(*h, j);
      }
      std::copy(u.data(), u.data() + dim, out.begin() + static_cast<std::ptrdiff_t>((k * n + i) * dim));
    }
  }
  return out;
}

struct CheckResult {
  explicit CheckResult(std::string check_name) : name(std::move(check_name)) {}

  std::string name;
  bool pass = true;
  bool exempt = false;
  double worst_margin = std::numeric_limits<double>::infinity();  // bound - observed, >= 0 when passing
  std::optional<double> first_violation;
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::string note;

  void observe(double margin, double t) {
    ++samples;
    worst_margin = std::min(worst_margin, margin);
    if (margin < 0.0) {
      ++violations;
      pass = false;
      if (!first_violation) first_violation = t;
    }
  }
};

struct VerificationReport {
  double slack = 0.0;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct VerifyOptions {
  // Multiplies the default slack (max ‖u‖ τ_s); 0 disables slack.
  double slack_scale = 1.0;
};

// Checks a trace against the certified bounds:
//   error_threshold        ‖e_i‖ <= β e^{-λt} + slack
//   disagreement_envelope  ‖η‖ <= β̂η0 e^{-λ̂t} + c (e^{-λt} - e^{-λ̂t}) + slack
//   inter_event            τ_s <= t_{k+1} - t_k <= δ̄ + τ_s, at most t_final/τ_s events
//   mansd                  consecutive drops per link <= ρ - 1
//   view_error             ‖e_ij‖ <= γ e^{-λt} + 2 slack, exempt when delay_max > d
//   average_preserved      |mean x(t) - mean x(0)| <= 1e-9 (average mode)
inline VerificationReport verify(const TraceLog& trace, const BoundsReport& b, const Scenario& s,
                                 const VerifyOptions& opt = {}) {
  VerificationReport rep;
  const std::size_t n = trace.agents();
  const double tau_s = trace.tau_s();
  rep.slack = opt.slack_scale * max_input_norm(trace) * tau_s;
  const double beta = b.beta;
  const double lambda = b.lambda;

  CheckResult err{"error_threshold"};
  const auto e_norms = local_error_norms(trace);
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    const double bound = beta * std::exp(-lambda * trace.times[k]) + rep.slack;
    for (AgentId i = 0; i < n; ++i) err.observe(bound - e_norms[k * n + i], trace.times[k]);
  }
  rep.checks.push_back(err);

  CheckResult env{"disagreement_envelope"};
  const double gap = b.lambda_hat - b.lambda;
  const double coupling = s.mode == ConsensusMode::average && b.lprime_norm
                              ? b.gamma * std::sqrt(static_cast<double>(n)) * *b.lprime_norm
                              : b.big_gamma;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    const double t = trace.times[k];
    const double bound = b.beta_hat * b.eta0 * std::exp(-b.lambda_hat * t) +
                         b.beta_hat * coupling / gap * (std::exp(-lambda * t) - std::exp(-b.lambda_hat * t)) +
                         rep.slack;
    env.observe(bound - trace.disagreement[k], t);
  }
  rep.checks.push_back(env);

  CheckResult iet{"inter_event"};
  const double lo = tau_s * (1.0 - 1e-9);
  const double hi = s.trigger.delta_bar + tau_s * (1.0 + 1e-9);
  const auto intervals = inter_event_intervals(trace);
  std::vector<std::size_t> counts(n, 0);
  for (const auto& e : trace.events) ++counts[e.agent];
  for (AgentId i = 0; i < n; ++i) {
    double t_acc = 0.0;
    for (double dt : intervals[i]) {
      t_acc += dt;
      iet.observe(std::min(dt - lo, hi - dt), t_acc);
    }
    const double cap = s.t_final / tau_s;
    iet.observe(cap + 1.0 - static_cast<double>(counts[i]), s.t_final);
  }
  rep.checks.push_back(iet);

  CheckResult mansd{"mansd"};
  for (const auto& [link, run] : consecutive_drop_runs(trace))
    mansd.observe(static_cast<double>(s.dropout.rho - 1 - run), 0.0);
  rep.checks.push_back(mansd);

  CheckResult view{"view_error"};
  const double d_cert = b.admissible_delay(s.mode);
  if (s.delay_max > d_cert) {
    view.exempt = true;
    view.note = "delay_max " + std::to_string(s.delay_max) + " exceeds certified delay " + std::to_string(d_cert);
  } else {
    const auto v = view_error_norms(trace);
    for (std::size_t k = 0; k < trace.steps(); ++k)
      view.observe(b.gamma * std::exp(-lambda * trace.times[k]) + 2.0 * rep.slack - v[k], trace.times[k]);
  }
  rep.checks.push_back(view);

  CheckResult avg{"average_preserved"};
  if (s.mode != ConsensusMode::average) {
    avg.exempt = true;
    avg.note = "theorem mode";
  } else {
    const Eigen::VectorXd mean0 = trace.state_matrix(0).colwise().mean().transpose();
    for (std::size_t k = 0; k < trace.steps(); ++k) {
      const Eigen::VectorXd mean = trace.state_matrix(k).colwise().mean().transpose();
      avg.observe(1e-9 - (mean - mean0).norm(), trace.times[k]);
    }
  }
  rep.checks.push_back(avg);
  return rep;
}

struct RunMetrics {
  double final_spread = 0.0;
  double min_inter_event = std::numeric_limits<double>::infinity();
  double max_inter_event = 0.0;
  std::vector<std::size_t> events_per_agent;
  std::size_t threshold_events = 0;
  std::size_t timeout_events = 0;
  std::size_t transmissions = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  int max_consecutive_drops = 0;
  std::vector<LinkSummary> links;
};

inline RunMetrics summarize(const TraceLog& trace) {
  RunMetrics m;
  m.final_spread = spread(trace, trace.steps() - 1);
  m.events_per_agent.assign(trace.agents(), 0);
  for (const auto& e : trace.events) {
    ++m.events_per_agent[e.agent];
    if (e.cause == TriggerCause::threshold) ++m.threshold_events;
    if (e.cause == TriggerCause::timeout) ++m.timeout_events;
  }
  for (const auto& per_agent : inter_event_intervals(trace))
    for (double dt : per_agent) {
      m.min_inter_event = std::min(m.min_inter_event, dt);
      m.max_inter_event = std::max(m.max_inter_event, dt);
    }
  for (const auto& l : trace.links) {
    m.transmissions += l.stats.sent;
    m.delivered += l.stats.delivered;
    m.dropped += l.stats.dropped;
    m.max_consecutive_drops = std::max(m.max_consecutive_drops, l.stats.max_consecutive_drops);
  }
  m.links = trace.links;
  return m;
}

}  // namespace etcons
