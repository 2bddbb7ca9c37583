#pragma once

#include "etcons/errors.hpp"
#include "etcons/graph.hpp"
#include "etcons/params.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etcons {

using Seq = std::uint64_t;

struct Packet {
  AgentId sender = 0;
  Seq seq = 0;
  Eigen::VectorXd value;
  double sent_at = 0.0;
};

// Receipt confirmation in average mode; `sender` is the original broadcaster.
struct Ack {
  AgentId sender = 0;
  AgentId receiver = 0;
  Seq seq = 0;
  Eigen::VectorXd value;
};

enum class TriggerCause { none, initial, threshold, timeout };

inline std::string_view to_string(TriggerCause c) {
  switch (c) {
    case TriggerCause::initial: return "initial";
    case TriggerCause::threshold: return "threshold";
    case TriggerCause::timeout: return "timeout";
    case TriggerCause::none: break;
  }
  return "none";
}

struct NeighborView {
  Eigen::VectorXd value;  // x_ji: neighbour j's state as seen here
  Seq seq = 0;
};

struct AgentConfig {
  AgentThreshold threshold;
  double delta_bar = 1.0;
  double clock_offset = 0.0;
  ConsensusMode mode = ConsensusMode::theorem;
};

// One single-integrator agent running the event-triggered protocol.
//
// The agent owns its true state x, the last broadcast sample x(t_k), and one
// view per in-neighbour. In average mode it also keeps the ACK-confirmed copy
// of its own state that every receiver holds. No broadcast has happened at
// construction; the first should_trigger() call reports an initial event.
class Agent {
 public:
  Agent(AgentId id, std::vector<AgentId> neighbors, Eigen::VectorXd x0, AgentConfig config)
      : id_(id), neighbors_(std::move(neighbors)), config_(config), x_(std::move(x0)),
        last_value_(x_), self_view_(x_) {}

  AgentId id() const { return id_; }
  const std::vector<AgentId>& neighbors() const { return neighbors_; }
  const AgentConfig& config() const { return config_; }
  const Eigen::VectorXd& state() const { return x_; }
  const Eigen::VectorXd& last_broadcast_value() const { return last_value_; }
  double last_broadcast_time() const { return last_time_; }
  Seq seq() const { return seq_; }
  bool has_broadcast() const { return seq_ > 0; }
  const Eigen::VectorXd& self_view() const { return self_view_; }
  const std::map<AgentId, NeighborView>& views() const { return views_; }

  // e_i = x_i(t_k) - x_i(t)
  Eigen::VectorXd local_error() const { return last_value_ - x_; }

  double threshold(double t) const {
    return config_.threshold.beta * std::exp(-config_.threshold.lambda * (t + config_.clock_offset));
  }

  TriggerCause trigger_cause(double t) const {
    if (!has_broadcast()) return TriggerCause::initial;
    if (local_error().norm() >= threshold(t)) return TriggerCause::threshold;
    // Relative tolerance absorbs grid round-off in t - t_k.
    if (t - last_time_ >= config_.delta_bar * (1.0 - 1e-9)) return TriggerCause::timeout;
    return TriggerCause::none;
  }

  bool should_trigger(double t) const { return trigger_cause(t) != TriggerCause::none; }

  Packet make_broadcast(double t) {
    last_value_ = x_;
    last_time_ = t;
    ++seq_;
    if (config_.mode == ConsensusMode::average) pending_.emplace_back(seq_, x_);
    return Packet{id_, seq_, x_, t};
  }

  // Applies a neighbour's packet unless it is older than the view already
  // held. In average mode the receipt is acknowledged.
  std::optional<Ack> on_receive(const Packet& p) {
    if (std::find(neighbors_.begin(), neighbors_.end(), p.sender) == neighbors_.end())
      throw ProtocolViolation("agent " + std::to_string(id_ + 1) + " does not listen to agent " +
                              std::to_string(p.sender + 1));
    auto it = views_.find(p.sender);
    if (it == views_.end()) {
      views_.emplace(p.sender, NeighborView{p.value, p.seq});
    } else if (p.seq > it->second.seq) {
      it->second = NeighborView{p.value, p.seq};
    } else {
      return std::nullopt;  // stale
    }
    if (config_.mode == ConsensusMode::average) return Ack{p.sender, id_, p.seq, p.value};
    return std::nullopt;
  }

  void on_ack(const Ack& ack) {
    if (config_.mode != ConsensusMode::average)
      throw ProtocolViolation("acknowledgements are only used in average mode");
    if (ack.sender != id_ || ack.seq == 0 || ack.seq > seq_)
      throw ProtocolViolation("ack for unknown broadcast " + std::to_string(ack.seq) + " of agent " +
                              std::to_string(id_ + 1));
    if (ack.seq <= acked_seq_) return;  // duplicate or superseded
    while (!pending_.empty() && pending_.front().first < ack.seq) pending_.pop_front();
    if (pending_.empty() || pending_.front().first != ack.seq)
      throw ProtocolViolation("ack for unknown broadcast " + std::to_string(ack.seq));
    self_view_ = pending_.front().second;
    pending_.pop_front();
    acked_seq_ = ack.seq;
  }

  // u_i = -Σ_j (x_i(t_k) - x_ji)
  Eigen::VectorXd control_input() const { return input_against(last_value_); }

  // u_i = -Σ_j (x_ij - x_ji) with the ACK-confirmed own copy x_ij.
  Eigen::VectorXd control_input_avg() const { return input_against(self_view_); }

  Eigen::VectorXd input() const {
    return config_.mode == ConsensusMode::average ? control_input_avg() : control_input();
  }

  void integrate(const Eigen::VectorXd& u, double dt) { x_ += u * dt; }

 private:
  Eigen::VectorXd input_against(const Eigen::VectorXd& own) const {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(x_.size());
    for (AgentId j : neighbors_) {
      const auto it = views_.find(j);
      if (it == views_.end())
        throw ProtocolViolation("agent " + std::to_string(id_ + 1) + " has no view of agent " +
                                std::to_string(j + 1));
      u -= own - it->second.value;
    }
    return u;
  }

  AgentId id_;
  std::vector<AgentId> neighbors_;
  AgentConfig config_;
  Eigen::VectorXd x_;
  Eigen::VectorXd last_value_;
  double last_time_ = 0.0;
  Seq seq_ = 0;
  std::map<AgentId, NeighborView> views_;
  Eigen::VectorXd self_view_;
  Seq acked_seq_ = 0;
  std::deque<std::pair<Seq, Eigen::VectorXd>> pending_;
};

}  // namespace etcons
