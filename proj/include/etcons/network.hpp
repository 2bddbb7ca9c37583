#pragma once

#include "etcons/agent.hpp"
#include "etcons/errors.hpp"
#include "etcons/params.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace etcons {

// Uniform draws from a 64-bit Mersenne Twister. The conversion to [0, 1) is
// done here rather than through <random> distributions so that the stream is
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finaliser; derives independent stream seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct InTransit {
  Packet packet;
  AgentId receiver = 0;
  double arrival_time = 0.0;  // after FIFO clamping
  double delay = 0.0;         // realized channel delay before clamping
};

struct LinkStats {
  std::size_t sent = 0;
  std::size_t dropped = 0;
  std::size_t delivered = 0;
  int consecutive_drops = 0;
  int max_consecutive_drops = 0;
  double last_arrival = 0.0;
};

// Broadcast channel with Bernoulli losses capped by the MANSD, uniform
// delays and per-link FIFO order. In non-consistent mode every receiver gets
// its own loss and delay draw; in consistent mode one draw is shared by all
// receivers of a broadcast.
class LossyNetwork {
 public:
  LossyNetwork(ChannelConfig config, std::size_t n_agents, bool acks_enabled = false)
      : config_(config), n_(n_agents), acks_enabled_(acks_enabled), rng_(config.seed),
        links_(n_agents * n_agents) {
    if (config_.rho < 2) throw std::invalid_argument("rho must be >= 2");
    if (!(config_.delay_min >= 0.0 && config_.delay_min <= config_.delay_max))
      throw std::invalid_argument("need 0 <= delay_min <= delay_max");
  }

  const ChannelConfig& config() const { return config_; }

  // Returns the copies that will eventually arrive; receivers absent from the
  // result lost the packet.
  std::vector<InTransit> submit(const Packet& p, std::span<const AgentId> receivers, double t) {
    std::vector<InTransit> out;
    if (receivers.empty()) return out;
    const int cap = config_.rho - 1;

    if (config_.mode == Consistency::consistent) {
      bool forced = false;
      double last_arrival = 0.0;
      for (AgentId j : receivers) {
        forced = forced || link_mut(p.sender, j).consecutive_drops >= cap;
        last_arrival = std::max(last_arrival, link_mut(p.sender, j).last_arrival);
      }
      const bool drop = rng_.bernoulli(config_.drop_prob) && !forced;
      const double delay = drop ? 0.0 : draw_delay();
      const double arrival = std::max(t + delay, last_arrival);
      for (AgentId j : receivers) {
        if (record(p.sender, j, drop, arrival)) out.push_back(InTransit{p, j, arrival, delay});
      }
    } else {
      for (AgentId j : receivers) {
        const bool drop = rng_.bernoulli(config_.drop_prob) && link_mut(p.sender, j).consecutive_drops < cap;
        const double delay = drop ? 0.0 : draw_delay();
        const double arrival = std::max(t + delay, link_mut(p.sender, j).last_arrival);
        if (record(p.sender, j, drop, arrival)) out.push_back(InTransit{p, j, arrival, delay});
      }
    }
    transit_.insert(transit_.end(), out.begin(), out.end());
    return out;
  }

  // Removes and returns everything due by t, ordered by (arrival, sender, receiver).
  std::vector<InTransit> poll(double t) {
    if (t < last_poll_) throw ClockViolation("poll time went backwards");
    last_poll_ = t;
    const auto due_end = std::stable_partition(transit_.begin(), transit_.end(),
                                               [t](const InTransit& m) { return m.arrival_time <= t + 1e-12; });
    std::vector<InTransit> due(std::make_move_iterator(transit_.begin()), std::make_move_iterator(due_end));
    transit_.erase(transit_.begin(), due_end);
    std::sort(due.begin(), due.end(), [](const InTransit& a, const InTransit& b) {
      return std::tie(a.arrival_time, a.packet.sender, a.receiver, a.packet.seq) <
             std::tie(b.arrival_time, b.packet.sender, b.receiver, b.packet.seq);
    });
    return due;
  }

  // ACKs travel on an ideal side channel: never delayed, never dropped.
  Ack ack_submit(Ack ack) {
    if (!acks_enabled_) throw ProtocolViolation("acknowledgements are only used in average mode");
    ++acks_;
    return ack;
  }

  const LinkStats& link(AgentId sender, AgentId receiver) const { return links_[sender * n_ + receiver]; }
  std::size_t in_transit() const { return transit_.size(); }
  std::size_t acks() const { return acks_; }
  const std::vector<double>& realized_delays() const { return delays_; }

 private:
  LinkStats& link_mut(AgentId sender, AgentId receiver) { return links_[sender * n_ + receiver]; }

  double draw_delay() {
    const double d = config_.delay_min == config_.delay_max ? config_.delay_min
                                                             : rng_.uniform(config_.delay_min, config_.delay_max);
    delays_.push_back(d);
    return d;
  }

  // Updates the link counters; true when the copy is delivered.
  bool record(AgentId sender, AgentId receiver, bool drop, double arrival) {
    LinkStats& s = link_mut(sender, receiver);
    ++s.sent;
    if (drop) {
      ++s.dropped;
      ++s.consecutive_drops;
      s.max_consecutive_drops = std::max(s.max_consecutive_drops, s.consecutive_drops);
      return false;
    }
    ++s.delivered;
    s.consecutive_drops = 0;
    s.last_arrival = arrival;
    return true;
  }

  ChannelConfig config_;
  std::size_t n_;
  bool acks_enabled_;
  Rng rng_;
  std::vector<LinkStats> links_;
  std::vector<InTransit> transit_;
  std::vector<double> delays_;
  double last_poll_ = 0.0;
  std::size_t acks_ = 0;
};

}  // namespace etcons
