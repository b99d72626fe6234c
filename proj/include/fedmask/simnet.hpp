#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "fedmask/ring.hpp"

namespace fedmask {

struct RoutingError : std::runtime_error {
  RoutingError() : std::runtime_error("message to unregistered receiver") {}
};

/// (N x N) per-link one-way delays in milliseconds, N = parties + mediator.
/// Diagonal zero; asymmetric routes allowed.
struct LatencyMatrix {
  Eigen::MatrixXd latency;

  int size() const { return static_cast<int>(latency.rows()); }
  double operator()(int from, int to) const { return latency(from, to); }
  void validate() const;
};

struct RoundTag {
  std::uint64_t round = 0;
  int phase = 0;
  bool operator==(const RoundTag&) const = default;
};

constexpr std::size_t kMessageHeaderBytes = 32;

struct Message {
  int sender = 0;
  int receiver = 0;
  RoundTag round_tag;
  std::vector<std::uint64_t> payload;  // ring or field elements
  std::size_t byte_size = 0;           // 8 * payload length + header
  double send_time = 0;
  double deliver_time = 0;
};

struct PartyCounters {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t bytes_out = 0;
  std::uint64_t bytes_in = 0;
};

struct Transcript {
  std::vector<Message> messages;  // in delivery order
  std::map<int, PartyCounters> counters;
  double critical_path_latency = 0;  // max deliver time observed

  void append(const Transcript& other);
};

/// Single-threaded deterministic scheduler. Handlers run synchronously at
/// delivery; ties break on (deliver_time, global sequence number).
class SimNet {
 public:
  using Handler = std::function<void(const Message&)>;

  explicit SimNet(LatencyMatrix latency);

  void register_handler(int party, Handler h);
  void schedule(Message msg, double at);
  const LatencyMatrix& latency() const { return latency_; }

  /// Drains the event queue; returns (and clears) the transcript of
  /// everything delivered since the last call.
  Transcript run_until_idle();

  /// Latest delivery time seen so far across all runs (barrier points).
  double now() const { return now_; }

 private:
  struct Pending {
    Message msg;
    std::uint64_t seq;
  };
  LatencyMatrix latency_;
  std::map<int, Handler> handlers_;
  std::vector<Pending> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0;
};

LatencyMatrix uniform_latency(int n_plus_mediator, double ms);
LatencyMatrix random_latency(int n_plus_mediator, std::uint64_t seed, double lo = 1.0,
                             double hi = 100.0);

}  // namespace fedmask
