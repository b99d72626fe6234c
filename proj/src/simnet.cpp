#include "fedmask/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fedmask {

void LatencyMatrix::validate() const {
  if (latency.rows() != latency.cols()) throw std::invalid_argument("latency matrix must be square");
  for (Eigen::Index i = 0; i < latency.rows(); ++i) {
    if (latency(i, i) != 0.0) throw std::invalid_argument("latency diagonal must be zero");
    for (Eigen::Index j = 0; j < latency.cols(); ++j)
      if (!(latency(i, j) >= 0.0) || !std::isfinite(latency(i, j)))
        throw std::invalid_argument("latency entries must be finite and nonnegative");
  }
}

void Transcript::append(const Transcript& other) {
  messages.insert(messages.end(), other.messages.begin(), other.messages.end());
  for (const auto& [party, c] : other.counters) {
    PartyCounters& mine = counters[party];
    mine.sent += c.sent;
    mine.received += c.received;
    mine.bytes_out += c.bytes_out;
    mine.bytes_in += c.bytes_in;
  }
  critical_path_latency = std::max(critical_path_latency, other.critical_path_latency);
}

SimNet::SimNet(LatencyMatrix latency) : latency_(std::move(latency)) {
  latency_.validate();
}

void SimNet::register_handler(int party, Handler h) { handlers_[party] = std::move(h); }

void SimNet::schedule(Message msg, double at) {
  if (!handlers_.contains(msg.receiver)) throw RoutingError{};
  msg.send_time = at;
  msg.deliver_time = at + latency_(msg.sender, msg.receiver);
  msg.byte_size = 8 * msg.payload.size() + kMessageHeaderBytes;
  queue_.push_back({std::move(msg), next_seq_++});
}

Transcript SimNet::run_until_idle() {
  Transcript t;
  while (!queue_.empty()) {
    auto it = std::min_element(queue_.begin(), queue_.end(), [](const Pending& a, const Pending& b) {
      if (a.msg.deliver_time != b.msg.deliver_time) return a.msg.deliver_time < b.msg.deliver_time;
      return a.seq < b.seq;
    });
    Pending p = std::move(*it);
    queue_.erase(it);

    now_ = std::max(now_, p.msg.deliver_time);
    t.critical_path_latency = std::max(t.critical_path_latency, p.msg.deliver_time);
    PartyCounters& out = t.counters[p.msg.sender];
    out.sent += 1;
    out.bytes_out += p.msg.byte_size;
    PartyCounters& in = t.counters[p.msg.receiver];
    in.received += 1;
    in.bytes_in += p.msg.byte_size;

    const Message& delivered = t.messages.emplace_back(std::move(p.msg));
    handlers_.at(delivered.receiver)(delivered);
  }
  return t;
}

LatencyMatrix uniform_latency(int n_plus_mediator, double ms) {
  LatencyMatrix l;
  l.latency = Eigen::MatrixXd::Constant(n_plus_mediator, n_plus_mediator, ms);
  l.latency.diagonal().setZero();
  return l;
}

LatencyMatrix random_latency(int n_plus_mediator, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  LatencyMatrix l;
  l.latency.resize(n_plus_mediator, n_plus_mediator);
  for (int i = 0; i < n_plus_mediator; ++i)
    for (int j = 0; j < n_plus_mediator; ++j) l.latency(i, j) = i == j ? 0.0 : dist(rng);
  return l;
}

}  // namespace fedmask
