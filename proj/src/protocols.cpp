#include "fedmask/protocols.hpp"

#include <algorithm>

#include "fedmask/field.hpp"
#include "fedmask/model.hpp"

namespace fedmask {

namespace {

void check_lengths(const std::vector<RingVector>& secrets) {
  if (secrets.empty()) throw std::invalid_argument("no secrets");
  for (const auto& s : secrets)
    if (s.size() != secrets.front().size()) throw ShapeError("secret vector length mismatch");
}

}  // namespace

NeighborGraph build_neighbor_graph(int n, int k, std::mt19937_64& rng,
                                   const GraphOptions& options) {
  if (n < 1 || k < 0 || k > n - 1) throw std::invalid_argument("need 0 <= k <= n-1");
  if ((static_cast<long long>(n) * k) % 2 != 0) throw GraphInfeasible{};

  NeighborGraph g;
  g.n = n;
  g.k = k;
  g.neighbors.resize(n);

  if (!options.random_graph) {
    // Circulant: party j pairs with j +- 1 .. j +- k/2 (mod n); if k is
    // odd (n even), additionally the antipodal j + n/2.
    for (int j = 0; j < n; ++j) {
      for (int d = 1; d <= k / 2; ++d) {
        const int i = (j + d) % n;
        g.adjacency.insert({std::min(j, i), std::max(j, i)});
      }
    }
    if (k % 2 == 1) {
      for (int j = 0; j < n / 2; ++j) g.adjacency.insert({j, j + n / 2});
    }
  } else {
    // Configuration-model retries until a simple k-regular graph appears.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw GraphInfeasible{};
      std::vector<int> stubs;
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < k; ++c) stubs.push_back(j);
      std::shuffle(stubs.begin(), stubs.end(), rng);
      std::set<std::pair<int, int>> edges;
      bool ok = true;
      for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
        int a = stubs[i], b = stubs[i + 1];
        if (a == b || edges.contains({std::min(a, b), std::max(a, b)})) {
          ok = false;
          break;
        }
        edges.insert({std::min(a, b), std::max(a, b)});
      }
      if (ok) {
        g.adjacency = std::move(edges);
        break;
      }
    }
  }

  for (const auto& [a, b] : g.adjacency) {
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());

  if (options.use_dh) {
    const DhGroup group = options.group ? *options.group : dh_group_modp2048();
    std::vector<DhKeypair> keys(n);
    for (int j = 0; j < n; ++j) keys[j] = dh_keypair(group, rng);
    for (const auto& edge : g.adjacency) {
      SharedSeed seed = dh_shared(keys[edge.first].priv, keys[edge.second].pub, group);
      seed.pair = edge;
      g.seeds[edge] = seed;
    }
  } else {
    for (const auto& edge : g.adjacency) {
      SharedSeed seed;
      for (auto& byte : seed.bytes) byte = static_cast<std::uint8_t>(rng());
      seed.pair = edge;
      g.seeds[edge] = seed;
    }
  }
  return g;
}

AggregationResult masked_round(const std::vector<RingVector>& secrets, const NeighborGraph& graph,
                               std::uint64_t round, SimNet& net) {
  check_lengths(secrets);
  const int n = static_cast<int>(secrets.size());
  if (graph.n != n) throw std::invalid_argument("graph size mismatch");
  const std::size_t len = secrets.front().size();
  const int med = mediator_id(n);

  RingVector total(len);
  net.register_handler(med, [&](const Message& m) { total += RingVector{m.payload}; });

  for (int j = 0; j < n; ++j) {
    RingVector payload = secrets[j];
    for (int i : graph.neighbors[j]) {
      RingVector mask = mask_stream(graph.seed_for(j, i), round, len);
      if (j < i)
        payload += mask;
      else
        payload -= mask;
    }
    Message msg;
    msg.sender = j;
    msg.receiver = med;
    msg.round_tag = {round, 1};
    msg.payload = std::move(payload.elems);
    net.schedule(std::move(msg), 0.0);
  }

  AggregationResult result;
  result.transcript = net.run_until_idle();
  result.sum = std::move(total);
  return result;
}

AggregationResult nosmc_round(const std::vector<RingVector>& secrets, SimNet& net) {
  check_lengths(secrets);
  const int n = static_cast<int>(secrets.size());
  const std::size_t len = secrets.front().size();
  const int med = mediator_id(n);

  RingVector total(len);
  net.register_handler(med, [&](const Message& m) { total += RingVector{m.payload}; });
  for (int j = 0; j < n; ++j) {
    Message msg;
    msg.sender = j;
    msg.receiver = med;
    msg.round_tag = {0, 1};
    msg.payload = secrets[j].elems;
    net.schedule(std::move(msg), 0.0);
  }
  AggregationResult result;
  result.transcript = net.run_until_idle();
  result.sum = std::move(total);
  return result;
}

AggregationResult stsmc_round(const std::vector<RingVector>& secrets, std::mt19937_64& mask_rng,
                              SimNet& net, bool deliver_to_mediator) {
  check_lengths(secrets);
  const int n = static_cast<int>(secrets.size());
  if (n < 2) throw TooFewParties{};
  const std::size_t len = secrets.front().size();
  const int med = mediator_id(n);

  std::vector<RingVector> masks(n);
  for (auto& m : masks) {
    m = RingVector(len);
    for (auto& e : m.elems) e = mask_rng();
  }

  RingVector final_sum(len);
  bool done = false;
  for (int j = 0; j < n; ++j) {
    net.register_handler(j, [&, j](const Message& m) {
      RingVector running{m.payload};
      if (m.round_tag.phase == 1) {
        if (j == 0) {
          // Pass 1 closed the ring; start pass 2 by stripping our mask.
          running -= masks[0];
          Message next;
          next.sender = 0;
          next.receiver = 1 % n;
          next.round_tag = {m.round_tag.round, 2};
          next.payload = std::move(running.elems);
          net.schedule(std::move(next), m.deliver_time);
        } else {
          running += secrets[j] + masks[j];
          Message next;
          next.sender = j;
          next.receiver = (j + 1) % n;
          next.round_tag = {m.round_tag.round, 1};
          next.payload = std::move(running.elems);
          net.schedule(std::move(next), m.deliver_time);
        }
      } else {
        if (j == 0) {
          final_sum = std::move(running);
          done = true;
          if (deliver_to_mediator) {
            Message out;
            out.sender = 0;
            out.receiver = med;
            out.round_tag = {m.round_tag.round, 3};
            out.payload = final_sum.elems;
            net.schedule(std::move(out), m.deliver_time);
          }
        } else {
          running -= masks[j];
          Message next;
          next.sender = j;
          next.receiver = (j + 1) % n;
          next.round_tag = {m.round_tag.round, 2};
          next.payload = std::move(running.elems);
          net.schedule(std::move(next), m.deliver_time);
        }
      }
    });
  }
  net.register_handler(med, [](const Message&) {});

  Message first;
  first.sender = 0;
  first.receiver = 1 % n;
  first.round_tag = {0, 1};
  first.payload = (secrets[0] + masks[0]).elems;
  net.schedule(std::move(first), 0.0);

  AggregationResult result;
  result.transcript = net.run_until_idle();
  if (!done) throw RoundAborted("stsmc ring did not complete");
  result.sum = std::move(final_sum);
  return result;
}

AggregationResult shamir_round(const std::vector<RingVector>& secrets, int threshold,
                               std::mt19937_64& coeff_rng, SimNet& net) {
  check_lengths(secrets);
  const int n = static_cast<int>(secrets.size());
  if (n < 2) throw TooFewParties{};
  if (threshold < 2 || threshold > n) throw BadThreshold{};
  const std::size_t len = secrets.front().size();
  using field::FieldElement;

  // shares[p][q][e]: party p's share for evaluation point of party q.
  std::vector<std::vector<std::vector<std::uint64_t>>> outgoing(
      n, std::vector<std::vector<std::uint64_t>>(n, std::vector<std::uint64_t>(len)));
  for (int p = 0; p < n; ++p) {
    for (std::size_t e = 0; e < len; ++e) {
      std::vector<FieldElement> coeffs(threshold);
      coeffs[0] = field::embed_ring(secrets[p][e]);
      for (int c = 1; c < threshold; ++c) coeffs[c] = field::from_u64(coeff_rng());
      for (int q = 0; q < n; ++q)
        outgoing[p][q][e] = field::eval_poly(coeffs, field::from_u64(q + 1)).v;
    }
  }

  std::vector<std::vector<FieldElement>> aggregate(n, std::vector<FieldElement>(len));
  for (int q = 0; q < n; ++q) {
    net.register_handler(q, [&, q](const Message& m) {
      for (std::size_t e = 0; e < len; ++e)
        aggregate[q][e] = field::add(aggregate[q][e], {m.payload[e]});
    });
  }
  net.register_handler(mediator_id(n), [](const Message&) {});

  // Round 1: pairwise share distribution; own share is kept locally.
  for (int p = 0; p < n; ++p) {
    for (std::size_t e = 0; e < len; ++e)
      aggregate[p][e] = field::add(aggregate[p][e], {outgoing[p][p][e]});
    for (int q = 0; q < n; ++q) {
      if (q == p) continue;
      Message msg;
      msg.sender = p;
      msg.receiver = q;
      msg.round_tag = {0, 1};
      msg.payload = outgoing[p][q];
      net.schedule(std::move(msg), 0.0);
    }
  }
  AggregationResult result;
  result.transcript = net.run_until_idle();
  const double barrier = net.now();

  // Round 2: threshold-1 parties ship their aggregate shares to the
  // reconstructor (party 0), which contributes its own share, giving
  // total events = 2(n^2 - n + k - 1).
  std::vector<std::vector<FieldElement>> collected;
  std::vector<int> collected_points;
  collected.push_back(aggregate[0]);
  collected_points.push_back(1);
  net.register_handler(0, [&](const Message& m) {
    std::vector<FieldElement> v(len);
    for (std::size_t e = 0; e < len; ++e) v[e] = {m.payload[e]};
    collected.push_back(std::move(v));
    collected_points.push_back(m.sender + 1);
  });
  for (int q = 1; q < threshold; ++q) {
    Message msg;
    msg.sender = q;
    msg.receiver = 0;
    msg.round_tag = {0, 2};
    std::vector<std::uint64_t> payload(len);
    for (std::size_t e = 0; e < len; ++e) payload[e] = aggregate[q][e].v;
    msg.payload = std::move(payload);
    net.schedule(std::move(msg), barrier);
  }
  result.transcript.append(net.run_until_idle());

  if (static_cast<int>(collected.size()) != threshold)
    throw RoundAborted("missing aggregate shares");
  result.sum = RingVector(len);
  for (std::size_t e = 0; e < len; ++e) {
    std::vector<std::pair<FieldElement, FieldElement>> points;
    points.reserve(threshold);
    for (int i = 0; i < threshold; ++i)
      points.push_back({field::from_u64(collected_points[i]), collected[i][e]});
    result.sum[e] = field::unembed_sum(field::interpolate_at_zero(points), n);
  }
  return result;
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "nosmc") return Protocol::Nosmc;
  if (s == "stsmc") return Protocol::Stsmc;
  if (s == "shamir") return Protocol::Shamir;
  if (s == "masked") return Protocol::Masked;
  throw std::invalid_argument("unknown protocol: " + s);
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::Nosmc: return "nosmc";
    case Protocol::Stsmc: return "stsmc";
    case Protocol::Shamir: return "shamir";
    case Protocol::Masked: return "masked";
  }
  return "?";
}

AggregationResult aggregate_round(const std::vector<RingVector>& secrets,
                                  const ProtocolContext& ctx, std::uint64_t round, SimNet& net) {
  switch (ctx.protocol) {
    case Protocol::Nosmc:
      return nosmc_round(secrets, net);
    case Protocol::Stsmc:
      return stsmc_round(secrets, *ctx.rng, net);
    case Protocol::Shamir:
      return shamir_round(secrets, ctx.threshold, *ctx.rng, net);
    case Protocol::Masked:
      return masked_round(secrets, *ctx.graph, round, net);
  }
  throw std::logic_error("unreachable");
}

}  // namespace fedmask
