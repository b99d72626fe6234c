#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedmask/dh.hpp"
#include "fedmask/mask_stream.hpp"
#include "fedmask/ring.hpp"
#include "fedmask/simnet.hpp"

namespace fedmask {

struct GraphInfeasible : std::runtime_error {
  GraphInfeasible() : std::runtime_error("no k-regular graph: n*k is odd") {}
};
struct TooFewParties : std::runtime_error {
  TooFewParties() : std::runtime_error("protocol needs at least 2 parties") {}
};
struct BadThreshold : std::runtime_error {
  BadThreshold() : std::runtime_error("threshold outside [2, n]") {}
};
struct RoundAborted : std::runtime_error {
  explicit RoundAborted(const std::string& why) : std::runtime_error(why) {}
};

/// Parties are 0..n-1; the mediator uses the reserved id n.
constexpr int mediator_id(int n) { return n; }

/// Symmetric k-regular mask-sharing graph with one pairwise seed per edge.
struct NeighborGraph {
  int n = 0;
  int k = 0;
  std::set<std::pair<int, int>> adjacency;            // pairs with first < second
  std::map<std::pair<int, int>, SharedSeed> seeds;    // keyed like adjacency
  std::vector<std::vector<int>> neighbors;            // per party, sorted

  bool has_edge(int a, int b) const {
    return adjacency.contains({std::min(a, b), std::max(a, b)});
  }
  const SharedSeed& seed_for(int a, int b) const {
    return seeds.at({std::min(a, b), std::max(a, b)});
  }
};

struct GraphOptions {
  bool use_dh = true;           // false: derive seeds straight from the rng (fast tests)
  bool random_graph = false;    // false: circulant construction
  std::optional<DhGroup> group; // defaults to the 2048-bit MODP group
};

NeighborGraph build_neighbor_graph(int n, int k, std::mt19937_64& rng,
                                   const GraphOptions& options = {});

struct AggregationResult {
  RingVector sum;
  Transcript transcript;
};

/// Proposed scheme: each party sends its secret plus the signed sum of its
/// pairwise mask streams to the mediator; the masks cancel in the total.
/// Sign convention: the lower party id of an edge adds, the higher
/// subtracts.
AggregationResult masked_round(const std::vector<RingVector>& secrets, const NeighborGraph& graph,
                               std::uint64_t round, SimNet& net);

/// Direct sharing baseline, no masking.
AggregationResult nosmc_round(const std::vector<RingVector>& secrets, SimNet& net);

/// Ring-topology two-pass baseline: pass 1 accumulates secret+mask around
/// the ring, pass 2 strips the masks. The final holder is party 0; the
/// handoff to the mediator is only simulated (and counted) when
/// deliver_to_mediator is set.
AggregationResult stsmc_round(const std::vector<RingVector>& secrets, std::mt19937_64& mask_rng,
                              SimNet& net, bool deliver_to_mediator = false);

/// Shamir baseline over the 2^61-1 field: round 1 distributes shares
/// pairwise, round 2 has threshold-1 parties send aggregate shares to the
/// designated reconstructor (party 0), which interpolates at x = 0.
/// Party i's evaluation point is x = i + 1.
AggregationResult shamir_round(const std::vector<RingVector>& secrets, int threshold,
                               std::mt19937_64& coeff_rng, SimNet& net);

enum class Protocol { Nosmc, Stsmc, Shamir, Masked };

Protocol protocol_from_string(const std::string& s);
std::string to_string(Protocol p);

/// Uniform entry point used by the federation loop and the bench CLI.
struct ProtocolContext {
  Protocol protocol = Protocol::Masked;
  const NeighborGraph* graph = nullptr;  // masked
  int threshold = 2;                     // shamir
  std::mt19937_64* rng = nullptr;        // stsmc masks / shamir coefficients
};

AggregationResult aggregate_round(const std::vector<RingVector>& secrets,
                                  const ProtocolContext& ctx, std::uint64_t round, SimNet& net);

}  // namespace fedmask
