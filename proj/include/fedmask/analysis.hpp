#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fedmask/protocols.hpp"
#include "fedmask/ring.hpp"
#include "fedmask/simnet.hpp"

namespace fedmask {

/// Honest-but-curious collusion attempt against one victim. Colluders
/// pool their protocol-internal state (pairwise seeds, received shares,
/// observed ring traffic); the mediator contributes the payloads it saw.
struct CollusionScenario {
  Protocol protocol = Protocol::Masked;
  std::set<int> colluders;       // party ids, victim excluded
  bool mediator_colludes = true;
  int victim = 0;
  int trials = 1;
  int threshold = 2;  // Shamir reconstruction threshold
};

struct AttackReport {
  bool exact_recovery = false;
  double residual_entropy_bits = 0;  // per ring element, estimated
  int trials = 0;
  double chi_square_p = 0;  // residual low-byte uniformity
};

/// Runs `trials` fresh aggregation rounds (distinct round tags, fixed
/// ground-truth secrets) and attacks each one. exact_recovery requires
/// every trial to reconstruct the victim's quantized secret bit-exactly;
/// otherwise the residuals are chi-square tested against uniform.
AttackReport collude(const CollusionScenario& scenario, const std::vector<RingVector>& secrets,
                     const NeighborGraph& graph, const LatencyMatrix& latency,
                     std::uint64_t rng_seed);

/// Completes a deficient (< threshold) Shamir point set with each of
/// `candidates` random hypothetical secrets; returns true when every
/// candidate admits a consistent polynomial (the share set reveals
/// nothing).
bool shamir_underdetermined(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& points,
                            int threshold, int candidates, std::uint64_t rng_seed);

/// One Table-4 style cell per protocol: message-count and closed-form
/// latency conformance for a single aggregation round.
struct ConformanceCell {
  std::string protocol;
  int n = 0;
  int k = 0;
  std::uint64_t total_events = 0;     // send + receive
  std::uint64_t expected_events = 0;
  bool counts_ok = false;
  double measured_latency = 0;
  double formula_latency = 0;
  bool latency_ok = false;
};

double closed_form_latency(Protocol protocol, const LatencyMatrix& latency, int n, int k);

/// Checks per-party send/receive counts against the analytic formulas.
bool counts_conform(Protocol protocol, const Transcript& transcript, int n, int k);

std::vector<ConformanceCell> verify_table4(const std::vector<int>& ns, int k, std::size_t dim,
                                           const LatencyMatrix* fixed_latency,
                                           std::uint64_t seed);

/// Upper-tail chi-square p-value for observed bucket counts vs uniform.
double chi_square_uniform_p(const std::vector<std::uint64_t>& bucket_counts);

std::string render_conformance_table(const std::vector<ConformanceCell>& cells);

}  // namespace fedmask
