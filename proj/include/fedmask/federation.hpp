#pragma once

#include <cstdint>
#include <vector>

#include "fedmask/data.hpp"
#include "fedmask/model.hpp"
#include "fedmask/protocols.hpp"
#include "fedmask/ring.hpp"
#include "fedmask/simnet.hpp"

namespace fedmask {

enum class Optimizer { Sgd, Adam };

struct FedConfig {
  int rounds = 50;
  int local_updates = 1;  // E, edge phase only
  double alpha = 1e-3;
  int batch_size = 16;
  Optimizer optimizer = Optimizer::Adam;
  Protocol protocol = Protocol::Masked;
  int k = 2;                  // mask-sharing neighbors / Shamir threshold
  bool weighted_mean = false; // edge phase: weight the head mean by m_j
  bool graph_use_dh = true;
  bool graph_random = false;
  FixedPointCodec codec;
};

struct RoundMetrics {
  int round = 0;
  double global_loss = 0;   // pooled train loss after the update
  double val_loss = 0;      // pooled validation loss
  double val_accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  double latency_ms = 0;
};

struct FedRunResult {
  ParamVector params;
  std::vector<RoundMetrics> metrics;
  Transcript transcript;  // every protocol message and broadcast, all rounds
};

/// Initialization phase: per round each party submits its unnormalized local
/// gradient (quantized, masked per the configured protocol); the mediator
/// divides the exact ring sum by the total sample count and applies the
/// optimizer step, then broadcasts the updated parameters.
FedRunResult run_init_phase(const std::vector<Shard>& shards, const NetworkSpec& spec,
                            const FedConfig& cfg, const LatencyMatrix& latency,
                            std::uint64_t seed, const ParamVector* initial = nullptr);

/// Edge phase: head-only local training over a frozen base; parties submit
/// quantized head weights after E local optimizer steps and the mediator
/// averages them (weight averaging, not gradient averaging).
/// train_full_network lifts the freeze for the full-training baseline.
FedRunResult run_edge_phase(const std::vector<Shard>& shards, const NetworkSpec& spec,
                            const ParamVector& initial, const FedConfig& cfg,
                            const LatencyMatrix& latency, std::uint64_t seed,
                            bool train_full_network = false);

/// Post-hoc per-party fine-tuning of the head on local train data.
ParamVector personalize(const NetworkSpec& spec, const ParamVector& global_params,
                        const Shard& shard, const FedConfig& cfg, int epochs, std::uint64_t seed);

/// First round (1-based) whose validation loss is <= threshold; -1 if the
/// budget never reaches it.
int first_round_below(const std::vector<RoundMetrics>& metrics, double threshold);

/// Contiguous-match scan: true iff some message payload contains the
/// quantization of any raw sample row. Asserted false on every federated
/// run (data locality).
bool transcript_contains_sample(const Transcript& transcript, const Eigen::MatrixXd& samples,
                                const FixedPointCodec& codec);

}  // namespace fedmask
