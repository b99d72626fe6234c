#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedmask/model.hpp"

namespace fedmask {

struct TooFewSamples : std::runtime_error {
  TooFewSamples() : std::runtime_error("more parties than samples") {}
};

/// Two-class synthetic signal task: class 0 is a low-frequency sinusoid
/// mixture, class 1 a higher-frequency mixture with amplitude bursts.
/// Raw windows are reduced to banded log spectral power features, so a
/// small dense network (or a linear model) can separate them.
struct Dataset {
  Eigen::MatrixXd windows;       // samples x feature dim
  std::vector<int> labels;       // 0/1 per sample
  std::uint64_t generator_seed = 0;
  double heterogeneity = 0.0;
};

/// Per-party index lists over a shard's rows (60/20/20 by default).
struct Shard {
  int party_id = 0;
  Dataset data;
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  std::vector<int> test_idx;
};

struct Metrics {
  double precision = 0;
  double recall = 0;
  double accuracy = 0;
  double f1 = 0;
  bool degenerate = false;  // a zero denominator was hit
};

/// Deterministic per (seed, party_id); heterogeneity in [0,1] scales a
/// party-specific frequency/phase jitter.
Dataset generate(int n_samples, int dim, std::uint64_t seed, double heterogeneity, int party_id);

/// Splits a dataset's rows into disjoint contiguous shards and carves
/// 60/20/20 train/val/test index lists inside each shard.
std::vector<Shard> partition(const Dataset& dataset, int n_parties,
                             const std::vector<double>& weights = {});

/// Per-party generation (heterogeneous shards): each party gets its own
/// draw from the party-shifted distribution.
std::vector<Shard> generate_shards(int n_parties, int samples_per_party, int dim,
                                   std::uint64_t seed, double heterogeneity);

Metrics metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

Batch make_batch(const Dataset& d, const std::vector<int>& idx);
std::vector<int> predict(const NetworkSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& inputs);

void export_csv(const Dataset& d, const std::string& path);
Dataset import_csv(const std::string& path);

}  // namespace fedmask
