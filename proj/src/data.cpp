#include "fedmask/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace fedmask {

namespace {

constexpr int kWindowLen = 128;

/// Banded log spectral power of a raw window via a direct DFT.
Eigen::VectorXd spectral_features(const Eigen::VectorXd& window, int dim) {
  const int half = kWindowLen / 2;
  Eigen::VectorXd power(half);
  for (int f = 0; f < half; ++f) {
    double re = 0, im = 0;
    for (int t = 0; t < kWindowLen; ++t) {
      const double ang = -2.0 * std::numbers::pi * f * t / kWindowLen;
      re += window[t] * std::cos(ang);
      im += window[t] * std::sin(ang);
    }
    power[f] = re * re + im * im;
  }
  Eigen::VectorXd feat(dim);
  const int band = half / dim > 0 ? half / dim : 1;
  for (int b = 0; b < dim; ++b) {
    double s = 0;
    for (int f = b * band; f < (b + 1) * band && f < half; ++f) s += power[f];
    feat[b] = std::log1p(s);
  }
  return feat;
}

}  // namespace

Dataset generate(int n_samples, int dim, std::uint64_t seed, double heterogeneity, int party_id) {
  if (dim < 8) throw std::invalid_argument("feature dim must be >= 8");
  Dataset d;
  d.generator_seed = seed;
  d.heterogeneity = heterogeneity;
  d.windows.resize(n_samples, dim);
  d.labels.resize(n_samples);

  // Party-specific jitter parameters come from a dedicated stream; at
  // heterogeneity 0 every party draws from the identical distribution
  // (the per-party sample streams still differ — distinct patients).
  std::mt19937_64 party_rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(party_id) + 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double freq_jitter = heterogeneity * 4.0 * unit(party_rng);
  const double phase_jitter = heterogeneity * std::numbers::pi * unit(party_rng);
  const double amp_jitter = 1.0 + heterogeneity * 0.5 * unit(party_rng);

  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(party_id) << 32));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.3);

  for (int s = 0; s < n_samples; ++s) {
    const int label = s % 2;  // exact class balance
    Eigen::VectorXd w(kWindowLen);
    const int n_comp = 2 + static_cast<int>(u01(rng) * 2.0);
    std::vector<double> freqs(n_comp), phases(n_comp);
    for (int c = 0; c < n_comp; ++c) {
      const double lo = label == 0 ? 2.0 : 16.0;
      const double hi = label == 0 ? 8.0 : 40.0;
      freqs[c] = lo + u01(rng) * (hi - lo) + freq_jitter;
      phases[c] = u01(rng) * 2.0 * std::numbers::pi + phase_jitter;
    }
    const int burst_start = static_cast<int>(u01(rng) * (kWindowLen / 2));
    for (int t = 0; t < kWindowLen; ++t) {
      double v = 0;
      for (int c = 0; c < n_comp; ++c)
        v += amp_jitter * std::sin(2.0 * std::numbers::pi * freqs[c] * t / kWindowLen + phases[c]);
      if (label == 1 && t >= burst_start && t < burst_start + kWindowLen / 4) v *= 2.0;
      w[t] = v + noise(rng);
    }
    d.windows.row(s) = spectral_features(w, dim).transpose();
    d.labels[s] = label;
  }
  return d;
}

std::vector<Shard> partition(const Dataset& dataset, int n_parties,
                             const std::vector<double>& weights) {
  const int m = static_cast<int>(dataset.windows.rows());
  if (n_parties > m) throw TooFewSamples{};
  std::vector<int> sizes(n_parties);
  if (weights.empty()) {
    for (int p = 0; p < n_parties; ++p) sizes[p] = m / n_parties;
    sizes[n_parties - 1] = m - (m / n_parties) * (n_parties - 1);
  } else {
    if (static_cast<int>(weights.size()) != n_parties)
      throw std::invalid_argument("weight count must equal party count");
    int used = 0;
    for (int p = 0; p + 1 < n_parties; ++p) {
      sizes[p] = static_cast<int>(std::llround(weights[p] * m));
      used += sizes[p];
    }
    sizes[n_parties - 1] = m - used;
  }

  std::vector<Shard> shards(n_parties);
  int row = 0;
  for (int p = 0; p < n_parties; ++p) {
    Shard& sh = shards[p];
    sh.party_id = p;
    sh.data.generator_seed = dataset.generator_seed;
    sh.data.heterogeneity = dataset.heterogeneity;
    sh.data.windows.resize(sizes[p], dataset.windows.cols());
    sh.data.labels.resize(sizes[p]);
    for (int i = 0; i < sizes[p]; ++i, ++row) {
      sh.data.windows.row(i) = dataset.windows.row(row);
      sh.data.labels[i] = dataset.labels[row];
    }
    const int n = sizes[p];
    const int n_train = static_cast<int>(std::llround(n * 0.6));
    const int n_val = static_cast<int>(std::llround(n * 0.2));
    for (int i = 0; i < n; ++i) {
      if (i < n_train) sh.train_idx.push_back(i);
      else if (i < n_train + n_val) sh.val_idx.push_back(i);
      else sh.test_idx.push_back(i);
    }
  }
  return shards;
}

std::vector<Shard> generate_shards(int n_parties, int samples_per_party, int dim,
                                   std::uint64_t seed, double heterogeneity) {
  std::vector<Shard> shards;
  for (int p = 0; p < n_parties; ++p) {
    Dataset d = generate(samples_per_party, dim, seed, heterogeneity, p);
    Shard sh = partition(d, 1).front();
    sh.party_id = p;
    shards.push_back(std::move(sh));
  }
  return shards;
}

Metrics metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw EmptyBatch{};
  if (predictions.size() != labels.size()) throw ShapeError("metrics length mismatch");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] == 1)
      (predictions[i] == 1 ? tp : fn) += 1;
    else
      (predictions[i] == 1 ? fp : tn) += 1;
  }
  Metrics m;
  if (tp + fp > 0) m.precision = tp / (tp + fp); else m.degenerate = true;
  if (tp + fn > 0) m.recall = tp / (tp + fn); else m.degenerate = true;
  m.accuracy = (tp + tn) / (tp + fp + tn + fn);
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.degenerate = true;
  return m;
}

Batch make_batch(const Dataset& d, const std::vector<int>& idx) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(idx.size()), d.windows.cols());
  b.targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = d.windows.row(idx[i]);
    b.targets(static_cast<Eigen::Index>(i), d.labels[idx[i]]) = 1.0;
  }
  return b;
}

std::vector<int> predict(const NetworkSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd probs = forward(spec, params, inputs);
  std::vector<int> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

void export_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  for (Eigen::Index i = 0; i < d.windows.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.windows.cols(); ++j) out << d.windows(i, j) << ',';
    out << d.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

Dataset import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    labels.push_back(static_cast<int>(vals.back()));
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  Dataset d;
  d.windows.resize(static_cast<Eigen::Index>(rows.size()),
                   rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      d.windows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  d.labels = std::move(labels);
  return d;
}

}  // namespace fedmask
