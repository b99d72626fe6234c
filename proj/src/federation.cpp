#include "fedmask/federation.hpp"

#include <algorithm>
#include <cmath>

namespace fedmask {

namespace {

std::mt19937_64 party_stream(std::uint64_t seed, int party, std::uint64_t salt) {
  return std::mt19937_64(seed ^ (0x517cc1b727220a95ULL * (static_cast<std::uint64_t>(party) + 1)) ^ salt);
}

struct PooledEval {
  Batch train;
  Batch val;
};

PooledEval pool_eval_batches(const std::vector<Shard>& shards) {
  PooledEval out;
  std::vector<int> all_train, all_val;
  Eigen::Index rows_train = 0, rows_val = 0, dim = shards.front().data.windows.cols();
  for (const auto& sh : shards) {
    rows_train += static_cast<Eigen::Index>(sh.train_idx.size());
    rows_val += static_cast<Eigen::Index>(sh.val_idx.size());
  }
  out.train.inputs.resize(rows_train, dim);
  out.train.targets = Eigen::MatrixXd::Zero(rows_train, 2);
  out.val.inputs.resize(rows_val, dim);
  out.val.targets = Eigen::MatrixXd::Zero(rows_val, 2);
  Eigen::Index rt = 0, rv = 0;
  for (const auto& sh : shards) {
    for (int i : sh.train_idx) {
      out.train.inputs.row(rt) = sh.data.windows.row(i);
      out.train.targets(rt, sh.data.labels[i]) = 1.0;
      ++rt;
    }
    for (int i : sh.val_idx) {
      out.val.inputs.row(rv) = sh.data.windows.row(i);
      out.val.targets(rv, sh.data.labels[i]) = 1.0;
      ++rv;
    }
  }
  return out;
}

RoundMetrics evaluate_round(int round, const NetworkSpec& spec, const ParamVector& params,
                            const PooledEval& eval, const Transcript& round_transcript) {
  RoundMetrics m;
  m.round = round;
  m.global_loss = loss_mse(spec, params, eval.train);
  m.val_loss = loss_mse(spec, params, eval.val);
  std::vector<int> preds = predict(spec, params, eval.val.inputs);
  std::vector<int> labels(preds.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = eval.val.targets(static_cast<Eigen::Index>(i), 1) > 0.5 ? 1 : 0;
  Metrics mm = metrics(preds, labels);
  m.val_accuracy = mm.accuracy;
  m.precision = mm.precision;
  m.recall = mm.recall;
  m.f1 = mm.f1;
  for (const auto& [party, c] : round_transcript.counters) {
    m.messages += c.sent;
    m.bytes += c.bytes_out;
  }
  m.latency_ms = round_transcript.critical_path_latency;
  return m;
}

Transcript broadcast_params(const ParamVector& params, const FixedPointCodec& codec, int n,
                            std::uint64_t round, const LatencyMatrix& latency) {
  SimNet net(latency);
  RingVector q = quantize_vector(params.values, codec);
  for (int j = 0; j < n; ++j) net.register_handler(j, [](const Message&) {});
  for (int j = 0; j < n; ++j) {
    Message msg;
    msg.sender = mediator_id(n);
    msg.receiver = j;
    msg.round_tag = {round, 9};  // phase 9: model broadcast
    msg.payload = q.elems;
    net.schedule(std::move(msg), 0.0);
  }
  return net.run_until_idle();
}

ProtocolContext make_context(const FedConfig& cfg, const NeighborGraph* graph,
                             std::mt19937_64* rng) {
  ProtocolContext ctx;
  ctx.protocol = cfg.protocol;
  ctx.graph = graph;
  ctx.threshold = cfg.k;
  ctx.rng = rng;
  return ctx;
}

}  // namespace

FedRunResult run_init_phase(const std::vector<Shard>& shards, const NetworkSpec& spec,
                            const FedConfig& cfg, const LatencyMatrix& latency,
                            std::uint64_t seed, const ParamVector* initial) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  const int n = static_cast<int>(shards.size());
  spec.validate();

  std::mt19937_64 master(seed);
  std::mt19937_64 proto_rng = party_stream(seed, -1, 0xa5a5);
  // Dedicated stream for graph setup so the parameter trajectory is
  // identical across protocol choices under the same seed.
  std::mt19937_64 graph_rng = party_stream(seed, -2, 0x6789);
  GraphOptions gopt;
  gopt.use_dh = cfg.graph_use_dh;
  gopt.random_graph = cfg.graph_random;
  NeighborGraph graph;
  if (cfg.protocol == Protocol::Masked)
    graph = build_neighbor_graph(n, std::min(cfg.k, n - 1), graph_rng, gopt);

  ParamVector params = initial ? *initial : init_params(spec, master);
  std::uint64_t m_total = 0;
  std::vector<Batch> train_batches;
  for (const auto& sh : shards) {
    m_total += sh.train_idx.size();
    train_batches.push_back(make_batch(sh.data, sh.train_idx));
  }
  PooledEval eval = pool_eval_batches(shards);

  FedRunResult result;
  AdamState adam;
  ProtocolContext ctx = make_context(cfg, &graph, &proto_rng);

  for (int round = 1; round <= cfg.rounds; ++round) {
    std::vector<RingVector> submissions;
    submissions.reserve(n);
    for (int j = 0; j < n; ++j) {
      // Unnormalized sum over the party's local samples; the mediator
      // divides the aggregate by the global sample count.
      ParamVector g = grad(spec, params, train_batches[j], GradNorm::Sum);
      submissions.push_back(quantize_vector(g.values, cfg.codec));
    }
    SimNet net(latency);
    AggregationResult agg = aggregate_round(submissions, ctx, static_cast<std::uint64_t>(round), net);

    ParamVector global_grad;
    global_grad.values = dequantize_vector(agg.sum, cfg.codec) / static_cast<double>(m_total);
    if (cfg.optimizer == Optimizer::Sgd)
      params = sgd_step(params, global_grad, cfg.alpha);
    else
      params = adam_step(adam, params, global_grad, cfg.alpha);

    Transcript round_t = agg.transcript;
    round_t.append(broadcast_params(params, cfg.codec, n, static_cast<std::uint64_t>(round), latency));
    result.metrics.push_back(evaluate_round(round, spec, params, eval, round_t));
    result.transcript.append(round_t);
  }
  result.params = std::move(params);
  return result;
}

FedRunResult run_edge_phase(const std::vector<Shard>& shards, const NetworkSpec& spec,
                            const ParamVector& initial, const FedConfig& cfg,
                            const LatencyMatrix& latency, std::uint64_t seed,
                            bool train_full_network) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  const int n = static_cast<int>(shards.size());
  spec.validate();
  if (initial.values.size() != param_count(spec)) throw ShapeError("initial params mismatch");

  std::mt19937_64 master(seed);
  std::mt19937_64 proto_rng = party_stream(seed, -1, 0x5a5a);
  GraphOptions gopt;
  gopt.use_dh = cfg.graph_use_dh;
  gopt.random_graph = cfg.graph_random;
  NeighborGraph graph;
  if (cfg.protocol == Protocol::Masked)
    graph = build_neighbor_graph(n, std::min(cfg.k, n - 1), master, gopt);

  const Eigen::Index hoff = train_full_network ? 0 : head_offset(spec);
  const Eigen::Index hlen = param_count(spec) - hoff;

  std::vector<ParamVector> local(n, initial);
  std::vector<AdamState> adam(n);
  std::vector<std::size_t> cursor(n, 0);

  PooledEval eval = pool_eval_batches(shards);
  FedRunResult result;
  ProtocolContext ctx = make_context(cfg, &graph, &proto_rng);

  std::vector<double> weights(n, 1.0 / n);
  if (cfg.weighted_mean) {
    double m_total = 0;
    for (const auto& sh : shards) m_total += static_cast<double>(sh.train_idx.size());
    for (int j = 0; j < n; ++j) weights[j] = static_cast<double>(shards[j].train_idx.size()) / m_total;
  }

  ParamVector global = initial;
  for (int round = 1; round <= cfg.rounds; ++round) {
    std::vector<RingVector> submissions;
    submissions.reserve(n);
    for (int j = 0; j < n; ++j) {
      for (int step = 0; step < cfg.local_updates; ++step) {
        // Cyclic mini-batches over the local train split.
        std::vector<int> idx;
        const auto& train = shards[j].train_idx;
        for (int b = 0; b < cfg.batch_size; ++b) {
          idx.push_back(train[cursor[j] % train.size()]);
          ++cursor[j];
        }
        Batch batch = make_batch(shards[j].data, idx);
        ParamVector g = train_full_network ? grad(spec, local[j], batch, GradNorm::Mean)
                                           : grad_head(spec, local[j], batch, GradNorm::Mean);
        if (cfg.optimizer == Optimizer::Sgd)
          local[j] = sgd_step(local[j], g, cfg.alpha);
        else
          local[j] = adam_step(adam[j], local[j], g, cfg.alpha);
      }
      Eigen::VectorXd head_weights = local[j].values.segment(hoff, hlen) * weights[j] * n;
      submissions.push_back(quantize_vector(head_weights, cfg.codec));
    }
    SimNet net(latency);
    AggregationResult agg = aggregate_round(submissions, ctx, static_cast<std::uint64_t>(round), net);

    // Mean of the submitted head weights; submissions carry n*w_j scaling
    // so the plain 1/n of the ring sum realizes the configured weighting.
    Eigen::VectorXd mean_head = dequantize_vector(agg.sum, cfg.codec) / static_cast<double>(n);
    global.values.segment(hoff, hlen) = mean_head;
    for (int j = 0; j < n; ++j) local[j].values.segment(hoff, hlen) = mean_head;

    Transcript round_t = agg.transcript;
    {
      // Broadcast only the head slice.
      SimNet bnet(latency);
      RingVector q = quantize_vector(mean_head, cfg.codec);
      for (int j = 0; j < n; ++j) bnet.register_handler(j, [](const Message&) {});
      for (int j = 0; j < n; ++j) {
        Message msg;
        msg.sender = mediator_id(n);
        msg.receiver = j;
        msg.round_tag = {static_cast<std::uint64_t>(round), 9};
        msg.payload = q.elems;
        bnet.schedule(std::move(msg), 0.0);
      }
      round_t.append(bnet.run_until_idle());
    }
    result.metrics.push_back(evaluate_round(round, spec, global, eval, round_t));
    result.transcript.append(round_t);
  }
  result.params = std::move(global);
  return result;
}

ParamVector personalize(const NetworkSpec& spec, const ParamVector& global_params,
                        const Shard& shard, const FedConfig& cfg, int epochs, std::uint64_t seed) {
  if (shard.train_idx.empty()) throw EmptyBatch{};
  ParamVector params = global_params;
  AdamState adam;
  std::size_t cursor = 0;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(shard.train_idx.size()) / std::max(1, cfg.batch_size));
  (void)seed;
  for (int e = 0; e < epochs; ++e) {
    for (int s = 0; s < steps_per_epoch; ++s) {
      std::vector<int> idx;
      for (int b = 0; b < cfg.batch_size; ++b) {
        idx.push_back(shard.train_idx[cursor % shard.train_idx.size()]);
        ++cursor;
      }
      Batch batch = make_batch(shard.data, idx);
      ParamVector g = grad_head(spec, params, batch, GradNorm::Mean);
      if (cfg.optimizer == Optimizer::Sgd)
        params = sgd_step(params, g, cfg.alpha);
      else
        params = adam_step(adam, params, g, cfg.alpha);
    }
  }
  return params;
}

int first_round_below(const std::vector<RoundMetrics>& metrics, double threshold) {
  for (const auto& m : metrics)
    if (m.val_loss <= threshold) return m.round;
  return -1;
}

bool transcript_contains_sample(const Transcript& transcript, const Eigen::MatrixXd& samples,
                                const FixedPointCodec& codec) {
  std::vector<std::vector<std::uint64_t>> patterns;
  patterns.reserve(samples.rows());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    Eigen::VectorXd row = samples.row(i).transpose();
    patterns.push_back(quantize_vector(row, codec).elems);
  }
  for (const Message& msg : transcript.messages) {
    for (const auto& pat : patterns) {
      if (pat.empty() || pat.size() > msg.payload.size()) continue;
      auto it = std::search(msg.payload.begin(), msg.payload.end(), pat.begin(), pat.end());
      if (it != msg.payload.end()) return true;
    }
  }
  return false;
}

}  // namespace fedmask
