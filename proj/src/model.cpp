#include "fedmask/model.hpp"

#include <cmath>

namespace fedmask {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const MatrixXd> weight_at(const NetworkSpec& spec, const VectorXd& values, int layer) {
  const Index off = layer_param_offset(spec, layer);
  const Index out = spec.layer_sizes[layer + 1];
  const Index in = spec.layer_sizes[layer];
  return {values.data() + off, out, in};
}

Eigen::Map<const VectorXd> bias_at(const NetworkSpec& spec, const VectorXd& values, int layer) {
  const Index off = layer_param_offset(spec, layer);
  const Index out = spec.layer_sizes[layer + 1];
  const Index in = spec.layer_sizes[layer];
  return {values.data() + off + out * in, out};
}

MatrixXd affine(const MatrixXd& a, const Eigen::Map<const MatrixXd>& w,
                const Eigen::Map<const VectorXd>& b) {
  MatrixXd z = a * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

MatrixXd softmax_rows(const MatrixXd& z) {
  MatrixXd shifted = z.colwise() - z.rowwise().maxCoeff();
  MatrixXd e = shifted.array().exp();
  return e.array().colwise() / e.rowwise().sum().array();
}

void check_input(const NetworkSpec& spec, const ParamVector& params, const MatrixXd& inputs) {
  spec.validate();
  if (params.values.size() != param_count(spec)) throw ShapeError("parameter vector length mismatch");
  if (inputs.cols() != spec.input_dim()) throw ShapeError("input dim mismatch");
}

struct ForwardCache {
  std::vector<MatrixXd> pre;   // z per layer
  std::vector<MatrixXd> post;  // activation per layer; post.back() = probabilities
};

ForwardCache forward_all(const NetworkSpec& spec, const ParamVector& params, const MatrixXd& inputs) {
  ForwardCache cache;
  const int layers = spec.num_layers();
  MatrixXd a = inputs;
  for (int l = 0; l < layers; ++l) {
    MatrixXd z = affine(a, weight_at(spec, params.values, l), bias_at(spec, params.values, l));
    cache.pre.push_back(z);
    a = (l + 1 == layers) ? softmax_rows(z) : z.cwiseMax(0.0);
    cache.post.push_back(a);
  }
  return cache;
}

/// Backprop of (1/2) sum ||post.back() - targets||^2 given an output delta
/// rule; returns the unnormalized gradient (sum over samples).
VectorXd backprop(const NetworkSpec& spec, const ParamVector& params, const MatrixXd& inputs,
                  const ForwardCache& cache, MatrixXd delta) {
  const int layers = spec.num_layers();
  VectorXd g = VectorXd::Zero(param_count(spec));
  for (int l = layers - 1; l >= 0; --l) {
    const MatrixXd& a_prev = l == 0 ? inputs : cache.post[l - 1];
    const Index off = layer_param_offset(spec, l);
    const Index out = spec.layer_sizes[l + 1];
    const Index in = spec.layer_sizes[l];
    Eigen::Map<MatrixXd>(g.data() + off, out, in) = delta.transpose() * a_prev;
    Eigen::Map<VectorXd>(g.data() + off + out * in, out) = delta.colwise().sum();
    if (l > 0) {
      delta = (delta * weight_at(spec, params.values, l)).cwiseProduct(
          (cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

/// Output-layer delta for squared error through row-wise softmax:
/// dz_j = p_j * (g_j - sum_k p_k g_k) with g = p - y.
MatrixXd softmax_mse_delta(const MatrixXd& probs, const MatrixXd& targets) {
  MatrixXd g = probs - targets;
  VectorXd dot = (probs.array() * g.array()).rowwise().sum();
  MatrixXd centered = g.colwise() - dot;
  return probs.cwiseProduct(centered);
}

}  // namespace

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) throw ShapeError("need at least one layer");
  for (int s : layer_sizes)
    if (s <= 0) throw ShapeError("layer sizes must be positive");
  if (head_start_layer < 1 || head_start_layer > num_layers())
    throw ShapeError("head_start_layer out of range");
}

Eigen::Index layer_param_offset(const NetworkSpec& spec, int layer) {
  Index off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<Index>(spec.layer_sizes[l + 1]) * spec.layer_sizes[l] + spec.layer_sizes[l + 1];
  return off;
}

Eigen::Index param_count(const NetworkSpec& spec) {
  return layer_param_offset(spec, spec.num_layers());
}

Eigen::Index head_offset(const NetworkSpec& spec) {
  return layer_param_offset(spec, spec.head_start_layer);
}

Eigen::Index head_param_count(const NetworkSpec& spec) {
  return param_count(spec) - head_offset(spec);
}

ParamVector init_params(const NetworkSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParamVector p;
  p.values = VectorXd::Zero(param_count(spec));
  for (int l = 0; l < spec.num_layers(); ++l) {
    const Index off = layer_param_offset(spec, l);
    const Index out = spec.layer_sizes[l + 1];
    const Index in = spec.layer_sizes[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index i = 0; i < out * in; ++i) p.values[off + i] = dist(rng);
    // biases stay zero
  }
  return p;
}

Eigen::MatrixXd forward(const NetworkSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs) {
  check_input(spec, params, inputs);
  return forward_all(spec, params, inputs).post.back();
}

Eigen::MatrixXd forward_base(const NetworkSpec& spec, const ParamVector& params,
                             const Eigen::MatrixXd& inputs) {
  check_input(spec, params, inputs);
  MatrixXd a = inputs;
  for (int l = 0; l < spec.head_start_layer; ++l)
    a = affine(a, weight_at(spec, params.values, l), bias_at(spec, params.values, l)).cwiseMax(0.0);
  return a;
}

double loss_mse(const NetworkSpec& spec, const ParamVector& params, const Batch& batch) {
  if (batch.inputs.rows() == 0) throw EmptyBatch{};
  if (batch.inputs.rows() != batch.targets.rows()) throw ShapeError("batch row mismatch");
  MatrixXd probs = forward(spec, params, batch.inputs);
  if (probs.cols() != batch.targets.cols()) throw ShapeError("target dim mismatch");
  const double m = static_cast<double>(batch.inputs.rows());
  return (probs - batch.targets).squaredNorm() / (2.0 * m);
}

ParamVector grad(const NetworkSpec& spec, const ParamVector& params, const Batch& batch,
                 GradNorm norm) {
  if (batch.inputs.rows() == 0) throw EmptyBatch{};
  if (batch.inputs.rows() != batch.targets.rows()) throw ShapeError("batch row mismatch");
  check_input(spec, params, batch.inputs);
  ForwardCache cache = forward_all(spec, params, batch.inputs);
  if (cache.post.back().cols() != batch.targets.cols()) throw ShapeError("target dim mismatch");
  MatrixXd delta = softmax_mse_delta(cache.post.back(), batch.targets);
  ParamVector g;
  g.values = backprop(spec, params, batch.inputs, cache, std::move(delta));
  if (norm == GradNorm::Mean) g.values /= static_cast<double>(batch.inputs.rows());
  return g;
}

ParamVector grad_head(const NetworkSpec& spec, const ParamVector& params, const Batch& batch,
                      GradNorm norm) {
  ParamVector g = grad(spec, params, batch, norm);
  g.values.head(head_offset(spec)).setZero();
  return g;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& gradient, double alpha) {
  if (params.values.size() != gradient.values.size()) throw ShapeError("sgd shape mismatch");
  ParamVector out;
  out.values = params.values - alpha * gradient.values;
  return out;
}

ParamVector adam_step(AdamState& state, const ParamVector& params, const ParamVector& gradient,
                      double alpha, double beta1, double beta2, double eps) {
  const Index n = params.values.size();
  if (gradient.values.size() != n) throw ShapeError("adam shape mismatch");
  if (state.t == 0) {
    state.m = VectorXd::Zero(n);
    state.v = VectorXd::Zero(n);
  }
  if (state.m.size() != n) throw ShapeError("adam state mismatch");
  state.t += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * gradient.values;
  state.v = beta2 * state.v + (1.0 - beta2) * gradient.values.cwiseProduct(gradient.values);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  VectorXd mhat = state.m / bc1;
  VectorXd vhat = state.v / bc2;
  ParamVector out;
  out.values = params.values - alpha * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
  return out;
}

DistillResult distill_base(const NetworkSpec& teacher_spec, const ParamVector& teacher_params,
                           const std::vector<int>& student_base_sizes,
                           const Eigen::MatrixXd& transfer_inputs, int epochs, double alpha,
                           std::mt19937_64& rng, const ParamVector* student_init) {
  MatrixXd targets = forward_base(teacher_spec, teacher_params, transfer_inputs);
  if (student_base_sizes.size() < 2) throw ShapeError("student base needs at least one layer");
  if (student_base_sizes.back() != targets.cols())
    throw ShapeError("student base output dim must match teacher base");
  if (student_base_sizes.front() != transfer_inputs.cols())
    throw ShapeError("student base input dim mismatch");

  // All-ReLU student; head_start_layer past the end marks the whole
  // network as base so forward_base covers every layer.
  NetworkSpec student;
  student.layer_sizes = student_base_sizes;
  student.head_start_layer = student.num_layers();

  ParamVector params = student_init ? *student_init : init_params(student, rng);
  const double m = static_cast<double>(transfer_inputs.rows());

  DistillResult result;
  AdamState adam;
  for (int e = 0; e < epochs; ++e) {
    ForwardCache cache;
    MatrixXd a = transfer_inputs;
    for (int l = 0; l < student.num_layers(); ++l) {
      MatrixXd z = affine(a, weight_at(student, params.values, l), bias_at(student, params.values, l));
      cache.pre.push_back(z);
      a = z.cwiseMax(0.0);
      cache.post.push_back(a);
    }
    result.epoch_losses.push_back((a - targets).squaredNorm() / (2.0 * m));
    // ReLU output delta for feature-matching squared error.
    MatrixXd delta = ((a - targets).array() *
                      (cache.pre.back().array() > 0.0).cast<double>())
                         .matrix() / m;
    ParamVector g;
    g.values = backprop(student, params, transfer_inputs, cache, std::move(delta));
    params = adam_step(adam, params, g, alpha);
  }
  result.student_base = std::move(params);
  return result;
}

}  // namespace fedmask
