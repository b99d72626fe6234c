#pragma once

#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace fedmask {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyBatch : std::runtime_error {
  EmptyBatch() : std::runtime_error("empty batch") {}
};

/// Dense ReLU network with a softmax output layer and an explicit
/// base/head split: layers [0, head_start_layer) form the frozen base,
/// the rest the trainable head.
struct NetworkSpec {
  std::vector<int> layer_sizes;  // input dim, hidden dims..., output dim
  int head_start_layer = 1;      // index of first head layer

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  void validate() const;
};

/// Flat parameter vector; per-layer layout is [W (col-major), b].
struct ParamVector {
  Eigen::VectorXd values;
};

struct Batch {
  Eigen::MatrixXd inputs;   // samples x input dim
  Eigen::MatrixXd targets;  // samples x classes, one-hot
};

Eigen::Index layer_param_offset(const NetworkSpec& spec, int layer);
Eigen::Index param_count(const NetworkSpec& spec);
Eigen::Index head_offset(const NetworkSpec& spec);
Eigen::Index head_param_count(const NetworkSpec& spec);

/// Glorot-uniform initialization, deterministic under the given rng.
ParamVector init_params(const NetworkSpec& spec, std::mt19937_64& rng);

/// Softmax class probabilities, one row per sample.
Eigen::MatrixXd forward(const NetworkSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs);

/// Activations after the last base layer (ReLU path only).
Eigen::MatrixXd forward_base(const NetworkSpec& spec, const ParamVector& params,
                             const Eigen::MatrixXd& inputs);

/// (1 / 2m) sum of squared differences between probabilities and targets.
double loss_mse(const NetworkSpec& spec, const ParamVector& params, const Batch& batch);

/// Sum: unnormalized per-sample gradient sum (aggregation divides by the
/// global sample count later). Mean: gradient of loss_mse directly.
enum class GradNorm { Sum, Mean };

ParamVector grad(const NetworkSpec& spec, const ParamVector& params, const Batch& batch,
                 GradNorm norm = GradNorm::Sum);

/// Full-length gradient with the base slice zeroed; optimizer steps with
/// it leave base parameters bit-identical.
ParamVector grad_head(const NetworkSpec& spec, const ParamVector& params, const Batch& batch,
                      GradNorm norm = GradNorm::Sum);

ParamVector sgd_step(const ParamVector& params, const ParamVector& gradient, double alpha);

struct AdamState {
  long t = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

ParamVector adam_step(AdamState& state, const ParamVector& params, const ParamVector& gradient,
                      double alpha, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Feature-matching distillation: trains a student base (all-ReLU dense
/// stack whose output dim equals the teacher base's) to reproduce the
/// teacher's base activations on the transfer set.
struct DistillResult {
  ParamVector student_base;
  std::vector<double> epoch_losses;
};

DistillResult distill_base(const NetworkSpec& teacher_spec, const ParamVector& teacher_params,
                           const std::vector<int>& student_base_sizes,
                           const Eigen::MatrixXd& transfer_inputs, int epochs, double alpha,
                           std::mt19937_64& rng,
                           const ParamVector* student_init = nullptr);

}  // namespace fedmask
