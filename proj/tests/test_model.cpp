#include <doctest.h>

#include <cmath>
#include <random>

#include "fedmask/data.hpp"
#include "fedmask/model.hpp"

using namespace fedmask;

namespace {

Batch random_batch(int m, int dim, int classes, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Batch b;
  b.inputs.resize(m, dim);
  b.targets = Eigen::MatrixXd::Zero(m, classes);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < dim; ++j) b.inputs(i, j) = gauss(rng);
    b.targets(i, static_cast<Eigen::Index>(rng() % classes)) = 1.0;
  }
  return b;
}

/// Central finite differences of loss_mse; the oracle for grad / grad_head.
Eigen::VectorXd fd_gradient(const NetworkSpec& spec, const ParamVector& params, const Batch& batch,
                            double h = 1e-5) {
  Eigen::VectorXd g(params.values.size());
  ParamVector p = params;
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    const double orig = p.values[i];
    p.values[i] = orig + h;
    const double up = loss_mse(spec, p, batch);
    p.values[i] = orig - h;
    const double down = loss_mse(spec, p, batch);
    p.values[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = std::max(1e-12, std::max(a.norm(), b.norm()));
  return (a - b).norm() / denom;
}

}  // namespace

TEST_CASE("forward produces probability rows") {
  NetworkSpec spec{{4, 3, 2}, 1};
  std::mt19937_64 rng(1);
  ParamVector params = init_params(spec, rng);
  Batch b = random_batch(3, 4, 2, rng);
  Eigen::MatrixXd out = forward(spec, params, b.inputs);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.row(i).minCoeff() >= 0.0);
    CHECK(std::abs(out.row(i).sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("zero parameters give uniform class probabilities") {
  NetworkSpec spec{{4, 2}, 1};
  ParamVector params;
  params.values = Eigen::VectorXd::Zero(param_count(spec));
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(5, 4);
  Eigen::MatrixXd out = forward(spec, params, inputs);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) CHECK(out(i, j) == doctest::Approx(0.5));
}

TEST_CASE("single-layer softmax matches the hand computation") {
  // One sample, identity-ish 2x2 weights on input (1, 0): logits = W col 0.
  NetworkSpec spec{{2, 2}, 1};
  ParamVector params;
  params.values = Eigen::VectorXd::Zero(param_count(spec));
  params.values[0] = 2.0;  // W(0,0), col-major
  params.values[1] = 0.0;  // W(1,0) -> logit of class 1... layout: W is out x in
  Eigen::MatrixXd inputs(1, 2);
  inputs << 1.0, 0.0;
  Eigen::MatrixXd out = forward(spec, params, inputs);
  const double e = std::exp(2.0);
  CHECK(out(0, 0) == doctest::Approx(e / (e + 1.0)));
  CHECK(out(0, 1) == doctest::Approx(1.0 / (e + 1.0)));
}

TEST_CASE("loss anchors") {
  NetworkSpec spec{{2, 2}, 1};
  ParamVector params;
  params.values = Eigen::VectorXd::Zero(param_count(spec));
  Batch b;
  b.inputs = Eigen::MatrixXd::Zero(1, 2);
  b.targets.resize(1, 2);
  b.targets << 1.0, 0.0;
  // Prediction is (0.5, 0.5): loss = (1/2)(0.25 + 0.25) = 0.25.
  CHECK(loss_mse(spec, params, b) == doctest::Approx(0.25));

  // Duplicating every sample leaves the mean loss unchanged.
  Batch doubled;
  doubled.inputs.resize(2, 2);
  doubled.inputs << b.inputs, b.inputs;
  doubled.targets.resize(2, 2);
  doubled.targets << b.targets, b.targets;
  CHECK(loss_mse(spec, params, doubled) == doctest::Approx(loss_mse(spec, params, b)));

  Batch empty;
  empty.inputs.resize(0, 2);
  empty.targets.resize(0, 2);
  CHECK_THROWS_AS(loss_mse(spec, params, empty), EmptyBatch);
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(7);
  const std::vector<NetworkSpec> specs = {
      {{5, 2}, 1}, {{5, 4, 2}, 1}, {{6, 5, 3, 2}, 2}};
  for (const auto& spec : specs) {
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (int trial = 0; trial < 5; ++trial) {
      ParamVector params = init_params(spec, rng);
      // Zero-initialized biases can leave a pre-activation exactly at the
      // ReLU kink (e.g. a fully dead sample), where the loss is not
      // differentiable and finite differences disagree with any
      // subgradient choice. Jitter every parameter off the kink.
      for (Eigen::Index i = 0; i < params.values.size(); ++i)
        params.values[i] += jitter(rng);
      Batch b = random_batch(6, spec.input_dim(), spec.output_dim(), rng);
      ParamVector g = grad(spec, params, b, GradNorm::Mean);
      // A perturbation can still cross a kink and ruin one finite
      // difference; a smaller step disambiguates that from a wrong
      // gradient, which fails at every step size.
      const double err = std::min(rel_err(g.values, fd_gradient(spec, params, b)),
                                  rel_err(g.values, fd_gradient(spec, params, b, 1e-7)));
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("sum-form gradient is linear over batch concatenation") {
  NetworkSpec spec{{4, 3, 2}, 1};
  std::mt19937_64 rng(8);
  ParamVector params = init_params(spec, rng);
  Batch a = random_batch(3, 4, 2, rng);
  Batch b = random_batch(2, 4, 2, rng);
  Batch both;
  both.inputs.resize(5, 4);
  both.inputs << a.inputs, b.inputs;
  both.targets.resize(5, 2);
  both.targets << a.targets, b.targets;
  Eigen::VectorXd sum = grad(spec, params, a, GradNorm::Sum).values +
                        grad(spec, params, b, GradNorm::Sum).values;
  CHECK(rel_err(grad(spec, params, both, GradNorm::Sum).values, sum) < 1e-12);
}

TEST_CASE("head gradient equals the head slice of the full gradient") {
  NetworkSpec spec{{6, 5, 3, 2}, 2};
  std::mt19937_64 rng(9);
  ParamVector params = init_params(spec, rng);
  Batch b = random_batch(4, 6, 2, rng);
  ParamVector full = grad(spec, params, b, GradNorm::Mean);
  ParamVector head = grad_head(spec, params, b, GradNorm::Mean);
  const Eigen::Index hoff = head_offset(spec);
  CHECK(head.values.head(hoff).isZero(0.0));
  CHECK((head.values.tail(head.values.size() - hoff) -
         full.values.tail(full.values.size() - hoff))
            .norm() == 0.0);

  // Finite differences restricted to head coordinates agree too.
  Eigen::VectorXd fd = fd_gradient(spec, params, b);
  CHECK(rel_err(head.values.tail(head.values.size() - hoff),
                fd.tail(fd.size() - hoff)) < 1e-4);
}

TEST_CASE("sgd step arithmetic") {
  NetworkSpec spec{{3, 2}, 1};
  std::mt19937_64 rng(10);
  ParamVector p = init_params(spec, rng);
  ParamVector g = init_params(spec, rng);
  CHECK(sgd_step(p, g, 0.0).values.cwiseEqual(p.values).all());

  ParamVector zero;
  zero.values = Eigen::VectorXd::Zero(p.values.size());
  CHECK(sgd_step(zero, g, 1.0).values.cwiseEqual((-g.values).eval()).all());

  ParamVector half = sgd_step(sgd_step(p, g, 0.05), g, 0.05);
  CHECK((half.values - sgd_step(p, g, 0.1).values).norm() < 1e-15);
}

TEST_CASE("adam step honors bias correction") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamVector p, g, zero;
  p.values = Eigen::VectorXd::Zero(32);
  g.values.resize(32);
  for (int i = 0; i < 32; ++i) {
    g.values[i] = gauss(rng);
    if (std::abs(g.values[i]) < 1e-3) g.values[i] = 0.1;
  }
  zero.values = Eigen::VectorXd::Zero(32);

  AdamState st;
  ParamVector stepped = adam_step(st, p, g, 1e-3);
  for (int i = 0; i < 32; ++i) {
    const double mag = std::abs(stepped.values[i] - p.values[i]);
    CHECK(mag > 0.9e-3);
    CHECK(mag <= 1e-3 + 1e-12);
  }

  AdamState st0;
  ParamVector unchanged = p;
  for (int i = 0; i < 5; ++i) unchanged = adam_step(st0, unchanged, zero, 1e-3);
  CHECK(unchanged.values.cwiseEqual(p.values).all());
}

TEST_CASE("self-distillation is a fixed point") {
  NetworkSpec teacher{{8, 6, 4, 2}, 2};
  std::mt19937_64 rng(12);
  ParamVector tp = init_params(teacher, rng);
  Eigen::MatrixXd transfer = Eigen::MatrixXd::Random(16, 8);

  ParamVector student_init;
  student_init.values = tp.values.head(head_offset(teacher));
  DistillResult r =
      distill_base(teacher, tp, {8, 6, 4}, transfer, 3, 1e-3, rng, &student_init);
  CHECK(r.epoch_losses.front() == doctest::Approx(0.0));
  CHECK((r.student_base.values - student_init.values).norm() == 0.0);
}

TEST_CASE("distillation loss decreases on a smaller student") {
  NetworkSpec teacher{{8, 10, 6, 2}, 2};
  std::mt19937_64 rng(13);
  ParamVector tp = init_params(teacher, rng);
  Eigen::MatrixXd transfer = Eigen::MatrixXd::Random(64, 8);
  DistillResult r = distill_base(teacher, tp, {8, 5, 6}, transfer, 50, 1e-2, rng);
  int monotone = 0;
  for (std::size_t i = 1; i < r.epoch_losses.size(); ++i)
    if (r.epoch_losses[i] <= r.epoch_losses[i - 1]) ++monotone;
  CHECK(monotone >= 45);  // >= 90% of transitions
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("parameter accounting matches the spec arithmetic") {
  NetworkSpec spec{{32, 16, 8, 2}, 2};
  // 32*16+16 + 16*8+8 + 8*2+2 = 528 + 136 + 18 = 682; head = last layer.
  CHECK(param_count(spec) == 682);
  CHECK(head_offset(spec) == 664);
  CHECK(head_param_count(spec) == 18);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(NetworkSpec({{4}, 1}).validate(), ShapeError);
  CHECK_THROWS_AS(NetworkSpec({{4, 2}, 0}).validate(), ShapeError);
  CHECK_THROWS_AS(NetworkSpec({{4, 2}, 2}).validate(), ShapeError);
}
