#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vpe/gradcheck.hpp"
#include "vpe/nn.hpp"

using namespace vpe;
using vpe::test::dot;
using vpe::test::random_tensor;
using vpe::test::random_tensor_away_from_zero;

namespace {

// J = sum(out .* R) with fixed random R makes a scalar objective whose
// gradient at `out` is exactly R.
struct LayerCheck {
  GradCheckReport report;
};

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

TEST_CASE("conv2d identity-scale case") {
  TensorF input({1, 1, 1, 1}, {3.0f});
  Rng rng(0);
  auto p = make_conv_params<float>("c", 1, 1, 1, rng);
  p.weight[0] = 2.0f;
  p.bias[0] = 0.0f;
  const auto out = conv2d_forward(input, p, 1, 0);
  CHECK(out.numel() == 1);
  CHECK(out[0] == doctest::Approx(6.0f));
}

TEST_CASE("conv2d stride-2 halves 48x48 with padding 1") {
  TensorF input({1, 1, 48, 48});
  Rng rng(0);
  auto p = make_conv_params<float>("c", 4, 1, 3, rng);
  const auto out = conv2d_forward(input, p, 2, 1);
  CHECK(out.extent(2) == 24);
  CHECK(out.extent(3) == 24);
}

TEST_CASE("conv2d halving padding covers the architecture kernels") {
  CHECK(conv_out_extent(48, 7, 2, halving_padding(7)) == 24);
  CHECK(conv_out_extent(24, 4, 2, halving_padding(4)) == 12);
  CHECK(conv_out_extent(16, 3, 2, halving_padding(3)) == 8);
  CHECK(conv_out_extent(64, 7, 2, halving_padding(7)) == 32);
}

TEST_CASE("conv2d rejects channel mismatch with a diagnostic") {
  TensorF input({1, 2, 4, 4});
  Rng rng(0);
  auto p = make_conv_params<float>("conv_bad", 3, 5, 3, rng);
  CHECK_THROWS_WITH_AS(conv2d_forward(input, p, 1, 1),
                       doctest::Contains("conv_bad"), std::invalid_argument);
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  TensorF input({1, 1, 2, 2});
  Rng rng(0);
  auto p = make_conv_params<float>("c", 1, 1, 5, rng);
  CHECK_THROWS_AS(conv2d_forward(input, p, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv2d_forward(input, p, 0, 1), std::invalid_argument);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(123);
  TensorD input = random_tensor<double>({2, 3, 8, 8}, rng);
  auto p = make_conv_params<double>("c", 4, 3, 3, rng);
  const auto out0 = conv2d_forward(input, p, 2, 1);
  const TensorD upstream = random_tensor<double>(out0.shape(), rng);

  TensorD grad_input;
  auto loss = [&] { return dot(conv2d_forward(input, p, 2, 1), upstream); };
  auto grads = [&] {
    p.zero_grads();
    grad_input = conv2d_backward(input, p, 2, 1, upstream);
  };
  grad_input = TensorD(input.shape());
  const auto report = gradient_check(
      loss, grads,
      {{"input", &input, &grad_input}, {"weight", &p.weight, &p.grad_weight},
       {"bias", &p.bias, &p.grad_bias}});
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("conv2d is linear in its input with zero bias") {
  Rng rng(7);
  auto p = make_conv_params<double>("c", 3, 2, 3, rng);
  p.bias.fill(0.0);
  const TensorD x = random_tensor<double>({1, 2, 6, 6}, rng);
  const TensorD y = random_tensor<double>({1, 2, 6, 6}, rng);
  const double a = 1.3, b = -0.7;
  TensorD combo({1, 2, 6, 6});
  for (std::size_t i = 0; i < combo.numel(); ++i) combo[i] = a * x[i] + b * y[i];
  const auto f_combo = conv2d_forward(combo, p, 1, 1);
  const auto fx = conv2d_forward(x, p, 1, 1);
  const auto fy = conv2d_forward(y, p, 1, 1);
  for (std::size_t i = 0; i < f_combo.numel(); ++i) {
    CHECK(f_combo[i] == doctest::Approx(a * fx[i] + b * fy[i]).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// batchnorm

TEST_CASE("batchnorm collapses constant channels to zero") {
  TensorF input({4, 2, 3, 3});
  for (std::size_t i = 0; i < input.numel(); ++i) {
    input[i] = i < input.numel() / 2 ? 2.5f : -1.0f;  // constant per channel slab
  }
  // make it exactly constant per channel
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < 9; ++j) {
        input.at4(n, c, j / 3, j % 3) = c == 0 ? 2.5f : -1.0f;
      }
    }
  }
  auto p = make_batchnorm_params<float>("bn", 2);
  const auto out = batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5f, 0.1f,
                                     static_cast<BatchNormCache<float>*>(nullptr));
  for (std::size_t i = 0; i < out.numel(); ++i) {
    CHECK(std::abs(out[i]) <= std::sqrt(1e-5f));
  }
}

TEST_CASE("batchnorm affine collapse: scale 0 shift 5") {
  Rng rng(3);
  TensorF input = random_tensor<float>({3, 2, 4, 4}, rng);
  auto p = make_batchnorm_params<float>("bn", 2);
  p.weight.fill(0.0f);
  p.bias.fill(5.0f);
  const auto out = batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5f, 0.1f,
                                     static_cast<BatchNormCache<float>*>(nullptr));
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 5.0f);
}

TEST_CASE("batchnorm eval requires running statistics") {
  LayerParams<float> p;
  p.name = "bare_bn";
  p.batch_norm = true;
  p.weight = TensorF::full({2}, 1.0f);
  p.bias = TensorF({2});
  p.grad_weight = TensorF({2});
  p.grad_bias = TensorF({2});
  TensorF input({1, 2, 2, 2});
  CHECK_THROWS_WITH_AS(batchnorm_forward(input, p, BatchNormMode::kEval, 1e-5f, 0.1f,
                                         static_cast<BatchNormCache<float>*>(nullptr)),
                       doctest::Contains("running statistics"), std::invalid_argument);
}

TEST_CASE("batchnorm train mode needs at least 2 values per channel") {
  auto p = make_batchnorm_params<float>("bn", 2);
  TensorF input({1, 2, 1, 1});
  CHECK_THROWS_AS(batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5f, 0.1f,
                                    static_cast<BatchNormCache<float>*>(nullptr)),
                  std::invalid_argument);
}

TEST_CASE("batchnorm updates running statistics and eval uses them") {
  Rng rng(5);
  TensorF input = random_tensor<float>({8, 3, 4, 4}, rng);
  auto p = make_batchnorm_params<float>("bn", 3);
  batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5f, 0.1f,
                    static_cast<BatchNormCache<float>*>(nullptr));
  for (std::size_t c = 0; c < 3; ++c) CHECK(p.running_var[c] > 0.0f);
  const auto eval_out = batchnorm_forward(input, p, BatchNormMode::kEval, 1e-5f, 0.1f,
                                          static_cast<BatchNormCache<float>*>(nullptr));
  CHECK(eval_out.all_finite());
}

TEST_CASE("batchnorm gradients match finite differences") {
  Rng rng(321);
  TensorD input = random_tensor<double>({3, 2, 4, 4}, rng);
  auto p = make_batchnorm_params<double>("bn", 2);
  // non-trivial affine parameters
  for (std::size_t c = 0; c < 2; ++c) {
    p.weight[c] = 0.8 + 0.3 * static_cast<double>(c);
    p.bias[c] = -0.2 + 0.5 * static_cast<double>(c);
  }
  TensorD upstream = random_tensor<double>(input.shape(), rng);

  TensorD grad_input(input.shape());
  BatchNormCache<double> cache;
  auto loss = [&] {
    return dot(batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5, 0.1,
                                 static_cast<BatchNormCache<double>*>(nullptr)),
               upstream);
  };
  auto grads = [&] {
    p.zero_grads();
    batchnorm_forward(input, p, BatchNormMode::kTrain, 1e-5, 0.1, &cache);
    grad_input = batchnorm_backward(cache, p, upstream);
  };
  const auto report = gradient_check(
      loss, grads,
      {{"input", &input, &grad_input}, {"gamma", &p.weight, &p.grad_weight},
       {"beta", &p.bias, &p.grad_bias}});
  CHECK(report.max_rel_error < 1e-5);
}

// ---------------------------------------------------------------------------
// leaky relu

TEST_CASE("leaky relu basic values") {
  TensorF in({3}, {-1.0f, 3.0f, 0.0f});
  const auto out = leaky_relu_forward(in, 0.2f);
  CHECK(out[0] == doctest::Approx(-0.2f));
  CHECK(out[1] == doctest::Approx(3.0f));
  CHECK(out[2] == 0.0f);
  CHECK_THROWS_AS(leaky_relu_forward(in, 1.0f), std::invalid_argument);
  CHECK_THROWS_AS(leaky_relu_forward(in, -0.1f), std::invalid_argument);
}

TEST_CASE("leaky relu gradient matches finite differences") {
  Rng rng(77);
  TensorD input = random_tensor_away_from_zero<double>({2, 3, 5, 5}, rng, 0.05);
  TensorD upstream = random_tensor<double>(input.shape(), rng);
  TensorD grad_input(input.shape());
  auto loss = [&] { return dot(leaky_relu_forward(input, 0.2), upstream); };
  auto grads = [&] { grad_input = leaky_relu_backward(input, 0.2, upstream); };
  const auto report = gradient_check(loss, grads, {{"input", &input, &grad_input}});
  CHECK(report.max_rel_error < 1e-7);
}

// ---------------------------------------------------------------------------
// fully connected

TEST_CASE("fully connected identity weight reproduces input") {
  TensorF in({2, 3}, {1, 2, 3, 4, 5, 6});
  Rng rng(0);
  auto p = make_fc_params<float>("fc", 3, 3, rng);
  p.weight.fill(0.0f);
  for (int i = 0; i < 3; ++i) p.weight.at2(i, i) = 1.0f;
  p.bias.fill(0.0f);
  const auto out = fully_connected_forward(in, p);
  for (std::size_t i = 0; i < in.numel(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("fully connected hand arithmetic") {
  TensorF in({1, 2}, {1.0f, 1.0f});
  Rng rng(0);
  auto p = make_fc_params<float>("fc", 2, 1, rng);
  p.weight.at2(0, 0) = 2.0f;
  p.weight.at2(1, 0) = 3.0f;
  p.bias[0] = 0.5f;
  const auto out = fully_connected_forward(in, p);
  CHECK(out[0] == doctest::Approx(5.5f));
}

TEST_CASE("fully connected rejects dimension mismatch") {
  TensorF in({1, 4});
  Rng rng(0);
  auto p = make_fc_params<float>("fc", 3, 2, rng);
  CHECK_THROWS_AS(fully_connected_forward(in, p), std::invalid_argument);
}

TEST_CASE("fully connected gradients match finite differences") {
  Rng rng(55);
  TensorD input = random_tensor<double>({4, 6}, rng);
  auto p = make_fc_params<double>("fc", 6, 5, rng);
  TensorD upstream = random_tensor<double>({4, 5}, rng);
  TensorD grad_input(input.shape());
  auto loss = [&] { return dot(fully_connected_forward(input, p), upstream); };
  auto grads = [&] {
    p.zero_grads();
    grad_input = fully_connected_backward(input, p, upstream);
  };
  const auto report = gradient_check(
      loss, grads,
      {{"input", &input, &grad_input}, {"weight", &p.weight, &p.grad_weight},
       {"bias", &p.bias, &p.grad_bias}});
  CHECK(report.max_rel_error < 1e-6);
}

// ---------------------------------------------------------------------------
// upsample

TEST_CASE("upsample2x duplicates values in 2x2 blocks") {
  TensorF in({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto out = upsample2x_forward(in);
  CHECK(out.extent(2) == 4);
  CHECK(out.extent(3) == 4);
  const float expected[4][4] = {{1, 1, 2, 2}, {1, 1, 2, 2}, {3, 3, 4, 4}, {3, 3, 4, 4}};
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      CHECK(out.at4(0, 0, y, x) == doctest::Approx(expected[y][x]));
    }
  }
}

TEST_CASE("upsample2x backward sums each 2x2 block") {
  TensorF upstream = TensorF::full({1, 1, 4, 4}, 1.0f);
  const auto grad = upsample2x_backward(upstream);
  for (std::size_t i = 0; i < grad.numel(); ++i) CHECK(grad[i] == doctest::Approx(4.0f));
}

TEST_CASE("upsample2x gradient matches finite differences") {
  Rng rng(17);
  TensorD input = random_tensor<double>({2, 2, 3, 3}, rng);
  TensorD upstream = random_tensor<double>({2, 2, 6, 6}, rng);
  TensorD grad_input(input.shape());
  auto loss = [&] { return dot(upsample2x_forward(input), upstream); };
  auto grads = [&] { grad_input = upsample2x_backward(upstream); };
  const auto report = gradient_check(loss, grads, {{"input", &input, &grad_input}});
  CHECK(report.max_rel_error < 1e-7);
}

// ---------------------------------------------------------------------------
// sigmoid

TEST_CASE("sigmoid midpoint and extreme stability") {
  TensorD in({3}, {0.0, -10000.0, 10000.0});
  const auto out = sigmoid_forward(in);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] > 0.0);
  CHECK(out[1] <= 1e-300);
  CHECK(out[2] < 1.0);
  CHECK(out.all_finite());
}

TEST_CASE("sigmoid gradient matches finite differences") {
  Rng rng(29);
  TensorD input = random_tensor<double>({2, 7}, rng, 2.0);
  TensorD upstream = random_tensor<double>(input.shape(), rng);
  TensorD grad_input(input.shape());
  TensorD out;
  auto loss = [&] { return dot(sigmoid_forward(input), upstream); };
  auto grads = [&] {
    out = sigmoid_forward(input);
    grad_input = sigmoid_backward(out, upstream);
  };
  const auto report = gradient_check(loss, grads, {{"input", &input, &grad_input}});
  CHECK(report.max_rel_error < 1e-7);
}

// ---------------------------------------------------------------------------
// adam

TEST_CASE("adam first step moves by about the learning rate") {
  LayerParams<double> p;
  p.name = "w";
  p.weight = TensorD({1}, {0.3});
  p.bias = TensorD({1}, {0.0});
  p.grad_weight = TensorD({1}, {1.0});
  p.grad_bias = TensorD({1}, {0.0});
  AdamState<double> state;
  const auto refs = param_refs<double>({&p});
  adam_step(refs, state);
  CHECK(state.step_count == 1);
  CHECK(std::abs(p.weight[0] - (0.3 - 1e-4)) < 1e-7);
  CHECK(p.grad_weight[0] == 0.0);  // cleared
}

TEST_CASE("adam with zero gradients is a no-op on parameters") {
  Rng rng(1);
  auto p = make_fc_params<double>("fc", 3, 2, rng);
  const TensorD before = p.weight;
  AdamState<double> state;
  const auto refs = param_refs<double>({&p});
  adam_step(refs, state);
  CHECK(state.step_count == 1);
  CHECK(p.weight == before);
}

TEST_CASE("adam matches a hand-rolled scalar trace") {
  LayerParams<double> p;
  p.name = "w";
  p.weight = TensorD({1}, {1.0});
  p.bias = TensorD({1}, {0.0});
  p.grad_weight = TensorD({1});
  p.grad_bias = TensorD({1});
  AdamState<double> state;
  const auto refs = param_refs<double>({&p});

  // independent scalar reference
  double w = 1.0, m = 0.0, v = 0.0;
  const double lr = 1e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 2; ++t) {
    const double g = 0.7;
    p.grad_weight[0] = g;
    adam_step(refs, state);

    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    w -= lr * m_hat / (std::sqrt(v_hat) + eps);
    CHECK(p.weight[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("adam aborts on non-finite gradients without mutating") {
  LayerParams<double> p;
  p.name = "w";
  p.weight = TensorD({2}, {1.0, 2.0});
  p.bias = TensorD({1}, {0.0});
  p.grad_weight = TensorD({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
  p.grad_bias = TensorD({1});
  AdamState<double> state;
  const auto refs = param_refs<double>({&p});
  CHECK_THROWS_AS(adam_step(refs, state), NumericError);
  CHECK(p.weight[0] == 1.0);
  CHECK(p.weight[1] == 2.0);
  CHECK(state.step_count == 0);
}

// ---------------------------------------------------------------------------
// initialization

TEST_CASE("initialization is deterministic per seed") {
  Rng a = Rng::stream(9, "init");
  Rng b = Rng::stream(9, "init");
  const auto pa = make_conv_params<float>("c", 8, 3, 3, a);
  const auto pb = make_conv_params<float>("c", 8, 3, 3, b);
  CHECK(pa.weight == pb.weight);
  for (std::size_t i = 0; i < pa.bias.numel(); ++i) CHECK(pa.bias[i] == 0.0f);
}

TEST_CASE("initialization stddev tracks sqrt(2/fan_in)") {
  Rng rng(31);
  const auto p = make_fc_params<float>("fc", 100, 100, rng);  // 10k weights
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < p.weight.numel(); ++i) {
    sum += p.weight[i];
    sum_sq += static_cast<double>(p.weight[i]) * p.weight[i];
  }
  const double n = static_cast<double>(p.weight.numel());
  const double std_dev = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  const double expected = std::sqrt(2.0 / 100.0);
  CHECK(std_dev == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("batchnorm init: scale one, shift zero, positive running variance") {
  const auto p = make_batchnorm_params<float>("bn", 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.weight[i] == 1.0f);
    CHECK(p.bias[i] == 0.0f);
    CHECK(p.running_var[i] > 0.0f);
  }
}

// ---------------------------------------------------------------------------
// the checker itself

TEST_CASE("gradient_check flags a sign-flipped backward") {
  Rng rng(41);
  TensorD input = random_tensor<double>({3, 4}, rng);
  auto p = make_fc_params<double>("fc", 4, 3, rng);
  TensorD upstream = random_tensor<double>({3, 3}, rng);
  TensorD grad_input(input.shape());
  auto loss = [&] { return dot(fully_connected_forward(input, p), upstream); };
  auto corrupted = [&] {
    p.zero_grads();
    grad_input = fully_connected_backward(input, p, upstream);
    for (std::size_t i = 0; i < p.grad_weight.numel(); ++i) p.grad_weight[i] = -p.grad_weight[i];
  };
  const auto report =
      gradient_check(loss, corrupted, {{"weight", &p.weight, &p.grad_weight}});
  CHECK(report.max_rel_error > 0.1);
}
