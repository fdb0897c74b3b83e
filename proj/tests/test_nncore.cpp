#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace thermofuse;
using namespace tf_test;

namespace {

DenseLayer layer_from(Tensor2 w, std::vector<double> b, Activation act) { return DenseLayer{std::move(w), std::move(b), act}; }

}  // namespace

TEST(Dense, IdentityLayerPassesInputThrough) {
  const auto l = layer_from(Tensor2::from_rows({{1, 0}, {0, 1}}), {0, 0}, Activation::identity);
  EXPECT_EQ(dense_forward(l, std::vector<double>{1, 2}), (std::vector<double>{1, 2}));
}

TEST(Dense, ReluClampsNegatives) {
  const auto l = layer_from(Tensor2::from_rows({{1, 0}, {0, 1}}), {0, 0}, Activation::relu);
  EXPECT_EQ(dense_forward(l, std::vector<double>{-1, 2}), (std::vector<double>{0, 2}));
}

TEST(Dense, HandMatrixMultiply) {
  const auto l = layer_from(Tensor2::from_rows({{1, 1}, {0, 1}}), {1, 0}, Activation::identity);
  EXPECT_EQ(dense_forward(l, std::vector<double>{1, 1}), (std::vector<double>{3, 1}));
}

TEST(Dense, ShapeMismatchThrows) {
  const auto l = layer_from(Tensor2::from_rows({{1, 1}}), {0}, Activation::identity);
  try {
    dense_forward(l, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
}

TEST(Dense, ReluOutputNonNegative) {
  Rng rng(3);
  const auto l = DenseLayer::xavier(10, 12, Activation::relu, rng);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(10);
    for (auto& v : x) v = rng.normal() * 3;
    for (double y : dense_forward(l, x)) EXPECT_GE(y, 0.0);
  }
}

TEST(Backward, SingleLinearNeuronAnalyticDerivative) {
  // y = w x, loss (wx - t)^2, dL/dw = 2 x (wx - t)
  const double w = 1.7, x = -0.6, t = 0.4;
  const auto l = layer_from(Tensor2::from_rows({{w}}), {0.0}, Activation::identity);
  auto g = l.zeros_like();
  const std::vector<double> in{x};
  const auto y = dense_forward(l, in);
  dense_backward(l, in, y, std::vector<double>{2.0 * (y[0] - t)}, g);
  EXPECT_NEAR(g.weights(0, 0), 2.0 * x * (w * x - t), 1e-15);
}

TEST(Backward, UnusedParameterHasZeroGradient) {
  // Zero input column: weight on it cannot influence the loss.
  Rng rng(1);
  const auto l = DenseLayer::xavier(3, 2, Activation::identity, rng);
  auto g = l.zeros_like();
  const std::vector<double> in{0.5, 0.0, -1.0};
  const auto y = dense_forward(l, in);
  dense_backward(l, in, y, std::vector<double>{0.3, -0.2}, g);
  EXPECT_EQ(g.weights(0, 1), 0.0);
  EXPECT_EQ(g.weights(1, 1), 0.0);
}

TEST(Backward, DenseFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    for (auto act : {Activation::identity, Activation::relu}) {
      auto l = DenseLayer::xavier(5, 4, act, rng);
      std::vector<double> x(5), dy(4);
      for (auto& v : x) v = rng.normal();
      for (auto& v : dy) v = rng.normal();
      auto loss = [&](const DenseLayer& layer, const std::vector<double>& in) {
        const auto y = dense_forward(layer, in);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += dy[i] * y[i];
        return s;
      };
      auto g = l.zeros_like();
      const auto y = dense_forward(l, x);
      const auto dx = dense_backward(l, x, y, dy, g);
      const double h = 1e-4;
      for (std::size_t i = 0; i < l.weights.data.size(); ++i) {
        const double keep = l.weights.data[i];
        l.weights.data[i] = keep + h;
        const double lp = loss(l, x);
        l.weights.data[i] = keep - h;
        const double lm = loss(l, x);
        l.weights.data[i] = keep;
        EXPECT_LT(rel_error(g.weights.data[i], (lp - lm) / (2 * h)), 1e-4);
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        EXPECT_LT(rel_error(dx[i], (loss(l, xp) - loss(l, xm)) / (2 * h)), 1e-4);
      }
    }
  }
}

TEST(LightAttention, SinglePositionRepeatsValues) {
  Rng rng(5);
  const auto la = LightAttention::create(3, 4, rng);
  Tensor2 E = Tensor2::from_rows({{0.3}, {-1.2}, {2.0}});
  const auto out = light_attention_forward(la, E);
  const auto v = dense_forward(la.value_map, std::vector<double>{0.3, -1.2, 2.0});
  ASSERT_EQ(out.size(), 8u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(out[c], v[c], 1e-15);
    EXPECT_EQ(out[4 + c], v[c]);
  }
}

TEST(LightAttention, IdenticalColumnsGiveValueMap) {
  Rng rng(6);
  const auto la = LightAttention::create(3, 5, rng);
  Tensor2 E(3, 6);
  const std::vector<double> c{0.7, -0.1, 1.4};
  for (std::size_t l = 0; l < 6; ++l)
    for (std::size_t r = 0; r < 3; ++r) E(r, l) = c[r];
  const auto out = light_attention_forward(la, E);
  const auto v = dense_forward(la.value_map, c);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(out[k], v[k], 1e-12);
}

TEST(LightAttention, RandomInputMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto la = LightAttention::create(3, 2, rng);
    Tensor2 E(3, 4);
    for (auto& v : E.data) v = rng.normal();
    std::vector<std::vector<double>> cols(4, std::vector<double>(3));
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t r = 0; r < 3; ++r) cols[l][r] = E(r, l);
    const auto got = light_attention_forward(la, E);
    const auto want = o_light_attention(la, cols);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(LightAttention, SoftmaxWeightsSumToOne) {
  Rng rng(8);
  const auto la = LightAttention::create(4, 6, rng);
  Tensor2 E(4, 9);
  for (auto& v : E.data) v = 5 * rng.normal();
  const auto cache = light_attention_forward_cached(la, E);
  for (std::size_t c = 0; c < 6; ++c) {
    double s = 0;
    for (std::size_t l = 0; l < 9; ++l) s += cache.weights(c, l);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(LightAttention, ZeroPositionsRejected) {
  Rng rng(8);
  const auto la = LightAttention::create(4, 6, rng);
  try {
    light_attention_forward(la, Tensor2(4, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_window);
  }
}

TEST(LightAttention, FiniteDifferences) {
  std::size_t skipped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    auto la = LightAttention::create(3, 4, rng);
    Tensor2 E(3, 5);
    for (auto& v : E.data) v = rng.normal();
    std::vector<double> dout(8);
    for (auto& v : dout) v = rng.normal();
    auto loss = [&](const LightAttention& m, const Tensor2& in, std::vector<std::size_t>* argmax) {
      const auto c = light_attention_forward_cached(m, in);
      if (argmax) *argmax = c.argmax;
      double s = 0;
      for (std::size_t i = 0; i < 8; ++i) s += dout[i] * c.output[i];
      return s;
    };
    auto grad = la.zeros_like();
    const auto cache = light_attention_forward_cached(la, E);
    const auto dE = light_attention_backward(la, cache, dout, grad);
    const double h = 1e-4;
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      std::vector<std::size_t> ap, am;
      slot = keep + h;
      const double lp = loss(la, E, &ap);
      slot = keep - h;
      const double lm = loss(la, E, &am);
      slot = keep;
      if (ap != cache.argmax || am != cache.argmax) {
        ++skipped;
        return;
      }
      EXPECT_LT(rel_error(analytic, (lp - lm) / (2 * h)), 1e-4);
    };
    for (std::size_t i = 0; i < la.value_map.weights.data.size(); ++i)
      probe(la.value_map.weights.data[i], grad.value_map.weights.data[i]);
    for (std::size_t i = 0; i < la.attn_map.weights.data.size(); ++i)
      probe(la.attn_map.weights.data[i], grad.attn_map.weights.data[i]);
    for (std::size_t i = 0; i < la.attn_map.bias.size(); ++i) probe(la.attn_map.bias[i], grad.attn_map.bias[i]);
    for (std::size_t i = 0; i < la.value_map.bias.size(); ++i) probe(la.value_map.bias[i], grad.value_map.bias[i]);
    for (std::size_t i = 0; i < E.data.size(); ++i) probe(E.data[i], dE.data[i]);
  }
  RecordProperty("skipped", static_cast<int>(skipped));
}

TEST(Mlp, SingleIdentityLayer) {
  const Mlp m{layer_from(Tensor2::from_rows({{2}}), {0}, Activation::identity)};
  EXPECT_EQ(mlp_forward(m, std::vector<double>{3}), 6.0);
}

TEST(Mlp, ZeroWeightsGiveFinalBias) {
  Mlp m{DenseLayer::zeros(4, 3, Activation::relu), DenseLayer::zeros(3, 1, Activation::identity)};
  m[0].bias = {1, 2, 3};
  m[1].bias = {0.25};
  EXPECT_EQ(mlp_forward(m, std::vector<double>{1, 2, 3, 4}), 0.25);
}

TEST(Mlp, TwoLayerHandTrace) {
  // h = relu([[1,-1],[2,0.5]] x + [0,-1]); y = [3,-2] h + 0.5 with x = [1, 2]
  // h = relu([-1, 2]) = [0, 2]; y = -4 + 0.5 = -3.5
  Mlp m{layer_from(Tensor2::from_rows({{1, -1}, {2, 0.5}}), {0, -1}, Activation::relu),
        layer_from(Tensor2::from_rows({{3, -2}}), {0.5}, Activation::identity)};
  EXPECT_EQ(mlp_forward(m, std::vector<double>{1, 2}), -3.5);
}

TEST(Mlp, BrokenChainRejected) {
  Mlp m{DenseLayer::zeros(4, 3, Activation::relu), DenseLayer::zeros(2, 1, Activation::identity)};
  EXPECT_THROW(mlp_forward(m, std::vector<double>{1, 2, 3, 4}), Error);
}

TEST(Mse, Examples) {
  EXPECT_EQ(mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_EQ(mse_loss(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(mse_loss(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}), 2.0 / 3.0);
}

TEST(Mse, EmptyAndMismatchRejected) {
  EXPECT_THROW(mse_loss(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  std::vector<double> p{0.5, -1.5, 3.0};
  const auto before = p;
  std::vector<double> g(3, 0.0);
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamState adam(AdamConfig{}, ps);
  for (int i = 0; i < 5; ++i) adam.step(ps, gs);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  std::vector<double> p{1.0, 1.0, 1.0};
  std::vector<double> g{0.3, -20.0, 1e-3};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamState adam(AdamConfig{0.01}, ps);
  adam.step(ps, gs);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], 1.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 1.0 - 0.01, 1e-6);
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p = 2.0;
  std::vector<double> pv{p};
  std::vector<std::span<double>> ps{pv};
  AdamState adam(AdamConfig{lr, b1, b2, eps, 0.0}, ps);
  double m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0 * p;  // gradient of p^2
    std::vector<double> gv{2.0 * pv[0]};
    std::vector<std::span<const double>> gs{gv};
    adam.step(ps, gs);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(pv[0], p, 1e-14);
  }
}

TEST(Adam, MismatchedShapesRejected) {
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{1.0};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamState adam(AdamConfig{}, ps);
  EXPECT_THROW(adam.step(ps, gs), Error);
}

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  const std::vector<double> x{1, -2, 3, 4};
  EXPECT_EQ(dropout(x, 0.0, std::uint64_t{1}, true), x);
  EXPECT_EQ(dropout(x, 0.9, std::uint64_t{1}, false), x);
}

TEST(Dropout, HalfRatePreservesMean) {
  const std::vector<double> ones(100000, 1.0);
  const auto y = dropout(ones, 0.5, std::uint64_t{42}, true);
  EXPECT_NEAR(o_mean(y), 1.0, 0.02);
}

TEST(Dropout, RateOneRejected) {
  const std::vector<double> x{1.0};
  EXPECT_THROW(dropout(x, 1.0, std::uint64_t{1}, true), Error);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(c.below(7), 7u);
  }
}
