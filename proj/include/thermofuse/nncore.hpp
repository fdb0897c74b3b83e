#pragma once

// Small dense neural-network kernel: row-major matrices, dense layers,
// light attention pooling, an MLP head, MSE loss, dropout and Adam.
// Everything is 64-bit and single-threaded so training is bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thermofuse/error.hpp"

namespace thermofuse {

/// Deterministic random source. std distributions are implementation-defined,
/// so the derived draws are computed here from raw mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // uniform integer in [0, n)
  std::size_t below(std::size_t n) {
    if (n == 0) fail(ErrorKind::domain, "Rng::below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % n);
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> values) {
    Tensor2 t;
    t.rows = values.size();
    t.cols = t.rows ? values.begin()->size() : 0;
    for (const auto& row : values) {
      if (row.size() != t.cols) fail(ErrorKind::shape, "ragged rows in Tensor2::from_rows");
      t.data.insert(t.data.end(), row.begin(), row.end());
    }
    return t;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor2&) const = default;
};

enum class Activation { identity, relu };

struct DenseLayer {
  Tensor2 weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }

  /// Glorot-uniform weights, zero bias.
  static DenseLayer xavier(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer layer{Tensor2(out, in), std::vector<double>(out, 0.0), act};
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : layer.weights.data) w = rng.uniform(-a, a);
    return layer;
  }

  static DenseLayer zeros(std::size_t in, std::size_t out, Activation act) {
    return DenseLayer{Tensor2(out, in), std::vector<double>(out, 0.0), act};
  }

  DenseLayer zeros_like() const { return zeros(in_dim(), out_dim(), activation); }

  std::size_t parameter_count() const { return weights.data.size() + bias.size(); }

  bool operator==(const DenseLayer&) const = default;
};

inline std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in_dim()) {
    fail(ErrorKind::shape, "dense layer expects input of length " + std::to_string(layer.in_dim()) +
                               ", got " + std::to_string(x.size()));
  }
  if (layer.bias.size() != layer.out_dim()) fail(ErrorKind::shape, "dense bias length != rows");
  std::vector<double> y(layer.out_dim());
  for (std::size_t o = 0; o < y.size(); ++o) {
    const auto w = layer.weights.row(o);
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
    y[o] = (layer.activation == Activation::relu && acc < 0.0) ? 0.0 : acc;
  }
  return y;
}

/// Accumulates dL/dW and dL/db into `grad` and returns dL/dx. `y` is the
/// post-activation output from the matching forward call.
inline std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                          std::span<const double> y, std::span<const double> dy,
                                          DenseLayer& grad) {
  if (dy.size() != layer.out_dim() || y.size() != layer.out_dim() || x.size() != layer.in_dim()) {
    fail(ErrorKind::shape, "dense_backward dimension mismatch");
  }
  std::vector<double> dx(layer.in_dim(), 0.0);
  for (std::size_t o = 0; o < layer.out_dim(); ++o) {
    double g = dy[o];
    if (layer.activation == Activation::relu && y[o] <= 0.0) g = 0.0;
    if (g == 0.0) continue;
    grad.bias[o] += g;
    auto gw = grad.weights.row(o);
    const auto w = layer.weights.row(o);
    for (std::size_t i = 0; i < x.size(); ++i) {
      gw[i] += g * x[i];
      dx[i] += g * w[i];
    }
  }
  return dx;
}

/// Attention pooling over per-residue columns. Values and logits come from
/// two position-wise linear maps; a softmax over positions (independently per
/// channel) weights the values, and a per-channel max over positions is
/// appended, giving an output of length 2 * out_dim().
struct LightAttention {
  DenseLayer value_map;
  DenseLayer attn_map;

  std::size_t in_dim() const { return value_map.in_dim(); }
  std::size_t out_dim() const { return value_map.out_dim(); }

  static LightAttention create(std::size_t d_f, std::size_t d_a, Rng& rng) {
    LightAttention la;
    la.value_map = DenseLayer::xavier(d_f, d_a, Activation::identity, rng);
    la.attn_map = DenseLayer::xavier(d_f, d_a, Activation::identity, rng);
    return la;
  }

  LightAttention zeros_like() const { return {value_map.zeros_like(), attn_map.zeros_like()}; }

  std::size_t parameter_count() const {
    return value_map.parameter_count() + attn_map.parameter_count();
  }

  bool operator==(const LightAttention&) const = default;
};

struct LightAttentionCache {
  Tensor2 input;    // d_f x L
  Tensor2 values;   // d_a x L
  Tensor2 logits;   // d_a x L
  Tensor2 weights;  // d_a x L, softmax over L per channel
  std::vector<std::size_t> argmax;
  std::vector<double> output;
};

inline LightAttentionCache light_attention_forward_cached(const LightAttention& la, const Tensor2& E) {
  if (la.value_map.in_dim() != la.attn_map.in_dim() || la.value_map.out_dim() != la.attn_map.out_dim()) {
    fail(ErrorKind::shape, "light attention maps disagree on dimensions");
  }
  if (E.cols == 0) fail(ErrorKind::empty_window, "light attention over zero positions");
  if (E.rows != la.in_dim()) {
    fail(ErrorKind::shape, "light attention expects " + std::to_string(la.in_dim()) +
                               " feature rows, got " + std::to_string(E.rows));
  }
  const std::size_t L = E.cols;
  const std::size_t d_a = la.out_dim();
  LightAttentionCache cache{E, Tensor2(d_a, L), Tensor2(d_a, L), Tensor2(d_a, L),
                            std::vector<std::size_t>(d_a, 0), {}};
  Tensor2& logits = cache.logits;
  std::vector<double> column(E.rows);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t r = 0; r < E.rows; ++r) column[r] = E(r, l);
    const auto v = dense_forward(la.value_map, column);
    const auto a = dense_forward(la.attn_map, column);
    for (std::size_t c = 0; c < d_a; ++c) {
      cache.values(c, l) = v[c];
      logits(c, l) = a[c];
    }
  }
  cache.output.assign(2 * d_a, 0.0);
  for (std::size_t c = 0; c < d_a; ++c) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) peak = std::max(peak, logits(c, l));
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double e = std::exp(logits(c, l) - peak);
      cache.weights(c, l) = e;
      total += e;
    }
    double pooled = 0.0;
    std::size_t best = 0;
    for (std::size_t l = 0; l < L; ++l) {
      cache.weights(c, l) /= total;
      pooled += cache.weights(c, l) * cache.values(c, l);
      if (cache.values(c, l) > cache.values(c, best)) best = l;
    }
    cache.argmax[c] = best;
    cache.output[c] = pooled;
    cache.output[d_a + c] = cache.values(c, best);
  }
  return cache;
}

inline std::vector<double> light_attention_forward(const LightAttention& la, const Tensor2& E) {
  return light_attention_forward_cached(la, E).output;
}

/// Returns dL/dE (d_f x L) and accumulates parameter gradients into `grad`.
inline Tensor2 light_attention_backward(const LightAttention& la, const LightAttentionCache& cache,
                                        std::span<const double> dout, LightAttention& grad) {
  const std::size_t d_a = la.out_dim();
  const std::size_t L = cache.input.cols;
  if (dout.size() != 2 * d_a) fail(ErrorKind::shape, "light attention gradient length mismatch");
  Tensor2 dvalues(d_a, L);
  Tensor2 dlogits(d_a, L);
  for (std::size_t c = 0; c < d_a; ++c) {
    const double g_sum = dout[c];
    const double g_max = dout[d_a + c];
    double weighted = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      dvalues(c, l) = g_sum * cache.weights(c, l);
      weighted += cache.weights(c, l) * g_sum * cache.values(c, l);
    }
    dvalues(c, cache.argmax[c]) += g_max;
    for (std::size_t l = 0; l < L; ++l) {
      const double dalpha = g_sum * cache.values(c, l);
      dlogits(c, l) = cache.weights(c, l) * (dalpha - weighted);
    }
  }
  Tensor2 dE(cache.input.rows, L);
  std::vector<double> column(cache.input.rows), dv(d_a), da(d_a), v(d_a), a(d_a);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t r = 0; r < column.size(); ++r) column[r] = cache.input(r, l);
    for (std::size_t c = 0; c < d_a; ++c) {
      dv[c] = dvalues(c, l);
      da[c] = dlogits(c, l);
      v[c] = cache.values(c, l);
      a[c] = cache.logits(c, l);
    }
    const auto dx_v = dense_backward(la.value_map, column, v, dv, grad.value_map);
    const auto dx_a = dense_backward(la.attn_map, column, a, da, grad.attn_map);
    for (std::size_t r = 0; r < column.size(); ++r) dE(r, l) = dx_v[r] + dx_a[r];
  }
  return dE;
}

using Mlp = std::vector<DenseLayer>;

/// Hidden layers use relu, the last layer is identity with one output.
inline Mlp make_mlp(std::size_t in, std::span<const std::size_t> hidden, Rng& rng) {
  Mlp layers;
  std::size_t prev = in;
  for (auto width : hidden) {
    layers.push_back(DenseLayer::xavier(prev, width, Activation::relu, rng));
    prev = width;
  }
  layers.push_back(DenseLayer::xavier(prev, 1, Activation::identity, rng));
  return layers;
}

inline void check_mlp_chain(const Mlp& layers) {
  if (layers.empty()) fail(ErrorKind::shape, "empty MLP");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim() != layers[i - 1].out_dim()) {
      fail(ErrorKind::shape, "MLP dimension chain breaks at layer " + std::to_string(i));
    }
  }
  if (layers.back().out_dim() != 1) fail(ErrorKind::shape, "MLP must end in a single output");
}

inline double mlp_forward(const Mlp& layers, std::span<const double> x) {
  check_mlp_chain(layers);
  std::vector<double> h(x.begin(), x.end());
  for (const auto& layer : layers) h = dense_forward(layer, h);
  return h[0];
}

/// Inverted-dropout scale factors: 0 with probability `rate`, else 1/(1-rate).
inline std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::domain, "dropout rate must be in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

inline std::vector<double> dropout(std::span<const double> x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::domain, "dropout rate must be in [0, 1)");
  std::vector<double> out(x.begin(), x.end());
  if (!training || rate == 0.0) return out;
  const auto mask = dropout_mask(x.size(), rate, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

inline std::vector<double> dropout(std::span<const double> x, double rate, std::uint64_t seed, bool training) {
  Rng rng(seed);
  return dropout(x, rate, rng, training);
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) fail(ErrorKind::domain, "mse of empty input");
  if (pred.size() != target.size()) fail(ErrorKind::shape, "mse length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with bias correction and decoupled weight decay. Moments are laid out
/// to mirror the flat parameter views handed to the constructor.
class AdamState {
 public:
  AdamState() = default;

  template <class Views>
  AdamState(AdamConfig config, const Views& params) : config_(config) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  const AdamConfig& config() const { return config_; }
  std::size_t step_count() const { return step_; }

  template <class ParamViews, class GradViews>
  void step(const ParamViews& params, const GradViews& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      fail(ErrorKind::shape, "Adam parameter group count mismatch");
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t g = 0; g < m_.size(); ++g) {
      auto p = params[g];
      const auto& d = grads[g];
      if (p.size() != m_[g].size() || d.size() != m_[g].size()) {
        fail(ErrorKind::shape, "Adam parameter shape mismatch in group " + std::to_string(g));
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[g][i] = config_.beta1 * m_[g][i] + (1.0 - config_.beta1) * d[i];
        v_[g][i] = config_.beta2 * v_[g][i] + (1.0 - config_.beta2) * d[i] * d[i];
        const double m_hat = m_[g][i] / c1;
        const double v_hat = v_[g][i] / c2;
        p[i] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p[i]);
      }
    }
  }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace thermofuse
