#pragma once

// The four fusion-model variants. All share one parameter container and one
// forward/backward graph; the variant only changes how the attention input
// is built and what is concatenated ahead of the MLP head.
//
//   M1 baseline                 proj_a(struct window) -> attention -> MLP
//   M2 concat-after-attention   [attention(proj_a(struct window)), pooled seq] -> MLP
//   M3 multiply transfusion     proj_a(struct row) * proj_b(seq row) per residue -> attention -> MLP
//   M4 domain concat            [attention(proj_a(struct window)), mutation features] -> MLP
//
// Every variant appends a 20-way mutant one-hot to the head input.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/embeddings.hpp"
#include "thermofuse/features.hpp"
#include "thermofuse/nncore.hpp"

namespace thermofuse {

enum class FusionVariant : int {
  baseline = 1,
  concat_after_attention = 2,
  multiply_transfusion = 3,
  domain_concat = 4,
};

inline std::string_view variant_name(FusionVariant v) {
  switch (v) {
    case FusionVariant::baseline: return "M1_baseline";
    case FusionVariant::concat_after_attention: return "M2_concat_after_attention";
    case FusionVariant::multiply_transfusion: return "M3_multiply_transfusion";
    case FusionVariant::domain_concat: return "M4_domain_concat";
  }
  return "unknown";
}

inline FusionVariant variant_from_number(int n) {
  if (n < 1 || n > 4) fail(ErrorKind::domain, "model number must be 1, 2, 3 or 4");
  return static_cast<FusionVariant>(n);
}

struct FusionConfig {
  FusionVariant variant = FusionVariant::multiply_transfusion;
  std::size_t struct_dim = 32;
  std::size_t seq_dim = 32;
  std::size_t fused_dim = 64;
  std::size_t attn_dim = 32;
  std::size_t window = 7;
  std::vector<std::size_t> hidden{64, 64};
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  /// Length of the M4 feature vector: base features, local window rows with
  /// presence flags, and the pooled row.
  std::size_t feature_dim() const {
    if (variant != FusionVariant::domain_concat) return 0;
    return kBaseFeatureDim + window * (seq_dim + 1) + seq_dim;
  }

  std::size_t head_input_dim() const {
    std::size_t extra = 0;
    if (variant == FusionVariant::concat_after_attention) extra = seq_dim;
    if (variant == FusionVariant::domain_concat) extra = feature_dim();
    return 2 * attn_dim + extra + kNumAminoAcids;
  }

  bool uses_seq_projection() const { return variant == FusionVariant::multiply_transfusion; }
};

/// Closed form:
///   proj_a        d_s*d_f + d_f
///   proj_b (M3)   d_q*d_f + d_f
///   attention     2*(d_f*d_a + d_a)
///   head          sum over consecutive widths (h0, h1, ..., 1) of h_i*h_{i+1} + h_{i+1}
/// with h0 = 2*d_a + extra + 20, extra = d_q (M2), feature_dim (M4), 0 otherwise.
inline std::size_t expected_parameter_count(const FusionConfig& c) {
  std::size_t n = c.struct_dim * c.fused_dim + c.fused_dim;
  if (c.uses_seq_projection()) n += c.seq_dim * c.fused_dim + c.fused_dim;
  n += 2 * (c.fused_dim * c.attn_dim + c.attn_dim);
  std::size_t prev = c.head_input_dim();
  for (auto w : c.hidden) {
    n += prev * w + w;
    prev = w;
  }
  n += prev + 1;
  return n;
}

struct FusionModel {
  FusionConfig config;
  DenseLayer proj_a;
  DenseLayer proj_b;  // 0x0 unless M3
  LightAttention attention;
  Mlp head;

  static FusionModel create(const FusionConfig& config) {
    if (config.window < 1 || config.window % 2 == 0) fail(ErrorKind::domain, "window must be a positive odd count");
    if (config.struct_dim == 0 || config.fused_dim == 0 || config.attn_dim == 0) {
      fail(ErrorKind::domain, "model dimensions must be positive");
    }
    Rng rng(config.seed);
    FusionModel m;
    m.config = config;
    m.proj_a = DenseLayer::xavier(config.struct_dim, config.fused_dim, Activation::identity, rng);
    m.proj_b = config.uses_seq_projection()
                   ? DenseLayer::xavier(config.seq_dim, config.fused_dim, Activation::identity, rng)
                   : DenseLayer::zeros(0, 0, Activation::identity);
    m.attention = LightAttention::create(config.fused_dim, config.attn_dim, rng);
    m.head = make_mlp(config.head_input_dim(), config.hidden, rng);
    return m;
  }

  FusionModel zeros_like() const {
    FusionModel z;
    z.config = config;
    z.proj_a = proj_a.zeros_like();
    z.proj_b = proj_b.zeros_like();
    z.attention = attention.zeros_like();
    for (const auto& l : head) z.head.push_back(l.zeros_like());
    return z;
  }

  /// Visits every parameter tensor in a fixed order as (name, data, rows, cols).
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    auto layer = [&](const std::string& name, auto& l) {
      f(name + ".weight", l.weights.data, l.weights.rows, l.weights.cols);
      f(name + ".bias", l.bias, l.bias.size(), std::size_t{1});
    };
    layer("proj_a", self.proj_a);
    if (self.config.uses_seq_projection()) layer("proj_b", self.proj_b);
    layer("attention.value_map", self.attention.value_map);
    layer("attention.attn_map", self.attention.attn_map);
    for (std::size_t i = 0; i < self.head.size(); ++i) layer("head." + std::to_string(i), self.head[i]);
  }

  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    visit(*this, [&](const std::string&, std::vector<double>& d, std::size_t, std::size_t) { out.emplace_back(d); });
    return out;
  }

  std::vector<std::span<const double>> parameters() const {
    std::vector<std::span<const double>> out;
    visit(*this, [&](const std::string&, const std::vector<double>& d, std::size_t, std::size_t) {
      out.emplace_back(d);
    });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto p : parameters()) n += p.size();
    return n;
  }

  bool all_finite() const {
    for (auto p : parameters())
      for (double v : p)
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_parameters(const FusionModel& other) const {
    const auto a = parameters();
    const auto b = other.parameters();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != b[i].size()) return false;
      if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)) != 0) return false;
    }
    return true;
  }
};

/// Everything one prediction needs, already cut out of the embedding sets.
struct ModelInput {
  Tensor2 struct_window;  // Lw x d_struct
  Tensor2 seq_window;     // Lw x d_seq, M3 only
  std::vector<double> seq_pooled;  // M2 only
  std::vector<double> features;    // M4 only
  std::size_t mutant = 0;
};

inline ModelInput make_input(const FusionConfig& config, const EmbeddingSet& struct_emb, const EmbeddingSet& seq_emb,
                             const MutationFeatures& feats, std::size_t pos) {
  const std::size_t L = struct_emb.length();
  if (pos < 1 || pos > L) fail(ErrorKind::bounds, "position " + std::to_string(pos) + " outside 1.." + std::to_string(L));
  if (struct_emb.dim() != config.struct_dim) {
    fail(ErrorKind::shape, "structural embedding dim " + std::to_string(struct_emb.dim()) + " but model expects " +
                               std::to_string(config.struct_dim));
  }
  const bool needs_seq = config.variant != FusionVariant::baseline;
  if (needs_seq) {
    if (seq_emb.dim() != config.seq_dim) {
      fail(ErrorKind::shape, "sequence embedding dim " + std::to_string(seq_emb.dim()) + " but model expects " +
                                 std::to_string(config.seq_dim));
    }
    if (seq_emb.length() != L) fail(ErrorKind::linkage, "structural and sequence embeddings differ in length");
  }
  ModelInput in;
  in.mutant = require_aa_index(feats.mut);
  const std::size_t half = config.window / 2;
  const std::size_t lo = pos > half ? pos - half : 1;
  const std::size_t hi = std::min(L, pos + half);
  const std::size_t Lw = hi - lo + 1;
  in.struct_window = Tensor2(Lw, config.struct_dim);
  for (std::size_t i = 0; i < Lw; ++i) {
    const auto r = struct_emb.row(lo - 1 + i);
    std::copy(r.begin(), r.end(), in.struct_window.row(i).begin());
  }
  switch (config.variant) {
    case FusionVariant::baseline:
      break;
    case FusionVariant::multiply_transfusion:
      in.seq_window = Tensor2(Lw, config.seq_dim);
      for (std::size_t i = 0; i < Lw; ++i) {
        const auto r = seq_emb.row(lo - 1 + i);
        std::copy(r.begin(), r.end(), in.seq_window.row(i).begin());
      }
      break;
    case FusionVariant::concat_after_attention:
      in.seq_pooled = pool_embeddings(seq_emb, pos, 1).pooled;
      break;
    case FusionVariant::domain_concat: {
      bool has_context = false;
      for (const auto& s : feats.layout) has_context |= (s.name == "local_embedding");
      if (has_context) {
        in.features = feats.vector;
      } else {
        MutationFeatures full = feats;
        append_embedding_context(full, seq_emb, pos, config.window);
        in.features = std::move(full.vector);
      }
      if (in.features.size() != config.feature_dim()) {
        fail(ErrorKind::shape, "feature vector length " + std::to_string(in.features.size()) + " but model expects " +
                                   std::to_string(config.feature_dim()));
      }
      break;
    }
  }
  return in;
}

/// One forward pass with everything backward() needs. A graph refers to its
/// model, which must outlive it; the input is copied.
class FusionGraph {
 public:
  explicit FusionGraph(const FusionModel& model) : model_(&model) {}

  /// Training mode when `dropout_rng` is given and the model has a dropout rate.
  double forward(const ModelInput& in, Rng* dropout_rng = nullptr) {
    const FusionModel& m = *model_;
    const auto& cfg = m.config;
    const std::size_t Lw = in.struct_window.rows;
    if (Lw == 0) fail(ErrorKind::empty_window, "empty residue window");
    if (in.struct_window.cols != m.proj_a.in_dim()) fail(ErrorKind::shape, "structural window width mismatch");
    if (in.mutant >= kNumAminoAcids) fail(ErrorKind::domain, "mutant index out of range");
    input_ = in;
    proj_a_out_ = Tensor2(Lw, cfg.fused_dim);
    proj_b_out_ = Tensor2();
    Tensor2 E(cfg.fused_dim, Lw);
    for (std::size_t l = 0; l < Lw; ++l) {
      const auto a = dense_forward(m.proj_a, in.struct_window.row(l));
      std::copy(a.begin(), a.end(), proj_a_out_.row(l).begin());
      for (std::size_t r = 0; r < cfg.fused_dim; ++r) E(r, l) = a[r];
    }
    if (cfg.variant == FusionVariant::multiply_transfusion) {
      if (in.seq_window.rows != Lw || in.seq_window.cols != m.proj_b.in_dim()) {
        fail(ErrorKind::shape, "sequence window does not match the structural window");
      }
      proj_b_out_ = Tensor2(Lw, cfg.fused_dim);
      for (std::size_t l = 0; l < Lw; ++l) {
        const auto b = dense_forward(m.proj_b, in.seq_window.row(l));
        std::copy(b.begin(), b.end(), proj_b_out_.row(l).begin());
        for (std::size_t r = 0; r < cfg.fused_dim; ++r) E(r, l) *= b[r];
      }
    }
    attention_ = light_attention_forward_cached(m.attention, E);

    std::vector<double> h0 = attention_.output;
    if (cfg.variant == FusionVariant::concat_after_attention) {
      if (in.seq_pooled.size() != cfg.seq_dim) fail(ErrorKind::shape, "pooled sequence embedding width mismatch");
      h0.insert(h0.end(), in.seq_pooled.begin(), in.seq_pooled.end());
    } else if (cfg.variant == FusionVariant::domain_concat) {
      if (in.features.size() != cfg.feature_dim()) fail(ErrorKind::shape, "feature vector width mismatch");
      h0.insert(h0.end(), in.features.begin(), in.features.end());
    }
    const auto oh = AminoAcidTable::one_hot(kAlphabet[in.mutant]);
    h0.insert(h0.end(), oh.begin(), oh.end());

    check_mlp_chain(m.head);
    const bool training = dropout_rng != nullptr && cfg.dropout_rate > 0.0;
    acts_.assign(1, std::move(h0));
    outs_.clear();
    masks_.clear();
    for (std::size_t k = 0; k < m.head.size(); ++k) {
      auto y = dense_forward(m.head[k], acts_.back());
      outs_.push_back(y);
      const bool hidden = k + 1 < m.head.size();
      if (training && hidden) {
        masks_.push_back(dropout_mask(y.size(), cfg.dropout_rate, *dropout_rng));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= masks_.back()[i];
      } else {
        masks_.emplace_back();
      }
      acts_.push_back(std::move(y));
    }
    ready_ = true;
    return acts_.back()[0];
  }

  /// Accumulates d(loss)/d(parameters) into `grads` given d(loss)/d(prediction).
  void backward(double dpred, FusionModel& grads) const {
    if (!ready_) fail(ErrorKind::state, "backward called before forward");
    const FusionModel& m = *model_;
    const auto& cfg = m.config;
    std::vector<double> dy{dpred};
    for (std::size_t k = m.head.size(); k-- > 0;) {
      if (!masks_[k].empty())
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= masks_[k][i];
      dy = dense_backward(m.head[k], acts_[k], outs_[k], dy, grads.head[k]);
    }
    const std::span<const double> dz(dy.data(), 2 * cfg.attn_dim);
    const Tensor2 dE = light_attention_backward(m.attention, attention_, dz, grads.attention);

    const std::size_t Lw = proj_a_out_.rows;
    std::vector<double> da(cfg.fused_dim), db(cfg.fused_dim);
    for (std::size_t l = 0; l < Lw; ++l) {
      for (std::size_t r = 0; r < cfg.fused_dim; ++r) da[r] = dE(r, l);
      if (cfg.variant == FusionVariant::multiply_transfusion) {
        for (std::size_t r = 0; r < cfg.fused_dim; ++r) {
          db[r] = da[r] * proj_a_out_(l, r);
          da[r] *= proj_b_out_(l, r);
        }
        dense_backward(m.proj_b, input_.seq_window.row(l), proj_b_out_.row(l), db, grads.proj_b);
      }
      dense_backward(m.proj_a, input_.struct_window.row(l), proj_a_out_.row(l), da, grads.proj_a);
    }
  }

  /// The pooled 2*d_a attention output ("embedding after light attention").
  const std::vector<double>& attention_output() const { return attention_.output; }

  /// Input vector of the MLP head.
  const std::vector<double>& head_input() const { return acts_.front(); }

  /// Discrete state of the piecewise-linear parts (relu masks, max-pool
  /// argmax). Equal patterns mean the loss is smooth between two inputs.
  std::vector<std::uint32_t> activation_pattern() const {
    std::vector<std::uint32_t> p(attention_.argmax.begin(), attention_.argmax.end());
    for (std::size_t k = 0; k < outs_.size(); ++k) {
      if (model_->head[k].activation != Activation::relu) continue;
      for (double v : outs_[k]) p.push_back(v > 0.0 ? 1u : 0u);
    }
    return p;
  }

 private:
  const FusionModel* model_;
  ModelInput input_;
  Tensor2 proj_a_out_;
  Tensor2 proj_b_out_;
  LightAttentionCache attention_;
  std::vector<std::vector<double>> acts_;  // acts_[k] is the input of head layer k
  std::vector<std::vector<double>> outs_;  // pre-dropout outputs of head layer k
  std::vector<std::vector<double>> masks_;
  bool ready_ = false;
};

inline double predict(const FusionModel& model, const ModelInput& in) {
  FusionGraph g(model);
  return g.forward(in);
}

/// Predicted ddG (kcal/mol) for the mutation described by `feats` at `pos`.
inline double forward_variant(const FusionModel& model, const EmbeddingSet& struct_emb, const EmbeddingSet& seq_emb,
                              const MutationFeatures& feats, std::size_t pos) {
  return predict(model, make_input(model.config, struct_emb, seq_emb, feats, pos));
}

inline std::vector<double> fuse_multiply(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::shape, "element-wise product of unequal lengths");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline std::vector<double> fuse_concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace thermofuse
