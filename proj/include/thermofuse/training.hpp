#pragma once

// Minibatch Adam training on MSE with per-epoch validation and best-epoch
// (highest validation Spearman) selection, plus a hyperparameter grid search.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "thermofuse/corpus.hpp"
#include "thermofuse/dataset.hpp"
#include "thermofuse/features.hpp"
#include "thermofuse/fusion.hpp"
#include "thermofuse/metrics.hpp"

namespace thermofuse {

struct TrainConfig {
  FusionVariant variant = FusionVariant::multiply_transfusion;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double dropout_rate = 0.0;
  std::size_t d_f = 64;
  std::size_t d_a = 32;
  std::size_t window = 7;
  std::vector<std::size_t> hidden{64, 64};
  std::uint64_t seed = 0;
};

inline FusionConfig to_fusion_config(const TrainConfig& t, std::size_t struct_dim, std::size_t seq_dim) {
  FusionConfig c;
  c.variant = t.variant;
  c.struct_dim = struct_dim;
  c.seq_dim = seq_dim;
  c.fused_dim = t.d_f;
  c.attn_dim = t.d_a;
  c.window = t.window;
  c.hidden = t.hidden;
  c.dropout_rate = t.dropout_rate;
  c.seed = t.seed;
  return c;
}

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_spearman = 0.0;
  double val_r2 = 0.0;
};

/// 1-based index of the first epoch with the highest validation Spearman.
inline std::size_t select_best_epoch(std::span<const EpochLog> logs) {
  if (logs.empty()) fail(ErrorKind::domain, "no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (logs[i].val_spearman > logs[best].val_spearman) best = i;
  }
  return best + 1;
}

struct Example {
  ModelInput input;
  double target = 0.0;
};

inline Example make_example(const FusionConfig& config, const MutationRecord& r, const Corpus& corpus,
                            const FeatureTables& tables) {
  const auto& e = corpus.at(r.pdb_id);
  auto feats = mutation_features(e.structure, e.dihedrals, r.position, r.wt, r.mut, config.window, tables);
  return {make_input(config, e.struct_emb, e.seq_emb, feats, r.position), r.ddg};
}

inline std::vector<Example> build_examples(const FusionConfig& config, const std::vector<MutationRecord>& records,
                                           Split split, const Corpus& corpus, const FeatureTables& tables) {
  std::vector<Example> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(make_example(config, r, corpus, tables));
  return out;
}

inline std::vector<double> predict_all(const FusionModel& model, const std::vector<Example>& examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  FusionGraph g(model);
  for (const auto& ex : examples) out.push_back(g.forward(ex.input));
  return out;
}

inline std::vector<double> targets_of(const std::vector<Example>& examples) {
  std::vector<double> t;
  t.reserve(examples.size());
  for (const auto& ex : examples) t.push_back(ex.target);
  return t;
}

struct TrainResult {
  FusionModel model;        // parameters at best_epoch
  FusionModel final_model;  // parameters after the last epoch
  std::vector<EpochLog> logs;
  std::size_t best_epoch = 0;

  const EpochLog& best_log() const { return logs.at(best_epoch - 1); }
};

namespace detail {
// Undefined correlations (constant predictions) count as no signal.
inline double spearman_or_zero(std::span<const double> p, std::span<const double> t) {
  try {
    return spearman(p, t);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::undefined) return 0.0;
    throw;
  }
}
inline double r2_or_zero(std::span<const double> p, std::span<const double> t) {
  try {
    return r2(p, t);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::undefined) return 0.0;
    throw;
  }
}
}  // namespace detail

inline TrainResult train_examples(const TrainConfig& tc, const FusionConfig& fc, const std::vector<Example>& train_set,
                                  const std::vector<Example>& val_set) {
  if (tc.epochs < 1) fail(ErrorKind::domain, "epochs must be >= 1");
  if (tc.batch_size < 1) fail(ErrorKind::domain, "batch_size must be >= 1");
  if (train_set.empty() || val_set.empty()) fail(ErrorKind::data, "train and validation splits must be non-empty");

  FusionModel model = FusionModel::create(fc);
  AdamState adam(AdamConfig{tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay}, model.parameters());
  Rng order_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
  Rng dropout_rng(tc.seed + 1);
  const auto train_targets = targets_of(train_set);
  const auto val_targets = targets_of(val_set);

  TrainResult result{model, model, {}, 0};
  double best_spearman = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      const double scale = 2.0 / static_cast<double>(end - start);
      FusionModel grads = model.zeros_like();
      FusionGraph g(model);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = train_set[order[b]];
        const double pred = g.forward(ex.input, &dropout_rng);
        g.backward(scale * (pred - ex.target), grads);
      }
      adam.step(model.parameters(), grads.parameters());
    }
    if (!model.all_finite()) fail(ErrorKind::data, "training diverged (non-finite parameters) at epoch " + std::to_string(epoch));

    const auto train_pred = predict_all(model, train_set);
    const auto val_pred = predict_all(model, val_set);
    EpochLog log;
    log.epoch = epoch;
    log.train_mse = mse_loss(train_pred, train_targets);
    log.val_mse = mse_loss(val_pred, val_targets);
    log.val_spearman = detail::spearman_or_zero(val_pred, val_targets);
    log.val_r2 = detail::r2_or_zero(val_pred, val_targets);
    result.logs.push_back(log);
    if (log.val_spearman > best_spearman) {
      best_spearman = log.val_spearman;
      result.model = model;
    }
  }
  result.final_model = std::move(model);
  result.best_epoch = select_best_epoch(result.logs);
  return result;
}

inline TrainResult train(const TrainConfig& tc, const std::vector<MutationRecord>& records, const Corpus& corpus,
                         const FeatureTables& tables) {
  check_linkage(records, corpus);
  const auto fc = to_fusion_config(tc, corpus.struct_dim(), corpus.seq_dim());
  const auto train_set = build_examples(fc, records, Split::train, corpus, tables);
  const auto val_set = build_examples(fc, records, Split::val, corpus, tables);
  return train_examples(tc, fc, train_set, val_set);
}

inline std::string format_epoch_logs(const std::vector<EpochLog>& logs) {
  std::ostringstream out;
  out << "epoch\ttrain_mse\tval_mse\tval_spearman\tval_r2\n" << std::setprecision(17);
  for (const auto& l : logs) {
    out << l.epoch << '\t' << l.train_mse << '\t' << l.val_mse << '\t' << l.val_spearman << '\t' << l.val_r2 << '\n';
  }
  return out.str();
}

/// Axes of a hyperparameter lattice; an empty axis keeps the base value.
struct GridAxes {
  std::vector<FusionVariant> variants;
  std::vector<double> lr;
  std::vector<double> weight_decay;
  std::vector<double> dropout_rate;
  std::vector<std::size_t> d_f;
  std::vector<std::size_t> window;
  std::vector<std::size_t> hidden_width;  // applied to every hidden layer
};

/// Cartesian product in axis order (variant outermost, hidden width innermost).
inline std::vector<TrainConfig> expand_grid(const TrainConfig& base, const GridAxes& axes) {
  std::vector<TrainConfig> cells{base};
  auto expand = [&cells](const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<TrainConfig> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        TrainConfig t = c;
        apply(t, v);
        next.push_back(t);
      }
    }
    cells = std::move(next);
  };
  expand(axes.variants, [](TrainConfig& t, FusionVariant v) { t.variant = v; });
  expand(axes.lr, [](TrainConfig& t, double v) { t.lr = v; });
  expand(axes.weight_decay, [](TrainConfig& t, double v) { t.weight_decay = v; });
  expand(axes.dropout_rate, [](TrainConfig& t, double v) { t.dropout_rate = v; });
  expand(axes.d_f, [](TrainConfig& t, std::size_t v) { t.d_f = v; });
  expand(axes.window, [](TrainConfig& t, std::size_t v) { t.window = v; });
  expand(axes.hidden_width, [](TrainConfig& t, std::size_t v) {
    for (auto& h : t.hidden) h = v;
  });
  return cells;
}

struct GridResult {
  std::size_t cell = 0;
  TrainConfig config;
  std::size_t best_epoch = 0;
  std::optional<EpochLog> best;
  std::vector<EpochLog> logs;
  std::string error;  // non-empty when the cell failed

  bool ok() const { return error.empty(); }
};

/// Trains every cell (optionally `jobs` at a time) and ranks by best
/// validation Spearman, descending; failed cells go last, ties by cell index.
/// A failing cell records its error and does not abort the sweep.
inline std::vector<GridResult> grid_search(const std::vector<TrainConfig>& cells, const std::vector<MutationRecord>& records,
                                           const Corpus& corpus, const FeatureTables& tables, std::size_t jobs = 1) {
  if (cells.empty()) fail(ErrorKind::domain, "empty hyperparameter grid");
  check_linkage(records, corpus);
  std::vector<GridResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      GridResult& r = results[i];
      r.cell = i;
      r.config = cells[i];
      try {
        auto tr = train(cells[i], records, corpus, tables);
        r.best_epoch = tr.best_epoch;
        r.best = tr.best_log();
        r.logs = std::move(tr.logs);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    if (a.ok() != b.ok()) return a.ok();
    if (!a.ok()) return a.cell < b.cell;
    if (a.best->val_spearman != b.best->val_spearman) return a.best->val_spearman > b.best->val_spearman;
    return a.cell < b.cell;
  });
  return results;
}

inline std::string format_grid_report(const std::vector<GridResult>& results) {
  std::ostringstream out;
  out << "rank\tcell\tmodel\tlr\tweight_decay\tdropout\td_f\twindow\thidden\tepochs\tbest_epoch\tval_spearman\tval_mse\tval_r2\terror\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::string hidden;
    for (auto h : r.config.hidden) hidden += (hidden.empty() ? "" : "x") + std::to_string(h);
    out << (i + 1) << '\t' << r.cell << '\t' << static_cast<int>(r.config.variant) << '\t' << r.config.lr << '\t'
        << r.config.weight_decay << '\t' << r.config.dropout_rate << '\t' << r.config.d_f << '\t' << r.config.window
        << '\t' << hidden << '\t' << r.config.epochs << '\t';
    if (r.ok()) {
      out << r.best_epoch << '\t' << r.best->val_spearman << '\t' << r.best->val_mse << '\t' << r.best->val_r2 << '\t'
          << '\n';
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      std::replace(msg.begin(), msg.end(), '\t', ' ');
      out << "\t\t\t\t" << msg << '\n';
    }
  }
  return out.str();
}

}  // namespace thermofuse
