#pragma once

// Full single-point mutation scans and the versioned model artifact.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "thermofuse/corpus.hpp"
#include "thermofuse/dataset.hpp"
#include "thermofuse/fusion.hpp"
#include "thermofuse/io.hpp"
#include "thermofuse/metrics.hpp"
#include "thermofuse/training.hpp"

namespace thermofuse {

/// Predicted ddG for every position (rows) and mutant (columns, kAlphabet
/// order). Wild-type cells are exactly 0 and are never sent to the model.
struct ScanMatrix {
  std::string pdb_id;
  char chain = 'A';
  std::string wt_sequence;
  Tensor2 values;  // L x 20, kcal/mol

  std::size_t length() const { return values.rows; }
};

inline double predict_point(const FusionModel& model, const ProteinEntry& entry, const FeatureTables& tables,
                            std::size_t pos, char mut) {
  if (pos < 1 || pos > entry.structure.length()) fail(ErrorKind::bounds, "position out of range");
  const char wt = entry.structure.residues[pos - 1].aa;
  const auto feats = mutation_features(entry.structure, entry.dihedrals, pos, wt, mut, model.config.window, tables);
  return forward_variant(model, entry.struct_emb, entry.seq_emb, feats, pos);
}

inline ScanMatrix scan(const FusionModel& model, const ProteinEntry& entry, const FeatureTables& tables) {
  const auto& s = entry.structure;
  if (entry.struct_emb.length() != s.length() || entry.seq_emb.length() != s.length()) {
    fail(ErrorKind::linkage, s.pdb_id + ": embedding length does not match structure length");
  }
  ScanMatrix m;
  m.pdb_id = s.pdb_id;
  m.chain = s.chain;
  m.wt_sequence = s.sequence();
  m.values = Tensor2(s.length(), kNumAminoAcids);
  FusionGraph graph(model);
  for (std::size_t pos = 1; pos <= s.length(); ++pos) {
    const char wt = m.wt_sequence[pos - 1];
    for (std::size_t c = 0; c < kNumAminoAcids; ++c) {
      const char mut = kAlphabet[c];
      if (mut == wt) continue;
      auto feats = mutation_features(s, entry.dihedrals, pos, wt, mut, model.config.window, tables);
      m.values(pos - 1, c) = graph.forward(make_input(model.config, entry.struct_emb, entry.seq_emb, feats, pos));
    }
  }
  return m;
}

inline nlohmann::json scan_to_json(const ScanMatrix& m) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < m.length(); ++i) {
    const auto r = m.values.row(i);
    values.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"pdb_id", m.pdb_id},
          {"chain", std::string(1, m.chain)},
          {"length", m.length()},
          {"wt_sequence", m.wt_sequence},
          {"columns", std::string(kAlphabet)},
          {"units", "kcal/mol"},
          {"values", values}};
}

inline std::string format_scan_tsv(const ScanMatrix& m) {
  std::string out = "position\twt";
  for (char c : kAlphabet) (out += '\t') += c;
  out += '\n';
  char buf[64];
  for (std::size_t i = 0; i < m.length(); ++i) {
    out += std::to_string(i + 1) + '\t' + m.wt_sequence[i];
    for (std::size_t c = 0; c < kNumAminoAcids; ++c) {
      std::snprintf(buf, sizeof buf, "\t%.17g", m.values(i, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- artifact

inline constexpr int kArtifactFormatVersion = 1;

struct ModelArtifact {
  FusionModel model;
  TrainConfig train_config;
  EmbedderConfig embedder;
  std::uint64_t dataset_checksum = 0;
  std::size_t best_epoch = 0;
  std::optional<RegressionReport> val_metrics;
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json fusion_config_json(const FusionConfig& c) {
  return {{"variant", static_cast<int>(c.variant)}, {"struct_dim", c.struct_dim}, {"seq_dim", c.seq_dim},
          {"fused_dim", c.fused_dim},               {"attn_dim", c.attn_dim},     {"window", c.window},
          {"hidden", c.hidden},                     {"dropout_rate", c.dropout_rate}, {"seed", c.seed}};
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j) {
  FusionConfig c;
  c.variant = variant_from_number(j.at("variant").get<int>());
  c.struct_dim = j.at("struct_dim");
  c.seq_dim = j.at("seq_dim");
  c.fused_dim = j.at("fused_dim");
  c.attn_dim = j.at("attn_dim");
  c.window = j.at("window");
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.dropout_rate = j.at("dropout_rate");
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::json train_config_json(const TrainConfig& t) {
  return {{"variant", static_cast<int>(t.variant)}, {"epochs", t.epochs}, {"batch_size", t.batch_size},
          {"lr", t.lr}, {"weight_decay", t.weight_decay}, {"dropout_rate", t.dropout_rate}, {"d_f", t.d_f},
          {"d_a", t.d_a}, {"window", t.window}, {"hidden", t.hidden}, {"seed", t.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.variant = variant_from_number(j.at("variant").get<int>());
  t.epochs = j.at("epochs");
  t.batch_size = j.at("batch_size");
  t.lr = j.at("lr");
  t.weight_decay = j.at("weight_decay");
  t.dropout_rate = j.at("dropout_rate");
  t.d_f = j.at("d_f");
  t.d_a = j.at("d_a");
  t.window = j.at("window");
  t.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  t.seed = j.at("seed");
  return t;
}

inline constexpr std::string_view kChecksumTag = "\n#checksum fnv1a64 ";

}  // namespace detail

inline nlohmann::json regression_json(const RegressionReport& r) {
  return {{"mse", r.mse}, {"rmse", r.rmse}, {"r2", r.r2}, {"spearman", r.spearman}, {"n", r.n}};
}

/// JSON document followed by a trailer line "#checksum fnv1a64 <hex>" that
/// covers every byte before it.
inline std::string serialize_artifact(const ModelArtifact& a) {
  nlohmann::json tensors = nlohmann::json::object();
  FusionModel::visit(a.model, [&](const std::string& name, const std::vector<double>& data, std::size_t rows,
                                  std::size_t cols) {
    tensors[name] = {{"rows", rows}, {"cols", cols}, {"data", data}};
  });
  nlohmann::json doc = {
      {"format_version", kArtifactFormatVersion},
      {"variant", std::string(variant_name(a.model.config.variant))},
      {"model_config", detail::fusion_config_json(a.model.config)},
      {"train_config", detail::train_config_json(a.train_config)},
      {"embedder",
       {{"struct_dim", a.embedder.struct_dim},
        {"seq_dim", a.embedder.seq_dim},
        {"struct_seed", a.embedder.struct_seed},
        {"seq_seed", a.embedder.seq_seed}}},
      {"dataset_checksum", detail::hex64(a.dataset_checksum)},
      {"best_epoch", a.best_epoch},
      {"val_metrics", a.val_metrics ? regression_json(*a.val_metrics) : nlohmann::json(nullptr)},
      {"tensors", tensors},
  };
  std::string body = doc.dump(1);
  return body + std::string(detail::kChecksumTag) + detail::hex64(fnv1a(body)) + "\n";
}

inline ModelArtifact parse_artifact(std::string_view text) {
  const auto tag = text.rfind(detail::kChecksumTag);
  if (tag == std::string_view::npos) fail(ErrorKind::integrity, "model artifact has no checksum trailer");
  const auto body = text.substr(0, tag);
  auto stored = text.substr(tag + detail::kChecksumTag.size());
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.remove_suffix(1);
  if (stored != detail::hex64(fnv1a(body))) fail(ErrorKind::integrity, "model artifact checksum mismatch");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const std::exception& e) {
    fail(ErrorKind::integrity, std::string("model artifact is not valid JSON: ") + e.what());
  }
  const int version = doc.value("format_version", -1);
  if (version != kArtifactFormatVersion) {
    fail(ErrorKind::version, "model artifact format_version " + std::to_string(version) + " (supported: " +
                                 std::to_string(kArtifactFormatVersion) + ")");
  }
  try {
    ModelArtifact a;
    a.model = FusionModel::create(detail::fusion_config_from_json(doc.at("model_config")));
    a.train_config = detail::train_config_from_json(doc.at("train_config"));
    const auto& emb = doc.at("embedder");
    a.embedder = {emb.at("struct_dim"), emb.at("seq_dim"), emb.at("struct_seed"), emb.at("seq_seed")};
    a.dataset_checksum = std::stoull(doc.at("dataset_checksum").get<std::string>(), nullptr, 16);
    a.best_epoch = doc.at("best_epoch");
    if (!doc.at("val_metrics").is_null()) {
      const auto& v = doc.at("val_metrics");
      a.val_metrics = RegressionReport{v.at("mse"), v.at("rmse"), v.at("r2"), v.at("spearman"), v.at("n")};
    }
    const auto& tensors = doc.at("tensors");
    std::size_t seen = 0;
    FusionModel::visit(a.model, [&](const std::string& name, std::vector<double>& data, std::size_t rows,
                                    std::size_t cols) {
      const auto& t = tensors.at(name);
      if (t.at("rows").get<std::size_t>() != rows || t.at("cols").get<std::size_t>() != cols) {
        fail(ErrorKind::integrity, "tensor " + name + " has the wrong shape");
      }
      auto values = t.at("data").get<std::vector<double>>();
      if (values.size() != data.size()) fail(ErrorKind::integrity, "tensor " + name + " has the wrong length");
      data = std::move(values);
      ++seen;
    });
    if (seen != tensors.size()) fail(ErrorKind::integrity, "model artifact carries unknown tensors");
    if (!a.model.all_finite()) fail(ErrorKind::integrity, "model artifact holds non-finite parameters");
    return a;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::integrity, std::string("model artifact is incomplete: ") + e.what());
  }
}

inline void save_model(const ModelArtifact& a, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_artifact(a));
}

inline ModelArtifact load_model(const std::filesystem::path& path) { return parse_artifact(read_file(path)); }

}  // namespace thermofuse
