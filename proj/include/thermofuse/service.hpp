#pragma once

// Read-only HTTP API over a loaded model artifact, a structure corpus and a
// mutation dataset. Every payload is computed from state fixed at startup, so
// identical requests produce byte-identical bodies.
//
//   GET  /api/proteins
//   GET  /api/proteins/{id}/structure
//   GET  /api/proteins/{id}/scan
//   POST /api/predict            {pdb_id, chain, position, wt_aa, mut_aa} -> {ddg}
//   GET  /api/dataset/summary
//   GET  /api/analysis/embedding_scatter
//   GET  /api/metrics

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "thermofuse/analysis.hpp"
#include "thermofuse/report.hpp"
#include "thermofuse/scan.hpp"

namespace thermofuse {

struct ApiResponse {
  int status = 200;
  std::string body;
};

struct ServiceConfig {
  std::filesystem::path artifact;
  std::filesystem::path pdb_dir;
  std::filesystem::path emb_dir;
  std::filesystem::path dataset;  // optional
  std::filesystem::path data_dir = default_data_dir();
  std::filesystem::path static_dir;  // optional UI assets
  std::string host = "127.0.0.1";
  int port = 8080;
};

class ExplorerService {
 public:
  ExplorerService(ModelArtifact artifact, Corpus corpus, std::vector<MutationRecord> records, FeatureTables tables)
      : artifact_(std::move(artifact)), corpus_(std::move(corpus)), tables_(std::move(tables)) {
    const auto d = dedup(records);
    raw_count_ = records.size();
    dedup_report_ = d.report;
    records_ = d.kept;
    summary_ = build_summary();
    metrics_ = build_metrics();
    scatter_ = build_scatter();
  }

  /// Loads everything named in `config`; any failure is a startup error.
  static ExplorerService from_config(const ServiceConfig& config) {
    try {
      if (!std::filesystem::exists(config.artifact)) {
        fail(ErrorKind::startup, "model artifact not found: " + config.artifact.string());
      }
      auto artifact = load_model(config.artifact);
      std::vector<MutationRecord> records;
      if (!config.dataset.empty()) records = read_dataset_file(config.dataset.string(), artifact.train_config.seed);
      auto corpus = load_corpus({config.pdb_dir, config.emb_dir}, records, artifact.embedder);
      auto tables = FeatureTables::from_matrices(builtin_matrices(config.data_dir));
      return ExplorerService(std::move(artifact), std::move(corpus), std::move(records), std::move(tables));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::startup) throw;
      fail(ErrorKind::startup, e.what());
    }
  }

  const ModelArtifact& artifact() const { return artifact_; }
  const Corpus& corpus() const { return corpus_; }

  ApiResponse proteins() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& id : corpus_.ids()) {
      const auto& s = corpus_.at(id).structure;
      list.push_back({{"id", id}, {"chain", std::string(1, s.chain)}, {"length", s.length()}, {"sequence", s.sequence()}});
    }
    return ok({{"proteins", list}});
  }

  ApiResponse structure(const std::string& id) const {
    const auto* e = corpus_.find(id);
    if (!e) return error(404, "unknown protein " + id);
    nlohmann::json residues = nlohmann::json::array();
    for (const auto& r : e->structure.residues) {
      nlohmann::json res = {{"index", r.index}, {"aa", std::string(1, r.aa)}};
      for (unsigned a = 0; a < 4; ++a) {
        const auto key = std::string(kBackboneNames[a]);
        res[key] = r.present[a] ? nlohmann::json(std::vector<double>(r.atoms[a].begin(), r.atoms[a].end()))
                                : nlohmann::json(nullptr);
      }
      residues.push_back(res);
    }
    return ok({{"id", id},
               {"chain", std::string(1, e->structure.chain)},
               {"length", e->structure.length()},
               {"sequence", e->structure.sequence()},
               {"residues", residues}});
  }

  ApiResponse scan(const std::string& id) const {
    const auto* e = corpus_.find(id);
    if (!e) return error(404, "unknown protein " + id);
    return guarded([&] { return ok(scan_to_json(thermofuse::scan(artifact_.model, *e, tables_))); });
  }

  ApiResponse predict(const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const std::exception&) {
      return error(400, "request body is not valid JSON");
    }
    std::string pdb_id, chain, wt, mut;
    long long position = 0;
    try {
      pdb_id = req.at("pdb_id").get<std::string>();
      chain = req.value("chain", std::string());
      position = req.at("position").get<long long>();
      wt = req.at("wt_aa").get<std::string>();
      mut = req.at("mut_aa").get<std::string>();
    } catch (const std::exception&) {
      return error(400, "expected fields pdb_id, chain, position, wt_aa, mut_aa");
    }
    const auto* e = corpus_.find(pdb_id);
    if (!e) return error(404, "unknown protein " + pdb_id);
    if (!chain.empty() && chain[0] != e->structure.chain) {
      return error(422, "chain " + chain + " is not loaded for " + pdb_id);
    }
    if (wt.size() != 1 || mut.size() != 1) return error(422, "wt_aa and mut_aa must be single letters");
    if (position < 1) return error(422, "position must be >= 1");
    return guarded([&] {
      const auto pos = static_cast<std::size_t>(position);
      const auto feats =
          mutation_features(e->structure, e->dihedrals, pos, wt[0], mut[0], artifact_.model.config.window, tables_);
      const double ddg = forward_variant(artifact_.model, e->struct_emb, e->seq_emb, feats, pos);
      return ok({{"pdb_id", pdb_id},
                 {"chain", std::string(1, e->structure.chain)},
                 {"position", pos},
                 {"wt_aa", wt},
                 {"mut_aa", mut},
                 {"ddg", ddg},
                 {"class", std::string(to_string(classify_sign(ddg)))},
                 {"units", "kcal/mol"}});
    });
  }

  ApiResponse dataset_summary() const { return ok(summary_); }
  ApiResponse embedding_scatter() const { return ok(scatter_); }
  ApiResponse metrics() const { return ok(metrics_); }

  /// Routes a request; used by the HTTP layer and directly by tests.
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body = {}) const {
    static const std::string prefix = "/api/proteins/";
    if (method == "GET") {
      if (path == "/api/proteins") return proteins();
      if (path == "/api/dataset/summary") return dataset_summary();
      if (path == "/api/analysis/embedding_scatter") return embedding_scatter();
      if (path == "/api/metrics") return metrics();
      if (path.starts_with(prefix)) {
        const auto rest = path.substr(prefix.size());
        const auto slash = rest.find('/');
        if (slash != std::string::npos) {
          const auto id = rest.substr(0, slash);
          const auto what = rest.substr(slash + 1);
          if (what == "structure") return structure(id);
          if (what == "scan") return scan(id);
        }
      }
    }
    if (method == "POST" && path == "/api/predict") return predict(body);
    return error(404, "no route for " + method + " " + path);
  }

 private:
  static ApiResponse ok(const nlohmann::json& j) { return {200, j.dump()}; }

  static ApiResponse error(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}, {"status", status}}.dump()};
  }

  template <class F>
  static ApiResponse guarded(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::bounds:
        case ErrorKind::consistency:
        case ErrorKind::domain:
          return error(422, e.what());
        case ErrorKind::linkage:
          return error(409, e.what());
        default:
          return error(500, e.what());
      }
    }
  }

  nlohmann::json build_summary() const {
    std::size_t train = 0, val = 0;
    for (const auto& r : records_) (r.split == Split::train ? train : val)++;
    const auto counts = substitution_counts(records_);
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& row : counts.counts) grid.push_back(std::vector<std::size_t>(row.begin(), row.end()));
    return {{"n_records_raw", raw_count_},
            {"n_records", records_.size()},
            {"n_train", train},
            {"n_val", val},
            {"duplicates_removed", {{"train", dedup_report_.removed_train}, {"val", dedup_report_.removed_val}}},
            {"dedup_fraction", {{"train", dedup_report_.removed_fraction_train()}, {"val", dedup_report_.removed_fraction_val()}}},
            {"substitution_counts", {{"alphabet", std::string(kAlphabet)}, {"rows", "wild_type"}, {"columns", "mutant"}, {"counts", grid}}}};
  }

  nlohmann::json build_metrics() const {
    nlohmann::json j = {{"variant", std::string(variant_name(artifact_.model.config.variant))},
                        {"best_epoch", artifact_.best_epoch},
                        {"sign_convention", "ddg > 0 destabilizing; ddg <= 0 stabilizing"}};
    try {
      const auto e = evaluate(artifact_.model, records_, Split::val, corpus_, tables_);
      j["split"] = "val";
      j["regression"] = regression_json(e.regression);
      j["classification"] = classification_json(e.classification);
    } catch (const Error& e) {
      j["regression"] = nullptr;
      j["classification"] = nullptr;
      j["unavailable"] = e.what();
    }
    return j;
  }

  nlohmann::json build_scatter() const {
    nlohmann::json j = {{"source", "light-attention output, 2-component PCA"}, {"points", nlohmann::json::array()}};
    std::vector<const MutationRecord*> val;
    for (const auto& r : records_)
      if (r.split == Split::val && corpus_.find(r.pdb_id)) val.push_back(&r);
    const std::size_t width = 2 * artifact_.model.config.attn_dim;
    if (val.size() < 3 || width < 2) {
      j["unavailable"] = "need at least 3 validation records";
      return j;
    }
    try {
      std::vector<Example> examples;
      for (const auto* r : val) examples.push_back(make_example(artifact_.model.config, *r, corpus_, tables_));
      std::vector<double> preds;
      const auto X = attention_outputs(artifact_.model, examples, &preds);
      const auto pca = pca_fit(X, 2);
      const auto Z = pca_transform(pca, X);
      for (std::size_t i = 0; i < val.size(); ++i) {
        const auto& r = *val[i];
        j["points"].push_back({{"pdb_id", r.pdb_id}, {"position", r.position}, {"wt_aa", std::string(1, r.wt)},
                               {"mut_aa", std::string(1, r.mut)}, {"x", Z(i, 0)}, {"y", Z(i, 1)},
                               {"ddg", r.ddg}, {"predicted_ddg", preds[i]}});
      }
      j["explained_variance"] = pca.explained_variance;
    } catch (const Error& e) {
      j["points"] = nlohmann::json::array();
      j["unavailable"] = e.what();
    }
    return j;
  }

  ModelArtifact artifact_;
  Corpus corpus_;
  FeatureTables tables_;
  std::vector<MutationRecord> records_;
  DedupReport dedup_report_;
  std::size_t raw_count_ = 0;
  nlohmann::json summary_;
  nlohmann::json metrics_;
  nlohmann::json scatter_;
};

/// cpp-httplib front end for an ExplorerService.
class HttpServer {
 public:
  explicit HttpServer(const ExplorerService& service, const std::filesystem::path& static_dir = {})
      : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server_->Get(R"(/api/.*)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service_.handle("GET", req.path));
    });
    server_->Post("/api/predict", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service_.handle("POST", req.path, req.body));
    });
    if (!static_dir.empty()) server_->set_mount_point("/", static_dir.string());
    // httplib's default also sets SO_REUSEPORT, which lets a second server share a busy port
    server_->set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
  }

  /// Binds `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorKind::startup, "cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    return bound;
  }

  void listen() { server_->listen_after_bind(); }
  void stop() { server_->stop(); }
  void wait_until_ready() { server_->wait_until_ready(); }

 private:
  const ExplorerService& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Blocks serving `config` until the process is stopped.
inline void serve(const ServiceConfig& config) {
  const auto service = ExplorerService::from_config(config);
  HttpServer server(service, config.static_dir);
  server.bind(config.host, config.port);
  server.listen();
}

}  // namespace thermofuse
