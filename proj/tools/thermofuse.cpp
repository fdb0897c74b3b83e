// thermofuse command-line front end. Each subcommand is a thin shell over the
// library; exit codes: 0 ok, 1 usage, 2 data error, 3 internal error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thermofuse/thermofuse.hpp"

namespace fs = std::filesystem;
using namespace thermofuse;

namespace {

struct Options {
  std::string model;
  std::string data;
  std::string pdb_dir;
  std::string emb_dir;
  std::string out;
  std::string chain;
  std::string protein;
  std::string static_dir;
  std::string split = "val";
  std::size_t epochs = 100;
  std::size_t batch = 64;
  std::string lr = "0.001";
  std::uint64_t seed = 0;
  std::string window = "7";
  std::size_t k = 3;
  int port = 8080;
  std::size_t jobs = 1;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream field(item);
    T v{};
    if (!(field >> v) || !(field >> std::ws).eof()) throw CLI::ValidationError(flag, "cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError(flag, "empty list");
  return out;
}

template <class T>
T parse_one(const std::string& text, const char* flag) {
  auto v = parse_list<T>(text, flag);
  if (v.size() != 1) throw CLI::ValidationError(flag, "expects a single value");
  return v.front();
}

FusionVariant parse_variant(const std::string& text) {
  const auto n = parse_one<int>(text, "--model");
  if (n < 1 || n > 4) throw CLI::ValidationError("--model", "must be 1, 2, 3 or 4");
  return variant_from_number(n);
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
  return value;
}

std::vector<MutationRecord> load_records(const Options& o) {
  return dedup(read_dataset_file(require(o.data, "--data"), o.seed)).kept;
}

Corpus load_corpus_for(const Options& o, const std::vector<MutationRecord>& records, const EmbedderConfig& cfg) {
  return load_corpus({require(o.pdb_dir, "--pdb-dir"), o.emb_dir}, records, cfg);
}

FeatureTables tables() { return FeatureTables::from_matrices(builtin_matrices()); }

void emit(const Options& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(o.out, text);
  }
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  throw CLI::ValidationError("--split", "must be train or val");
}

TrainConfig train_config(const Options& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.lr = parse_one<double>(o.lr, "--lr");
  tc.window = parse_one<std::size_t>(o.window, "--window");
  tc.seed = o.seed;
  if (!o.model.empty()) tc.variant = parse_variant(o.model);
  return tc;
}

void cmd_train(const Options& o) {
  const auto tc = train_config(o);
  const auto out = require(o.out, "--out");
  const auto records = load_records(o);
  const EmbedderConfig embedder;
  const auto corpus = load_corpus_for(o, records, embedder);
  const auto result = train(tc, records, corpus, tables());
  ModelArtifact a{result.model, tc, embedder, dataset_checksum(records), result.best_epoch,
                  RegressionReport{}};
  const auto& best = result.best_log();
  a.val_metrics = RegressionReport{best.val_mse, std::sqrt(best.val_mse), best.val_r2, best.val_spearman, 0};
  for (const auto& r : records) a.val_metrics->n += r.split == Split::val;
  save_model(a, out);
  write_file_atomic(out + ".log.tsv", format_epoch_logs(result.logs));
  std::cerr << "trained " << variant_name(tc.variant) << " for " << tc.epochs << " epochs; best epoch "
            << result.best_epoch << " (val spearman " << best.val_spearman << ")\n";
}

void cmd_eval(const Options& o) {
  const auto artifact = load_model(require(o.model, "--model"));
  const auto records = load_records(o);
  const auto corpus = load_corpus_for(o, records, artifact.embedder);
  const auto e = evaluate(artifact.model, records, parse_split(o.split), corpus, tables());
  emit(o, format_reports(e.regression, e.classification));
}

void cmd_scan(const Options& o) {
  const auto artifact = load_model(require(o.model, "--model"));
  const auto id = require(o.protein, "PDB_ID");
  std::optional<char> chain;
  if (!o.chain.empty()) chain = o.chain[0];
  const auto entry = load_entry({require(o.pdb_dir, "--pdb-dir"), o.emb_dir}, id, chain, artifact.embedder);
  const auto m = scan(artifact.model, entry, tables());
  const bool json = !o.out.empty() && fs::path(o.out).extension() == ".json";
  emit(o, json ? scan_to_json(m).dump(1) + "\n" : format_scan_tsv(m));
}

void cmd_analyze(const Options& o) {
  const auto artifact = load_model(require(o.model, "--model"));
  const auto records = load_records(o);
  const auto corpus = load_corpus_for(o, records, artifact.embedder);
  const auto a = analyze(artifact.model, records, parse_split(o.split), corpus, tables(), o.k, o.seed);
  emit(o, format_analysis(a));
}

void cmd_gridsearch(const Options& o) {
  Options single = o;
  single.model.clear();
  single.lr = "0.001";
  single.window = "7";
  const TrainConfig base = train_config(single);
  GridAxes axes;
  if (!o.model.empty())
    for (int v : parse_list<int>(o.model, "--model")) axes.variants.push_back(parse_variant(std::to_string(v)));
  axes.lr = parse_list<double>(o.lr, "--lr");
  axes.window = parse_list<std::size_t>(o.window, "--window");
  const auto records = load_records(o);
  const auto corpus = load_corpus_for(o, records, EmbedderConfig{});
  const auto results = grid_search(expand_grid(base, axes), records, corpus, tables(), o.jobs);
  emit(o, format_grid_report(results));
}

void cmd_serve(const Options& o) {
  ServiceConfig cfg;
  cfg.artifact = require(o.model, "--model");
  cfg.pdb_dir = require(o.pdb_dir, "--pdb-dir");
  cfg.emb_dir = o.emb_dir;
  cfg.dataset = o.data;
  cfg.static_dir = o.static_dir;
  cfg.port = o.port;
  const auto service = ExplorerService::from_config(cfg);
  HttpServer server(service, cfg.static_dir);
  const int port = server.bind(cfg.host, cfg.port);
  std::cerr << "serving " << service.corpus().size() << " proteins on http://" << cfg.host << ':' << port << "\n";
  server.listen();
}

void cmd_embed(const Options& o) {
  const auto out = fs::path(require(o.out, "--out"));
  fs::create_directories(out);
  EmbedderConfig cfg;
  const auto corpus = load_corpus({require(o.pdb_dir, "--pdb-dir"), {}}, {}, cfg);
  for (const auto& id : corpus.ids()) {
    const auto& e = corpus.at(id);
    write_embeddings(e.struct_emb, out / (id + ".struct.emb1"));
    write_embeddings(e.seq_emb, out / (id + ".seq.emb1"));
  }
  std::cerr << "wrote embeddings for " << corpus.size() << " proteins to " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  const auto root = default_data_dir();
  o.data = (root / "corpus" / "dataset.csv").string();
  o.pdb_dir = (root / "corpus" / "pdb").string();

  CLI::App app{"thermofuse: protein stability (ddG) prediction from fused structure and sequence embeddings"};
  app.require_subcommand(1);

  auto model_variant = [&](CLI::App* c) { c->add_option("--model", o.model, "Fusion variant 1-4")->required(); };
  auto model_list = [&](CLI::App* c) { c->add_option("--model", o.model, "Comma-separated fusion variants (1-4)"); };
  auto artifact = [&](CLI::App* c) { c->add_option("--model", o.model, "Model artifact path")->required(); };
  auto data = [&](CLI::App* c) { c->add_option("--data", o.data, "Mutation dataset (csv/tsv)"); };
  auto pdb = [&](CLI::App* c) { c->add_option("--pdb-dir", o.pdb_dir, "Directory of <pdb_id>.pdb files"); };
  auto emb = [&](CLI::App* c) { c->add_option("--emb-dir", o.emb_dir, "Directory of <id>.struct.emb1 / <id>.seq.emb1"); };
  auto out = [&](CLI::App* c, const char* what) { c->add_option("--out", o.out, what); };
  auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
  auto training = [&](CLI::App* c) {
    c->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
    c->add_option("--batch", o.batch, "Minibatch size")->check(CLI::PositiveNumber);
    seed(c);
  };
  auto split = [&](CLI::App* c) { c->add_option("--split", o.split, "Split to evaluate (train|val)"); };

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes the artifact and <out>.log.tsv");
  model_variant(train_cmd), data(train_cmd), pdb(train_cmd), emb(train_cmd), training(train_cmd);
  out(train_cmd, "Artifact path");
  train_cmd->add_option("--lr", o.lr, "Adam learning rate");
  train_cmd->add_option("--window", o.window, "Odd attention window");

  auto* eval_cmd = app.add_subcommand("eval", "Regression and classification reports for an artifact");
  artifact(eval_cmd), data(eval_cmd), pdb(eval_cmd), emb(eval_cmd), split(eval_cmd);
  out(eval_cmd, "Report path (default stdout)");

  auto* scan_cmd = app.add_subcommand("scan", "Full L x 20 mutation scan of one protein");
  artifact(scan_cmd), pdb(scan_cmd), emb(scan_cmd);
  scan_cmd->add_option("pdb_id", o.protein, "Protein id")->required();
  scan_cmd->add_option("--chain", o.chain, "Chain identifier (default: first chain)");
  out(scan_cmd, "Output path; .json for JSON, otherwise TSV (default stdout)");

  auto* analyze_cmd = app.add_subcommand("analyze", "PCA, k-means and substitution counts");
  artifact(analyze_cmd), data(analyze_cmd), pdb(analyze_cmd), emb(analyze_cmd), split(analyze_cmd), seed(analyze_cmd);
  analyze_cmd->add_option("--k", o.k, "Number of clusters")->check(CLI::PositiveNumber);
  out(analyze_cmd, "Report path (default stdout)");

  auto* grid_cmd = app.add_subcommand("gridsearch", "Train a hyperparameter lattice and rank the cells");
  model_list(grid_cmd), data(grid_cmd), pdb(grid_cmd), emb(grid_cmd), training(grid_cmd);
  grid_cmd->add_option("--lr", o.lr, "Comma-separated learning rates");
  grid_cmd->add_option("--window", o.window, "Comma-separated windows");
  grid_cmd->add_option("--jobs", o.jobs, "Cells trained in parallel")->check(CLI::PositiveNumber);
  out(grid_cmd, "Ranked table path (default stdout)");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP API over a model artifact and corpus");
  artifact(serve_cmd), data(serve_cmd), pdb(serve_cmd), emb(serve_cmd);
  serve_cmd->add_option("--port", o.port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--static", o.static_dir, "Directory of UI assets to serve at /");

  auto* embed_cmd = app.add_subcommand("embed", "Write desk-scale EMB1 embeddings for every PDB file");
  pdb(embed_cmd);
  out(embed_cmd, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return 1;
  }

  try {
    if (*train_cmd) cmd_train(o);
    else if (*eval_cmd) cmd_eval(o);
    else if (*scan_cmd) cmd_scan(o);
    else if (*analyze_cmd) cmd_analyze(o);
    else if (*grid_cmd) cmd_gridsearch(o);
    else if (*serve_cmd) cmd_serve(o);
    else if (*embed_cmd) cmd_embed(o);
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
