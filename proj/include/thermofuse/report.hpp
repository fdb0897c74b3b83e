#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermofuse/analysis.hpp"
#include "thermofuse/corpus.hpp"
#include "thermofuse/metrics.hpp"
#include "thermofuse/training.hpp"

namespace thermofuse {

struct Evaluation {
  RegressionReport regression;
  ClassificationReport classification;
  std::vector<double> predicted;
  std::vector<double> measured;
};

inline Evaluation evaluate(const FusionModel& model, const std::vector<MutationRecord>& records, Split split,
                           const Corpus& corpus, const FeatureTables& tables) {
  check_linkage(records, corpus);
  const auto examples = build_examples(model.config, records, split, corpus, tables);
  if (examples.size() < 2) fail(ErrorKind::data, "evaluation needs at least two records in the " + std::string(to_string(split)) + " split");
  Evaluation e;
  e.predicted = predict_all(model, examples);
  e.measured = targets_of(examples);
  e.regression = regression_report(e.predicted, e.measured);
  e.classification = sign_classification_report(e.predicted, e.measured);
  return e;
}

namespace detail {
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "undefined"; }
}  // namespace detail

/// key=value lines, one metric per line.
inline std::string format_reports(const RegressionReport& r, const ClassificationReport& c) {
  std::string out;
  auto line = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  line("n", std::to_string(r.n));
  line("mse", detail::num(r.mse));
  line("rmse", detail::num(r.rmse));
  line("r2", detail::num(r.r2));
  line("spearman", detail::num(r.spearman));
  line("positive_class", "destabilizing");
  line("tp", std::to_string(c.tp));
  line("fp", std::to_string(c.fp));
  line("tn", std::to_string(c.tn));
  line("fn", std::to_string(c.fn));
  line("accuracy", detail::num(c.accuracy));
  line("precision", detail::opt_num(c.precision));
  line("recall", detail::opt_num(c.recall));
  line("f1", detail::opt_num(c.f1));
  return out;
}

inline nlohmann::json classification_json(const ClassificationReport& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"positive_class", "destabilizing"},
          {"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn},
          {"accuracy", c.accuracy}, {"precision", opt(c.precision)}, {"recall", opt(c.recall)}, {"f1", opt(c.f1)}};
}

/// Light-attention output (2 * attn_dim wide) for each example, one per row.
inline Tensor2 attention_outputs(const FusionModel& model, const std::vector<Example>& examples,
                                 std::vector<double>* predictions = nullptr) {
  Tensor2 X(examples.size(), 2 * model.config.attn_dim);
  FusionGraph g(model);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const double p = g.forward(examples[i].input);
    if (predictions) predictions->push_back(p);
    std::copy(g.attention_output().begin(), g.attention_output().end(), X.row(i).begin());
  }
  return X;
}

struct AnalysisReport {
  std::vector<const MutationRecord*> points;
  PcaModel pca;
  Tensor2 coords;  // n x 2
  KMeansModel clusters;
  SubstitutionCounts counts;
};

/// PCA (2 components) and k-means over the attention outputs of one split,
/// plus wild-type x mutant counts over all records.
inline AnalysisReport analyze(const FusionModel& model, const std::vector<MutationRecord>& records, Split split,
                              const Corpus& corpus, const FeatureTables& tables, std::size_t k, std::uint64_t seed) {
  check_linkage(records, corpus);
  AnalysisReport a;
  std::vector<Example> examples;
  for (const auto& r : records) {
    if (r.split != split) continue;
    a.points.push_back(&r);
    examples.push_back(make_example(model.config, r, corpus, tables));
  }
  if (examples.size() < 3) fail(ErrorKind::data, "analysis needs at least three records in the " + std::string(to_string(split)) + " split");
  const auto X = attention_outputs(model, examples);
  a.pca = pca_fit(X, 2);
  a.coords = pca_transform(a.pca, X);
  a.clusters = kmeans(a.coords, k, seed);
  a.counts = substitution_counts(records);
  return a;
}

inline std::string format_analysis(const AnalysisReport& a) {
  std::string out = "# pca\n";
  out += "explained_variance_1=" + detail::num(a.pca.explained_variance.at(0)) + "\n";
  out += "explained_variance_2=" + detail::num(a.pca.explained_variance.at(1)) + "\n";
  out += "total_variance=" + detail::num(a.pca.total_variance) + "\n";
  out += "# kmeans\n";
  out += "k=" + std::to_string(a.clusters.k) + "\n";
  out += "iterations=" + std::to_string(a.clusters.iterations) + "\n";
  out += "inertia=" + detail::num(a.clusters.inertia) + "\n";
  out += "# points\npdb_id\tposition\twt\tmut\tddg\tpc1\tpc2\tcluster\n";
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& r = *a.points[i];
    out += r.pdb_id + '\t' + std::to_string(r.position) + '\t' + r.wt + '\t' + r.mut + '\t' + detail::num(r.ddg) +
           '\t' + detail::num(a.coords(i, 0)) + '\t' + detail::num(a.coords(i, 1)) + '\t' +
           std::to_string(a.clusters.assignments[i]) + '\n';
  }
  out += "# substitution_counts (rows wild type, columns mutant)\nwt";
  for (char c : kAlphabet) (out += '\t') += c;
  out += '\n';
  for (std::size_t w = 0; w < kNumAminoAcids; ++w) {
    out += kAlphabet[w];
    for (std::size_t m = 0; m < kNumAminoAcids; ++m) out += '\t' + std::to_string(a.counts.counts[w][m]);
    out += '\n';
  }
  return out;
}

}  // namespace thermofuse
