#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermofuse/error.hpp"
#include "thermofuse/nncore.hpp"

namespace thermofuse {

/// Ranks 1..n with tied values sharing their mean rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::shape, "correlation of unequal lengths");
  if (x.size() < 2) fail(ErrorKind::domain, "correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::undefined, "correlation with a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::shape, "spearman of unequal lengths");
  if (x.size() < 2) fail(ErrorKind::domain, "spearman needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

inline double rmse(std::span<const double> pred, std::span<const double> target) {
  return std::sqrt(mse_loss(pred, target));
}

inline double r2(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) fail(ErrorKind::shape, "r2 of unequal lengths");
  if (target.size() < 2) fail(ErrorKind::domain, "r2 needs at least two points");
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) fail(ErrorKind::undefined, "r2 with a constant target");
  return 1.0 - ss_res / ss_tot;
}

struct RegressionReport {
  double mse = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  double spearman = 0.0;
  std::size_t n = 0;
};

inline RegressionReport regression_report(std::span<const double> pred, std::span<const double> target) {
  RegressionReport r;
  r.n = pred.size();
  r.mse = mse_loss(pred, target);
  r.rmse = std::sqrt(r.mse);
  r.r2 = thermofuse::r2(pred, target);
  r.spearman = thermofuse::spearman(pred, target);
  return r;
}

enum class StabilityClass { stabilizing, destabilizing };

inline std::string_view to_string(StabilityClass c) {
  return c == StabilityClass::destabilizing ? "destabilizing" : "stabilizing";
}

/// Positive ddG destabilizes; zero and negative count as stabilizing.
inline StabilityClass classify_sign(double ddg) {
  return ddg > 0.0 ? StabilityClass::destabilizing : StabilityClass::stabilizing;
}

struct ClassificationReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  std::optional<double> precision;  // empty when tp + fp == 0
  std::optional<double> recall;     // empty when tp + fn == 0
  std::optional<double> f1;         // empty when precision/recall undefined or both zero
};

template <class Label>
ClassificationReport classification_report(std::span<const Label> pred, std::span<const Label> truth, Label positive) {
  if (pred.size() != truth.size()) fail(ErrorKind::shape, "classification report of unequal lengths");
  if (pred.empty()) fail(ErrorKind::domain, "classification report of empty input");
  ClassificationReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive;
    const bool t = truth[i] == positive;
    if (p && t) ++r.tp;
    else if (p && !t) ++r.fp;
    else if (!p && t) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(pred.size());
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.precision && r.recall && (*r.precision + *r.recall) > 0.0) {
    r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  }
  return r;
}

/// Sign-classification of predicted vs measured ddG, destabilizing as positive.
inline ClassificationReport sign_classification_report(std::span<const double> pred, std::span<const double> target) {
  std::vector<StabilityClass> p, t;
  for (double v : pred) p.push_back(classify_sign(v));
  for (double v : target) t.push_back(classify_sign(v));
  return classification_report<StabilityClass>(p, t, StabilityClass::destabilizing);
}

}  // namespace thermofuse
