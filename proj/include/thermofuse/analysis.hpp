#pragma once

// Dataset and embedding analysis: wild-type -> mutant counts, PCA, k-means
// and a random forest classifier.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "thermofuse/amino_acids.hpp"
#include "thermofuse/dataset.hpp"
#include "thermofuse/nncore.hpp"

namespace thermofuse {

struct SubstitutionCounts {
  std::array<std::array<std::size_t, kNumAminoAcids>, kNumAminoAcids> counts{};  // [wt][mut]

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (auto c : row) n += c;
    return n;
  }
};

inline SubstitutionCounts substitution_counts(const std::vector<MutationRecord>& records) {
  SubstitutionCounts s;
  for (const auto& r : records) ++s.counts[require_aa_index(r.wt)][require_aa_index(r.mut)];
  return s;
}

// ---------------------------------------------------------------- PCA

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and eigenvectors as rows.
inline std::pair<std::vector<double>, Tensor2> symmetric_eigen(Tensor2 A) {
  const std::size_t n = A.rows;
  if (A.cols != n) fail(ErrorKind::shape, "symmetric_eigen needs a square matrix");
  Tensor2 V(n, n);
  for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;
  double scale = 0.0;
  for (double v : A.data) scale = std::max(scale, std::abs(v));
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off <= 1e-30 * std::max(1.0, scale * scale)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return A(a, a) > A(b, b); });
  std::vector<double> values(n);
  Tensor2 vectors(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = A(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) vectors(i, k) = V(k, order[i]);
  }
  return {values, vectors};
}

struct PcaModel {
  std::vector<double> mean;
  Tensor2 components;  // k x d, orthonormal rows
  std::vector<double> explained_variance;
  double total_variance = 0.0;

  std::size_t k() const { return components.rows; }
};

/// Principal axes of the rows of X (n x d), sample covariance (n - 1).
inline PcaModel pca_fit(const Tensor2& X, std::size_t k) {
  const std::size_t n = X.rows, d = X.cols;
  if (n < 2) fail(ErrorKind::domain, "PCA needs at least two rows");
  if (k < 1 || k > std::min(n - 1, d)) {
    fail(ErrorKind::domain, "k = " + std::to_string(k) + " must lie in 1..min(n-1, d) = " + std::to_string(std::min(n - 1, d)));
  }
  PcaModel m;
  m.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += X(i, j);
  for (auto& v : m.mean) v /= static_cast<double>(n);
  Tensor2 C(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = X(i, a) - m.mean[a];
      for (std::size_t b = a; b < d; ++b) C(a, b) += xa * (X(i, b) - m.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      C(a, b) /= static_cast<double>(n - 1);
      C(b, a) = C(a, b);
    }
  auto [values, vectors] = symmetric_eigen(C);
  m.total_variance = 0.0;
  for (double v : values) m.total_variance += std::max(v, 0.0);
  m.components = Tensor2(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    m.explained_variance.push_back(std::max(values[i], 0.0));
    // fixed sign: largest-magnitude coordinate positive
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(vectors(i, j)) > std::abs(vectors(i, big))) big = j;
    const double sign = vectors(i, big) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) m.components(i, j) = sign * vectors(i, j);
  }
  return m;
}

inline Tensor2 pca_transform(const PcaModel& m, const Tensor2& X) {
  if (X.cols != m.mean.size()) fail(ErrorKind::shape, "PCA input width mismatch");
  Tensor2 Z(X.rows, m.k());
  for (std::size_t i = 0; i < X.rows; ++i)
    for (std::size_t c = 0; c < m.k(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < X.cols; ++j) acc += (X(i, j) - m.mean[j]) * m.components(c, j);
      Z(i, c) = acc;
    }
  return Z;
}

inline Tensor2 pca_inverse_transform(const PcaModel& m, const Tensor2& Z) {
  if (Z.cols != m.k()) fail(ErrorKind::shape, "PCA scores width mismatch");
  Tensor2 X(Z.rows, m.mean.size());
  for (std::size_t i = 0; i < Z.rows; ++i)
    for (std::size_t j = 0; j < X.cols; ++j) {
      double acc = m.mean[j];
      for (std::size_t c = 0; c < m.k(); ++c) acc += Z(i, c) * m.components(c, j);
      X(i, j) = acc;
    }
  return X;
}

// ---------------------------------------------------------------- k-means

struct KMeansModel {
  std::size_t k = 0;
  Tensor2 centroids;  // k x d
  double inertia = 0.0;
  std::vector<std::size_t> assignments;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
};

namespace detail {
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}
}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iter` is reached.
inline KMeansModel kmeans(const Tensor2& X, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300) {
  const std::size_t n = X.rows, d = X.cols;
  if (k < 1) fail(ErrorKind::domain, "k must be >= 1");
  if (n < k) fail(ErrorKind::domain, "k-means with more clusters (" + std::to_string(k) + ") than points (" + std::to_string(n) + ")");
  Rng rng(seed);
  KMeansModel m;
  m.k = k;
  m.centroids = Tensor2(k, d);
  std::vector<std::size_t> chosen{rng.below(n)};
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], detail::sq_dist(X.row(i), X.row(chosen.back())));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // all remaining points coincide with a centroid; take the first unused
      std::vector<bool> used(n, false);
      for (auto c : chosen) used[c] = true;
      while (used[pick]) ++pick;
    } else {
      double target = rng.uniform() * total;
      for (pick = 0; pick < n; ++pick) {
        target -= dist[pick];
        if (target < 0.0 && dist[pick] > 0.0) break;
      }
      if (pick == n) {
        pick = n - 1;
        while (dist[pick] <= 0.0) --pick;
      }
    }
    chosen.push_back(pick);
  }
  for (std::size_t c = 0; c < k; ++c) std::copy(X.row(chosen[c]).begin(), X.row(chosen[c]).end(), m.centroids.row(c).begin());

  m.assignments.assign(n, k);  // sentinel: nothing assigned yet
  for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iter); ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = detail::sq_dist(X.row(i), m.centroids.row(0));
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = detail::sq_dist(X.row(i), m.centroids.row(c));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (m.assignments[i] != best) changed = true;
      m.assignments[i] = best;
      inertia += best_d;
    }
    m.inertia_history.push_back(inertia);
    m.inertia = inertia;
    m.iterations = iter + 1;
    if (!changed) break;
    Tensor2 sums(k, d);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[m.assignments[i]];
      auto row = sums.row(m.assignments[i]);
      const auto x = X.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += x[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < d; ++j) m.centroids(c, j) = sums(c, j) / static_cast<double>(sizes[c]);
    }
  }
  return m;
}

// ---------------------------------------------------------------- random forest

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  int label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].label;
  }
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 12;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;  // 0 = floor(sqrt(d)), at least 1
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::size_t n_features = 0;
  std::vector<std::vector<std::size_t>> bootstrap_rows;  // per tree, rows it was fitted on
};

namespace detail {

inline int majority(const std::map<int, std::size_t>& counts) {
  int best = counts.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [label, n] : counts)  // ascending labels, so ties keep the smaller
    if (n > best_n) {
      best = label;
      best_n = n;
    }
  return best;
}

inline double gini(const std::map<int, std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 1.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s -= p * p;
  }
  return s;
}

struct TreeBuilder {
  const Tensor2& X;
  const std::vector<int>& y;
  const ForestParams& params;
  std::size_t max_features;
  Rng& rng;
  DecisionTree tree;

  int build(std::vector<std::size_t> rows, std::size_t depth) {
    std::map<int, std::size_t> counts;
    for (auto r : rows) ++counts[y[r]];
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, majority(counts)});
    const double parent_gini = gini(counts, rows.size());
    if (counts.size() < 2 || rows.size() < 2 * params.min_leaf || (params.max_depth && depth >= params.max_depth)) {
      return node_index;
    }
    std::vector<std::size_t> features(X.cols);
    std::iota(features.begin(), features.end(), std::size_t{0});
    rng.shuffle(features);
    features.resize(std::min(max_features, X.cols));
    std::sort(features.begin(), features.end());

    double best_score = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = rows;
    for (auto f : features) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
      std::map<int, std::size_t> left;
      std::map<int, std::size_t> right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        ++left[y[sorted[i]]];
        if (--right[y[sorted[i]]] == 0) right.erase(y[sorted[i]]);
        const double a = X(sorted[i], f), b = X(sorted[i + 1], f);
        if (a == b) continue;
        const std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (nl < params.min_leaf || nr < params.min_leaf) continue;
        const double score = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                             static_cast<double>(sorted.size());
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (a + b);
        }
      }
    }
    // splits with zero gain are still taken: XOR-like data needs them
    if (best_feature < 0 || best_score > parent_gini) return node_index;
    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) (X(r, best_feature) <= best_threshold ? lrows : rrows).push_back(r);
    const int l = build(std::move(lrows), depth + 1);
    const int r = build(std::move(rrows), depth + 1);
    tree.nodes[node_index].feature = best_feature;
    tree.nodes[node_index].threshold = best_threshold;
    tree.nodes[node_index].left = l;
    tree.nodes[node_index].right = r;
    return node_index;
  }
};

}  // namespace detail

/// Bootstrap-sampled CART trees on Gini impurity with per-node feature
/// subsampling. Labels are arbitrary ints.
inline RandomForest forest_fit(const Tensor2& X, const std::vector<int>& labels, const ForestParams& params = {}) {
  if (X.rows != labels.size()) fail(ErrorKind::shape, "forest_fit: rows and labels differ in length");
  if (X.rows == 0 || X.cols == 0) fail(ErrorKind::domain, "forest_fit on empty data");
  std::map<int, std::size_t> classes;
  for (int l : labels) ++classes[l];
  if (classes.size() < 2) fail(ErrorKind::degenerate_model, "forest_fit needs at least two classes");
  if (params.n_trees == 0) fail(ErrorKind::domain, "n_trees must be >= 1");

  RandomForest forest;
  forest.params = params;
  forest.n_features = X.cols;
  const std::size_t max_features = params.max_features
                                       ? params.max_features
                                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(X.cols))));
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    // per-tree seed so trees are independent of fitting order
    Rng rng(params.seed * 0x9e3779b97f4a7c15ull + t + 1);
    std::vector<std::size_t> rows(X.rows);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(X.rows);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::TreeBuilder builder{X, labels, params, max_features, rng, {}};
    builder.build(rows, 0);
    forest.trees.push_back(std::move(builder.tree));
    forest.bootstrap_rows.push_back(std::move(rows));
  }
  return forest;
}

inline int forest_predict(const RandomForest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features) fail(ErrorKind::shape, "forest_predict input width mismatch");
  std::map<int, std::size_t> votes;
  for (const auto& t : forest.trees) ++votes[t.predict(x)];
  return detail::majority(votes);
}

}  // namespace thermofuse
