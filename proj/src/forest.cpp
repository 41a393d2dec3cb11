#include "debacer/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "debacer/errors.hpp"
#include "debacer/parallel.hpp"
#include "debacer/rng.hpp"

namespace debacer::models {

std::string to_string(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return Criterion::Gini;
  if (s == "entropy") return Criterion::Entropy;
  throw ConfigError("InvalidConfig", "criterion '" + s + "' (expected gini or entropy)");
}

double gini(double neg, double pos) {
  const double w = neg + pos;
  if (w <= 0) return 0.0;
  const double p = pos / w, q = neg / w;
  return 1.0 - p * p - q * q;
}

double entropy(double neg, double pos) {
  const double w = neg + pos;
  if (w <= 0) return 0.0;
  double h = 0.0;
  for (double c : {neg, pos})
    if (c > 0) h -= (c / w) * std::log2(c / w);
  return h;
}

namespace {

double feature_value(const SparseVector& x, std::uint32_t f) {
  auto it = std::lower_bound(x.entries.begin(), x.entries.end(), f,
                             [](const auto& e, std::uint32_t k) { return e.first < k; });
  return it != x.entries.end() && it->first == f ? it->second : 0.0;
}

struct Item {
  double value;
  double neg;
  double pos;
  std::size_t sample;
};

struct Split {
  bool found = false;
  double gain = -std::numeric_limits<double>::infinity();
  std::uint32_t feature = 0;
  double threshold = 0.0;
};

}  // namespace

const TreeNode& DecisionTree::leaf_for(const SparseVector& x) const {
  const TreeNode* n = &nodes.at(0);
  while (!n->is_leaf()) {
    const double v = feature_value(x, static_cast<std::uint32_t>(n->feature));
    n = &nodes[static_cast<std::size_t>(v <= n->threshold ? n->left : n->right)];
  }
  return *n;
}

double DecisionTree::predict_proba(const SparseVector& x) const {
  const TreeNode& leaf = leaf_for(x);
  const double w = leaf.weight_neg + leaf.weight_pos;
  return w > 0 ? leaf.weight_pos / w : 0.0;
}

double Forest::predict_proba(const SparseVector& x) const {
  if (x.dim != dim)
    throw DataError("DimensionMismatch", "input has dimension " + std::to_string(x.dim) +
                                             ", forest expects " + std::to_string(dim));
  if (trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trees) s += t.predict_proba(x);
  return s / static_cast<double>(trees.size());
}

DecisionTree grow_tree(const SparseMatrix& x, std::span<const int> y, std::span<const double> weights,
                       Criterion criterion, std::size_t max_features, std::size_t min_samples_split,
                       std::uint64_t seed) {
  const std::size_t d = x.cols;
  auto impurity = criterion == Criterion::Gini ? gini : entropy;
  Rng rng(seed, 0x7e3);
  std::vector<std::uint32_t> feats(d);
  std::iota(feats.begin(), feats.end(), 0u);

  DecisionTree tree;
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> samples;
  };
  std::vector<Pending> stack;
  {
    std::vector<std::size_t> root;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (weights[i] > 0) root.push_back(i);
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(root)});
  }

  std::vector<Item> items;
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    double neg = 0.0, pos = 0.0;
    for (std::size_t s : cur.samples) (y[s] ? pos : neg) += weights[s];
    {
      TreeNode& node = tree.nodes[cur.node];
      node.weight_neg = neg;
      node.weight_pos = pos;
      node.samples = cur.samples.size();
    }
    if (cur.samples.size() < min_samples_split || neg == 0.0 || pos == 0.0) continue;

    const double total = neg + pos;
    const double parent = total * impurity(neg, pos);
    const double eps = 1e-12 * std::max(1.0, parent);
    Split best;
    std::size_t seen = 0;
    for (std::size_t k = 0; k < d && seen < max_features; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(d - k));
      std::swap(feats[k], feats[j]);
      const std::uint32_t f = feats[k];
      items.clear();
      for (std::size_t s : cur.samples) {
        const double w = weights[s];
        items.push_back({feature_value(x.rows[s], f), y[s] ? 0.0 : w, y[s] ? w : 0.0, s});
      }
      std::sort(items.begin(), items.end(),
                [](const Item& a, const Item& b) { return a.value < b.value; });
      if (items.front().value == items.back().value) continue;  // constant here
      ++seen;
      double ln = 0.0, lp = 0.0;
      for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        ln += items[i].neg;
        lp += items[i].pos;
        if (items[i].value == items[i + 1].value) continue;
        const double rn = neg - ln, rp = pos - lp;
        const double gain = parent - (ln + lp) * impurity(ln, lp) - (rn + rp) * impurity(rn, rp);
        double thr = 0.5 * (items[i].value + items[i + 1].value);
        if (!(thr < items[i + 1].value)) thr = items[i].value;
        const bool better =
            !best.found || gain > best.gain + eps ||
            (gain >= best.gain - eps &&
             (f < best.feature || (f == best.feature && thr < best.threshold)));
        if (better) {
          best.found = true;
          best.gain = gain;
          best.feature = f;
          best.threshold = thr;
        }
      }
    }
    if (!best.found) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t s : cur.samples)
      (feature_value(x.rows[s], best.feature) <= best.threshold ? left : right).push_back(s);
    const std::size_t li = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[cur.node];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.left = static_cast<int>(li);
    node.right = static_cast<int>(li + 1);
    // Right pushed first so the left subtree is numbered depth-first.
    stack.push_back({li + 1, std::move(right)});
    stack.push_back({li, std::move(left)});
  }
  return tree;
}

Forest train_random_forest(const SparseMatrix& x, std::span<const int> y, const ForestParams& p) {
  if (x.n_rows() != y.size())
    throw DataError("DimensionMismatch", "design matrix rows differ from label count");
  if (y.empty()) throw DataError("EmptyCorpus", "no training examples");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError("InvalidLabel", "labels must be 0 or 1");
  if (p.n_estimators == 0) throw ConfigError("InvalidConfig", "n_estimators must be positive");
  if (p.min_samples_split < 2) throw ConfigError("InvalidConfig", "min_samples_split must be >= 2");
  const std::size_t d = x.cols;
  std::size_t max_features =
      p.max_features ? *p.max_features
                     : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  if (max_features == 0 && d > 0) throw ConfigError("InvalidConfig", "max_features must be positive");
  max_features = std::min(max_features, d);

  const std::size_t n = y.size();
  double full_c[2] = {0, 0};
  for (int v : y) full_c[v] += 1.0;

  Forest forest;
  forest.params = p;
  forest.dim = d;
  forest.trees.resize(p.n_estimators);
  parallel_for(p.n_estimators, [&](std::size_t t) {
    Rng rng(p.seed, 0x1000 + t);
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) w[static_cast<std::size_t>(rng.below(n))] += 1.0;
    if (p.class_weight != ClassWeight::None) {
      double c[2] = {full_c[0], full_c[1]};
      double m = static_cast<double>(n);
      if (p.class_weight == ClassWeight::BalancedSubsample) {
        c[0] = c[1] = 0.0;
        for (std::size_t i = 0; i < n; ++i) c[y[i]] += w[i];
      }
      for (std::size_t i = 0; i < n; ++i)
        if (w[i] > 0) w[i] *= m / (2.0 * c[y[i]]);
    }
    forest.trees[t] = grow_tree(x, y, w, p.criterion, max_features, p.min_samples_split,
                                mix64(p.seed ^ (0x9e37 + t)));
  });
  return forest;
}

}  // namespace debacer::models
