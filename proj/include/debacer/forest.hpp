#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debacer/linear.hpp"

namespace debacer::models {

enum class Criterion { Gini, Entropy };

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& s);

// Impurity of weighted class counts; entropy is in bits.
double gini(double neg, double pos);
double entropy(double neg, double pos);

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double weight_neg = 0.0;  // weighted class totals of the training samples here
  double weight_pos = 0.0;
  std::size_t samples = 0;  // distinct training samples

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const SparseVector& x) const;
  // Weighted positive fraction of the leaf reached by x.
  double predict_proba(const SparseVector& x) const;
  bool operator==(const DecisionTree&) const = default;
};

struct ForestParams {
  std::size_t n_estimators = 100;
  Criterion criterion = Criterion::Gini;
  ClassWeight class_weight = ClassWeight::None;
  std::optional<std::size_t> max_features;  // default ceil(sqrt(d))
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::size_t dim = 0;

  // Mean over trees of the leaf's weighted positive fraction.
  double predict_proba(const SparseVector& x) const;
  bool operator==(const Forest&) const = default;
};

// Each tree sees a bootstrap sample drawn from its own seed stream, so trees
// can be built in any order (or in parallel) with identical results.
Forest train_random_forest(const SparseMatrix& x, std::span<const int> y, const ForestParams& params);

// Grows one tree on explicit per-sample weights (zero weight = not in sample).
DecisionTree grow_tree(const SparseMatrix& x, std::span<const int> y, std::span<const double> weights,
                       Criterion criterion, std::size_t max_features, std::size_t min_samples_split,
                       std::uint64_t seed);

}  // namespace debacer::models
