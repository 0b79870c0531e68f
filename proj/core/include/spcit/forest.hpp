#pragma once

// CART regression trees, bagged forests with leave-one-out aggregation, and
// Meinshausen quantile regression forests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spcit/core.hpp"
#include "spcit/rng.hpp"

namespace spcit::forest {

struct TreeParams {
  int max_depth = 20;
  std::size_t min_leaf_size = 5;
  /// Candidate features per split; 0 means ceil(d / 3).
  std::size_t mtry = 0;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Training rows (with bootstrap multiplicity) that reached this leaf.
  std::vector<std::uint32_t> rows;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, std::size_t n_features);

  /// Index of the leaf `x` lands in. Routing: x[feature] <= threshold goes left.
  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes_[leaf_index(x)].value; }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t leaf_count() const noexcept;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

/// Fits a tree on all rows of (X, y).
RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& params,
                        SplitMix64& rng);

/// Fits a tree on a multiset of rows (bootstrap sample, indices may repeat).
RegressionTree fit_tree_on_sample(const Matrix& X, std::span<const double> y,
                                  std::span<const std::uint32_t> sample, const TreeParams& params,
                                  SplitMix64& rng);

struct ForestOptions {
  std::size_t n_trees = 25;
  TreeParams tree;
  /// When false every tree sees every row once (masks all true).
  bool bootstrap = true;
};

struct ForestEnsemble {
  std::vector<RegressionTree> trees;
  /// bootstrap_counts[b][i]: how often row i was drawn for tree b.
  std::vector<std::vector<std::uint16_t>> bootstrap_counts;
  std::uint64_t seed = 0;

  std::size_t n_train() const noexcept {
    return bootstrap_counts.empty() ? 0 : bootstrap_counts.front().size();
  }
  /// True when row i is in tree b's bootstrap sample.
  bool in_bag(std::size_t b, std::size_t i) const noexcept { return bootstrap_counts[b][i] > 0; }
};

/// Bootstrap-bagged forest. Tree b uses its own stream derive_seed(seed, b),
/// drawing the n bootstrap indices first and then the split candidates.
ForestEnsemble fit_forest(const Matrix& X, std::span<const double> y,
                          const ForestOptions& options, std::uint64_t seed);

/// Mean prediction of the trees that did not see row t. Falls back to the
/// full ensemble when every tree saw it.
double loo_point_predict(const ForestEnsemble& ensemble, const Matrix& X_train, std::size_t t);

/// Mean over all trees.
double predict_test(const ForestEnsemble& ensemble, std::span<const double> x);

/// Quantile regression forest on windowed features. Same construction as
/// fit_forest; leaves keep their row indices for weighted quantile queries.
ForestEnsemble fit_qrf(const Matrix& windowed_features, std::span<const double> target_residuals,
                       const ForestOptions& options, std::uint64_t seed);

/// Meinshausen weights of the training rows for query z: the mean over trees
/// of (multiplicity of row i in z's leaf) / (leaf sample size).
std::vector<double> qrf_weights(const ForestEnsemble& ensemble, std::span<const double> z);

/// Weighted conditional quantile at level p ("smallest y with cumulative
/// weight >= p").
double qrf_quantile(const ForestEnsemble& ensemble, std::span<const double> z, double p,
                    std::span<const double> y_train);

/// Same as qrf_quantile for several levels sharing one weight computation.
std::vector<double> qrf_quantiles(const ForestEnsemble& ensemble, std::span<const double> z,
                                  std::span<const double> levels,
                                  std::span<const double> y_train);

/// JSON dump: {"format":"spcit-forest","version":1,"seed":..,"n_features":..,
/// "trees":[{"nodes":[{"f","thr","l","r","v","rows"}...]}], "bootstrap_counts":[[..]]}.
void save_forest(const ForestEnsemble& ensemble, const std::filesystem::path& path);
ForestEnsemble load_forest(const std::filesystem::path& path);

}  // namespace spcit::forest
