#include "spcit/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spcit::forest {

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const double> y, const TreeParams& params,
              SplitMix64& rng)
      : X_(X), y_(y), params_(params), rng_(rng) {
    const std::size_t d = X.cols();
    mtry_ = params.mtry == 0 ? (d + 2) / 3 : params.mtry;
    if (mtry_ < 1 || mtry_ > d) {
      throw ValidationError("fit_tree: mtry must lie in [1, " + std::to_string(d) + "]");
    }
    if (params.min_leaf_size < 1) throw ValidationError("fit_tree: min_leaf_size must be >= 1");
    feature_pool_.resize(d);
  }

  std::vector<TreeNode> build(std::vector<std::uint32_t> sample) {
    grow(std::move(sample), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::uint32_t> sample, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    double sum = 0.0;
    for (auto i : sample) sum += y_[i];
    const double mean = sum / static_cast<double>(sample.size());

    const SplitCandidate split = depth < params_.max_depth ? best_split(sample) : SplitCandidate{};
    if (split.feature < 0) {
      TreeNode& leaf = nodes_[static_cast<std::size_t>(id)];
      leaf.value = mean;
      leaf.rows = std::move(sample);
      return id;
    }

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto i : sample) {
      (X_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);
    }
    sample.clear();
    sample.shrink_to_fit();

    const std::int32_t l = grow(std::move(left), depth + 1);
    const std::int32_t r = grow(std::move(right), depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.value = mean;
    node.left = l;
    node.right = r;
    return id;
  }

  // Partial Fisher-Yates over the feature indices, then ascending order so
  // that ties resolve to the lowest feature index.
  std::vector<std::size_t> draw_features() {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    const std::size_t d = feature_pool_.size();
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t j = k + rng_.below(d - k);
      std::swap(feature_pool_[k], feature_pool_[j]);
    }
    std::vector<std::size_t> chosen(feature_pool_.begin(),
                                    feature_pool_.begin() + static_cast<long>(mtry_));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  SplitCandidate best_split(const std::vector<std::uint32_t>& sample) {
    const std::size_t n = sample.size();
    const std::size_t min_leaf = params_.min_leaf_size;
    if (n < 2 * min_leaf) return {};

    double sum = 0.0;
    double sum_sq = 0.0;
    for (auto i : sample) {
      sum += y_[i];
      sum_sq += y_[i] * y_[i];
    }
    const double parent_sse = sum_sq - sum * sum / static_cast<double>(n);
    if (!(parent_sse > 1e-12 * (1.0 + std::abs(sum_sq)))) return {};

    const auto features = draw_features();

    SplitCandidate best;
    best.gain = 1e-12 * (1.0 + parent_sse);
    scratch_.resize(n);
    for (std::size_t f : features) {
      for (std::size_t k = 0; k < n; ++k) scratch_[k] = {X_(sample[k], f), y_[sample[k]]};
      std::stable_sort(scratch_.begin(), scratch_.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      if (scratch_.front().first == scratch_.back().first) continue;

      double left_sum = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        left_sum += scratch_[k - 1].second;
        const double lo = scratch_[k - 1].first;
        const double hi = scratch_[k].first;
        if (k < min_leaf || n - k < min_leaf || !(lo < hi)) continue;
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        const double right_sum = sum - left_sum;
        // SSE reduction = left_sum^2/nl + right_sum^2/nr - sum^2/n
        const double gain =
            left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / static_cast<double>(n);
        if (gain > best.gain) {
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best = {static_cast<int>(f), mid, gain};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const double> y_;
  const TreeParams& params_;
  SplitMix64& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::pair<double, double>> scratch_;
  std::vector<TreeNode> nodes_;
};

void check_training_data(const Matrix& X, std::span<const double> y) {
  if (X.rows() == 0 || y.empty()) throw ValidationError("fit_tree: empty training data");
  if (X.rows() != y.size()) {
    throw StructuralError("fit_tree: " + std::to_string(X.rows()) + " rows but " +
                          std::to_string(y.size()) + " targets");
  }
  if (X.rows() > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("fit_tree: too many rows");
  }
}

}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, std::size_t n_features)
    : nodes_(std::move(nodes)), n_features_(n_features) {
  if (nodes_.empty()) throw StructuralError("RegressionTree: no nodes");
}

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw ValidationError("RegressionTree: input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_features_));
  }
  std::size_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const TreeNode& n = nodes_[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return id;
}

std::size_t RegressionTree::leaf_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

RegressionTree fit_tree_on_sample(const Matrix& X, std::span<const double> y,
                                  std::span<const std::uint32_t> sample, const TreeParams& params,
                                  SplitMix64& rng) {
  check_training_data(X, y);
  if (sample.empty()) throw ValidationError("fit_tree: empty sample");
  TreeBuilder builder(X, y, params, rng);
  return RegressionTree(builder.build({sample.begin(), sample.end()}), X.cols());
}

RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& params,
                        SplitMix64& rng) {
  check_training_data(X, y);
  std::vector<std::uint32_t> all(X.rows());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  return fit_tree_on_sample(X, y, all, params, rng);
}

ForestEnsemble fit_forest(const Matrix& X, std::span<const double> y,
                          const ForestOptions& options, std::uint64_t seed) {
  check_training_data(X, y);
  if (options.n_trees < 1) throw ValidationError("fit_forest: n_trees must be >= 1");
  const std::size_t n = X.rows();

  ForestEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.trees.reserve(options.n_trees);
  ensemble.bootstrap_counts.reserve(options.n_trees);
  std::vector<std::uint32_t> sample;
  for (std::size_t b = 0; b < options.n_trees; ++b) {
    SplitMix64 rng(derive_seed(seed, b));
    std::vector<std::uint16_t> counts(n, options.bootstrap ? 0 : 1);
    if (options.bootstrap) {
      for (std::size_t k = 0; k < n; ++k) ++counts[rng.below(n)];
    }
    sample.clear();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint16_t c = 0; c < counts[i]; ++c) sample.push_back(static_cast<std::uint32_t>(i));
    }
    ensemble.trees.push_back(fit_tree_on_sample(X, y, sample, options.tree, rng));
    ensemble.bootstrap_counts.push_back(std::move(counts));
  }
  return ensemble;
}

double loo_point_predict(const ForestEnsemble& ensemble, const Matrix& X_train, std::size_t t) {
  if (t >= ensemble.n_train() || t >= X_train.rows()) {
    throw ValidationError("loo_point_predict: row " + std::to_string(t) + " outside training set");
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t b = 0; b < ensemble.trees.size(); ++b) {
    if (ensemble.in_bag(b, t)) continue;
    sum += ensemble.trees[b].predict(X_train.row(t));
    ++used;
  }
  if (used == 0) return predict_test(ensemble, X_train.row(t));
  return sum / static_cast<double>(used);
}

double predict_test(const ForestEnsemble& ensemble, std::span<const double> x) {
  if (ensemble.trees.empty()) throw ValidationError("predict_test: empty ensemble");
  double sum = 0.0;
  for (const auto& tree : ensemble.trees) sum += tree.predict(x);
  return sum / static_cast<double>(ensemble.trees.size());
}

ForestEnsemble fit_qrf(const Matrix& windowed_features, std::span<const double> target_residuals,
                       const ForestOptions& options, std::uint64_t seed) {
  if (windowed_features.rows() < options.tree.min_leaf_size) {
    throw ValidationError("fit_qrf: fewer rows than min_leaf_size");
  }
  return fit_forest(windowed_features, target_residuals, options, seed);
}

std::vector<double> qrf_weights(const ForestEnsemble& ensemble, std::span<const double> z) {
  std::vector<double> weights(ensemble.n_train(), 0.0);
  for (const auto& tree : ensemble.trees) {
    const auto& rows = tree.nodes()[tree.leaf_index(z)].rows;
    const auto size = static_cast<double>(rows.size());
    // rows are ascending, so multiplicities are runs
    for (std::size_t k = 0; k < rows.size();) {
      std::size_t run = 1;
      while (k + run < rows.size() && rows[k + run] == rows[k]) ++run;
      weights[rows[k]] += static_cast<double>(run) / size;
      k += run;
    }
  }
  const auto n_trees = static_cast<double>(ensemble.trees.size());
  for (double& w : weights) w /= n_trees;
  return weights;
}

std::vector<double> qrf_quantiles(const ForestEnsemble& ensemble, std::span<const double> z,
                                  std::span<const double> levels,
                                  std::span<const double> y_train) {
  if (y_train.size() != ensemble.n_train()) {
    throw StructuralError("qrf_quantile: y_train length does not match the ensemble");
  }
  for (double p : levels) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("qrf_quantile: level outside (0, 1)");
  }
  const auto weights = qrf_weights(ensemble, z);
  return weighted_quantiles(y_train, weights, levels);
}

double qrf_quantile(const ForestEnsemble& ensemble, std::span<const double> z, double p,
                    std::span<const double> y_train) {
  return qrf_quantiles(ensemble, z, std::span<const double>(&p, 1), y_train).front();
}

}  // namespace spcit::forest
