#include "spcit/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spcit {

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw StructuralError("Matrix: data size " + std::to_string(data_.size()) + " != " +
                          std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

void Matrix::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

ObservationSeries::ObservationSeries(Matrix features, std::vector<double> outcomes,
                                     std::vector<std::string> feature_names, std::int64_t t0)
    : features_(std::move(features)),
      outcomes_(std::move(outcomes)),
      feature_names_(std::move(feature_names)),
      t0_(t0) {
  if (outcomes_.empty()) throw ValidationError("ObservationSeries: empty series");
  if (features_.rows() != outcomes_.size()) {
    throw StructuralError("ObservationSeries: " + std::to_string(features_.rows()) +
                          " feature rows but " + std::to_string(outcomes_.size()) + " outcomes");
  }
  if (features_.cols() == 0) throw ValidationError("ObservationSeries: feature dimension is 0");
  if (!feature_names_.empty() && feature_names_.size() != features_.cols()) {
    throw StructuralError("ObservationSeries: feature_names size does not match dimension");
  }
  if (!all_finite(features_.flat())) {
    throw ValidationError("ObservationSeries: non-finite feature value");
  }
  if (!all_finite(outcomes_)) throw ValidationError("ObservationSeries: non-finite outcome");
}

ObservationSeries ObservationSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) throw ValidationError("ObservationSeries::slice: bad range");
  Matrix f(end - begin, dim());
  for (std::size_t r = begin; r < end; ++r) {
    std::copy(features_.row(r).begin(), features_.row(r).end(), f.row(r - begin).begin());
  }
  return ObservationSeries(std::move(f),
                           std::vector<double>(outcomes_.begin() + static_cast<long>(begin),
                                               outcomes_.begin() + static_cast<long>(end)),
                           feature_names_, time_of(begin));
}

SignificanceLevel::SignificanceLevel(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("significance level must lie in (0, 1), got " + std::to_string(alpha));
  }
}

PredictionInterval::PredictionInterval(std::int64_t t_, double lower_, double upper_,
                                       SignificanceLevel alpha_)
    : t(t_), lower(lower_), upper(upper_), alpha(alpha_) {
  if (std::isnan(lower) || std::isnan(upper)) throw ValidationError("PredictionInterval: NaN bound");
  if (lower > upper) throw ValidationError("PredictionInterval: lower > upper");
}

bool PredictionInterval::is_finite() const noexcept {
  return std::isfinite(lower) && std::isfinite(upper);
}

QuantileGrid::QuantileGrid(std::vector<double> levels, std::vector<double> values)
    : levels_(std::move(levels)), values_(std::move(values)) {
  if (levels_.empty()) throw ValidationError("QuantileGrid: no levels");
  if (levels_.size() != values_.size()) {
    throw StructuralError("QuantileGrid: levels and values differ in length");
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0 && levels_[i] < 1.0)) {
      throw ValidationError("QuantileGrid: level outside (0, 1)");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw ValidationError("QuantileGrid: levels not strictly increasing");
    }
  }
  if (!all_finite(values_)) throw ValidationError("QuantileGrid: non-finite value");
}

double QuantileGrid::at(double level) const {
  const auto it = std::lower_bound(levels_.begin(), levels_.end(), level - 1e-12);
  if (it == levels_.end() || std::abs(*it - level) > 1e-12) {
    throw ValidationError("QuantileGrid: level " + std::to_string(level) + " not in grid");
  }
  return values_[static_cast<std::size_t>(it - levels_.begin())];
}

ResidualSeries compute_residuals(const ObservationSeries& series,
                                 std::span<const double> point_predictions) {
  if (point_predictions.size() != series.size()) {
    throw StructuralError("compute_residuals: " + std::to_string(point_predictions.size()) +
                          " predictions for " + std::to_string(series.size()) + " outcomes");
  }
  if (!all_finite(point_predictions)) {
    throw ValidationError("compute_residuals: non-finite point prediction");
  }
  std::vector<double> preds(point_predictions.begin(), point_predictions.end());
  std::vector<double> res(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) res[t] = series.outcome(t) - preds[t];
  return ResidualSeries(std::move(preds), std::move(res));
}

bool interval_contains(const PredictionInterval& interval, double y) noexcept {
  return interval.lower <= y && y <= interval.upper;
}

QuantileGrid rearrange_monotone(const QuantileGrid& grid) {
  std::vector<double> values(grid.values().begin(), grid.values().end());
  std::sort(values.begin(), values.end());
  return QuantileGrid(std::vector<double>(grid.levels().begin(), grid.levels().end()),
                      std::move(values));
}

std::vector<double> weighted_quantiles(std::span<const double> values,
                                       std::span<const double> weights,
                                       std::span<const double> levels) {
  if (values.empty()) throw ValidationError("weighted_quantile: no values");
  if (values.size() != weights.size()) {
    throw StructuralError("weighted_quantile: values and weights differ in length");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("weighted_quantile: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weighted_quantile: zero total weight");

  std::vector<double> cum(order.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    acc += weights[order[k]] / total;
    cum[k] = acc;
  }
  // Rounding can leave the final cumulative weight a hair below 1; the top
  // level then maps to the largest value that carries weight.
  std::size_t last_weighted = order.size() - 1;
  while (weights[order[last_weighted]] == 0.0) --last_weighted;

  std::vector<double> out;
  out.reserve(levels.size());
  for (double p : levels) {
    const auto it = std::lower_bound(cum.begin(), cum.end(), p);
    const std::size_t k =
        it == cum.end() ? last_weighted : static_cast<std::size_t>(it - cum.begin());
    out.push_back(values[order[k]]);
  }
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p) {
  return weighted_quantiles(values, weights, std::span<const double>(&p, 1)).front();
}

}  // namespace spcit
