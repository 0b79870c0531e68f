#pragma once

// Shared data model: series, residuals, intervals and quantile grids.
//
// Every type validates at construction and is immutable afterwards, so the
// rest of the library never has to re-check finiteness or shapes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spcit {

/// Bad values: NaN/Inf, out-of-range parameters, too-short inputs.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape or length mismatch between inputs that must line up.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite value produced during a computation (e.g. diverging training).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  void fill(double v) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Time-indexed pairs (X_t, Y_t). Row r corresponds to time label t0 + r.
class ObservationSeries {
 public:
  ObservationSeries(Matrix features, std::vector<double> outcomes,
                    std::vector<std::string> feature_names = {}, std::int64_t t0 = 1);

  std::size_t size() const noexcept { return outcomes_.size(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  std::int64_t t0() const noexcept { return t0_; }
  std::int64_t time_of(std::size_t row) const noexcept {
    return t0_ + static_cast<std::int64_t>(row);
  }

  const Matrix& features() const noexcept { return features_; }
  std::span<const double> feature(std::size_t row) const noexcept { return features_.row(row); }
  std::span<const double> outcomes() const noexcept { return outcomes_; }
  double outcome(std::size_t row) const noexcept { return outcomes_[row]; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  /// Contiguous rows [begin, end) as a new series, keeping time labels.
  ObservationSeries slice(std::size_t begin, std::size_t end) const;

 private:
  Matrix features_;
  std::vector<double> outcomes_;
  std::vector<std::string> feature_names_;
  std::int64_t t0_;
};

/// Point predictions and residuals aligned with an ObservationSeries.
class ResidualSeries {
 public:
  std::size_t size() const noexcept { return residuals_.size(); }
  std::span<const double> point_predictions() const noexcept { return predictions_; }
  std::span<const double> residuals() const noexcept { return residuals_; }
  double prediction(std::size_t row) const noexcept { return predictions_[row]; }
  double residual(std::size_t row) const noexcept { return residuals_[row]; }

 private:
  friend ResidualSeries compute_residuals(const ObservationSeries&, std::span<const double>);
  ResidualSeries(std::vector<double> predictions, std::vector<double> residuals)
      : predictions_(std::move(predictions)), residuals_(std::move(residuals)) {}

  std::vector<double> predictions_;
  std::vector<double> residuals_;
};

class SignificanceLevel {
 public:
  explicit SignificanceLevel(double alpha);
  double value() const noexcept { return alpha_; }
  friend bool operator==(SignificanceLevel, SignificanceLevel) = default;

 private:
  double alpha_;
};

/// Closed interval [lower, upper] for time t. Bounds may be infinite (an
/// uninformative interval) but never NaN.
struct PredictionInterval {
  PredictionInterval(std::int64_t t, double lower, double upper, SignificanceLevel alpha);

  std::int64_t t;
  double lower;
  double upper;
  SignificanceLevel alpha;

  bool is_finite() const noexcept;
  double width() const noexcept { return upper - lower; }
};

class QuantileGrid {
 public:
  QuantileGrid(std::vector<double> levels, std::vector<double> values);

  std::size_t size() const noexcept { return levels_.size(); }
  std::span<const double> levels() const noexcept { return levels_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Value at a level present in the grid (matched to 1e-12).
  double at(double level) const;

 private:
  std::vector<double> levels_;
  std::vector<double> values_;
};

ResidualSeries compute_residuals(const ObservationSeries& series,
                                 std::span<const double> point_predictions);

bool interval_contains(const PredictionInterval& interval, double y) noexcept;

/// Repairs quantile crossing by sorting the values; levels are untouched.
QuantileGrid rearrange_monotone(const QuantileGrid& grid);

/// Left-continuous weighted quantile: the smallest value whose cumulative
/// normalized weight (values visited in ascending order, ties by position)
/// reaches p. Weights must be non-negative with a positive sum.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

/// weighted_quantile at several levels, sorting once.
std::vector<double> weighted_quantiles(std::span<const double> values,
                                       std::span<const double> weights,
                                       std::span<const double> levels);

}  // namespace spcit
