#pragma once

// Interval constructors on top of residual quantile estimators: SPCI with a
// width-minimizing beta search (QRF or transformer estimator), EnbPI, NexCP,
// and multi-step generative rollout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "spcit/core.hpp"
#include "spcit/forest.hpp"
#include "spcit/tdqr.hpp"

namespace spcit::conformal {

/// Equally spaced beta values on [0, alpha] and the quantile levels they ask
/// for. Levels 0 and 1 are not estimable by a pinball-trained model, so the
/// endpoint levels are pulled in to alpha * edge_fraction from the boundary.
struct BetaGrid {
  double alpha = 0.1;
  std::vector<double> betas;
  std::vector<double> lower_levels;  // level used for each beta
  std::vector<double> upper_levels;  // level used for 1 - alpha + beta

  static BetaGrid make(SignificanceLevel alpha, std::size_t points = 11,
                       double edge_fraction = 0.05);

  /// Sorted union of lower levels, 0.5 and upper levels (23 for the default).
  std::vector<double> all_levels() const;
};

/// Quantile levels an estimator must produce for SPCI at this alpha.
std::vector<double> spci_levels(SignificanceLevel alpha);

struct BetaChoice {
  std::size_t index = 0;
  double beta = 0.0;
  double lower = 0.0;  // Q(beta)
  double upper = 0.0;  // Q(1 - alpha + beta)
  double width() const noexcept { return upper - lower; }
};

/// Grid argmin of Q(1 - alpha + beta) - Q(beta); ties go to the smaller beta.
BetaChoice beta_hat(const QuantileGrid& grid, const BetaGrid& betas);

/// A model of the conditional quantiles of the next residual given a window
/// of the w most recent rows Z = [X, residual] (w x (d + 1), oldest first).
class QuantileEstimator {
 public:
  virtual ~QuantileEstimator() = default;
  virtual std::size_t window() const = 0;
  virtual QuantileGrid predict(const Matrix& window) const = 0;
};

/// Rows [t - w, t) of Z with the residual column taken from `residuals`
/// (which may contain synthetic values past the observed range).
Matrix assemble_window(const ObservationSeries& series, std::span<const double> residuals,
                       std::size_t t, std::size_t w);

/// Quantile regression forest on flattened windows. With residual_only the
/// features are the w lagged residuals alone.
class QrfEstimator final : public QuantileEstimator {
 public:
  struct Options {
    std::size_t window = 100;
    forest::ForestOptions forest;
    bool residual_only = false;
  };

  /// Fits on every target row in [max(w, begin), end).
  static QrfEstimator fit(const ObservationSeries& series, const ResidualSeries& residuals,
                          std::size_t begin, std::size_t end, std::vector<double> levels,
                          const Options& options, std::uint64_t seed);

  std::size_t window() const override { return options_.window; }
  QuantileGrid predict(const Matrix& window) const override;

  std::vector<double> features(const Matrix& window) const;
  const forest::ForestEnsemble& ensemble() const noexcept { return ensemble_; }

 private:
  QrfEstimator(forest::ForestEnsemble ensemble, std::vector<double> targets,
               std::vector<double> levels, Options options);

  forest::ForestEnsemble ensemble_;
  std::vector<double> targets_;
  std::vector<double> levels_;
  Options options_;
};

/// Adapter for a trained transformer quantile model.
class TransformerEstimator final : public QuantileEstimator {
 public:
  explicit TransformerEstimator(tdqr::QuantileModel model) : model_(std::move(model)) {}
  std::size_t window() const override { return model_.weights.config().window; }
  QuantileGrid predict(const Matrix& window) const override { return model_.predict(window); }
  const tdqr::QuantileModel& model() const noexcept { return model_; }

 private:
  tdqr::QuantileModel model_;
};

/// [point + Q(beta_hat), point + Q(1 - alpha + beta_hat)].
PredictionInterval spci_interval(std::int64_t t, double point_pred, const QuantileGrid& grid,
                                 const BetaGrid& betas);

/// One evaluated test range: intervals plus the truth and point prediction.
struct IntervalTrace {
  std::vector<PredictionInterval> intervals;
  std::vector<double> y_true;
  std::vector<double> y_hat;

  std::size_t size() const noexcept { return intervals.size(); }
  void push(PredictionInterval interval, double y, double y_hat_value);
};

/// CSV with header t,y_true,y_hat,lower,upper,covered,width; reals at
/// round-trip precision, infinite bounds as inf/-inf.
void write_trace_csv(const IntervalTrace& trace, const std::filesystem::path& path);
IntervalTrace read_trace_csv(const std::filesystem::path& path, SignificanceLevel alpha);

struct SequentialConfig {
  double alpha = 0.1;
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
  /// Refit the estimator every this many test steps; 0 keeps the initial fit.
  std::size_t refit_period = 0;
};

/// Builds an estimator from every residual observed before row `history_end`.
using EstimatorFactory =
    std::function<std::unique_ptr<QuantileEstimator>(std::size_t history_end)>;

/// Walks the test rows in order. The window for row t always holds the
/// observed residuals of rows t - w .. t - 1, so each true residual feeds the
/// next step.
IntervalTrace sequential_spci(const ObservationSeries& series, const ResidualSeries& residuals,
                              const QuantileEstimator& estimator, const SequentialConfig& config,
                              const EstimatorFactory& refit = {});

/// EnbPI: empirical residual quantiles of `history` (the last w residuals)
/// with the same beta search as SPCI.
PredictionInterval enbpi_interval(std::int64_t t, double point_pred,
                                  std::span<const double> history, const BetaGrid& betas);

IntervalTrace sequential_enbpi(const ObservationSeries& series, const ResidualSeries& residuals,
                               std::size_t w, const SequentialConfig& config);

/// NexCP quantile: weights rho^(n - i) on the absolute residuals
/// history[0..n-1] plus weight 1 on a point at +inf; returns the smallest
/// value with normalized cumulative weight >= 1 - alpha (possibly +inf).
double nexcp_quantile(std::span<const double> abs_history, double alpha, double rho);

/// [point - q, point + q] with q from nexcp_quantile.
PredictionInterval nexcp_interval(std::int64_t t, double point_pred,
                                  std::span<const double> abs_history, SignificanceLevel alpha,
                                  double rho);

/// Uses all residuals observed before each test row.
IntervalTrace sequential_nexcp(const ObservationSeries& series, const ResidualSeries& residuals,
                               double rho, const SequentialConfig& config);

enum class GapFill { kMedian, kZero };

struct MultistepConfig {
  SequentialConfig sequential;
  std::size_t horizon = 1;
  GapFill fill = GapFill::kMedian;
};

/// For every test row r the interval is formed at origin t = r - s + 1: the
/// residuals of rows t .. r - 1 are not yet observed and are replaced by the
/// estimator's own median (or zero) while the known features advance.
/// horizon 1 reproduces sequential_spci.
IntervalTrace multistep_intervals(const ObservationSeries& series, const ResidualSeries& residuals,
                                  const QuantileEstimator& estimator,
                                  const MultistepConfig& config);

}  // namespace spcit::conformal
