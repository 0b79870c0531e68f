#include "spcit/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace spcit::conformal {

BetaGrid BetaGrid::make(SignificanceLevel alpha, std::size_t points, double edge_fraction) {
  if (points < 2) throw ValidationError("BetaGrid: need at least 2 points");
  if (!(edge_fraction > 0.0 && edge_fraction < 1.0)) {
    throw ValidationError("BetaGrid: edge_fraction must lie in (0, 1)");
  }
  const double a = alpha.value();
  BetaGrid g;
  g.alpha = a;
  const double edge = a * edge_fraction;
  for (std::size_t i = 0; i < points; ++i) {
    const double beta = a * static_cast<double>(i) / static_cast<double>(points - 1);
    g.betas.push_back(beta);
    g.lower_levels.push_back(i == 0 ? edge : beta);
    g.upper_levels.push_back(i + 1 == points ? 1.0 - edge : 1.0 - a + beta);
  }
  return g;
}

std::vector<double> BetaGrid::all_levels() const {
  std::vector<double> out = lower_levels;
  out.push_back(0.5);
  out.insert(out.end(), upper_levels.begin(), upper_levels.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double x, double y) { return std::abs(x - y) <= 1e-12; }),
            out.end());
  return out;
}

std::vector<double> spci_levels(SignificanceLevel alpha) {
  return BetaGrid::make(alpha).all_levels();
}

BetaChoice beta_hat(const QuantileGrid& grid, const BetaGrid& betas) {
  BetaChoice best;
  double best_width = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < betas.betas.size(); ++i) {
    const double lo = grid.at(betas.lower_levels[i]);
    const double hi = grid.at(betas.upper_levels[i]);
    const double width = hi - lo;
    if (i == 0 || width < best_width || (std::isnan(best_width) && !std::isnan(width))) {
      best = {i, betas.betas[i], lo, hi};
      best_width = width;
    }
  }
  return best;
}

Matrix assemble_window(const ObservationSeries& series, std::span<const double> residuals,
                       std::size_t t, std::size_t w) {
  if (w == 0 || t < w) throw ValidationError("assemble_window: row " + std::to_string(t) +
                                             " has fewer than " + std::to_string(w) + " predecessors");
  if (t > series.size() || residuals.size() < t) {
    throw StructuralError("assemble_window: row " + std::to_string(t) + " outside the history");
  }
  const std::size_t d = series.dim();
  Matrix z(w, d + 1);
  for (std::size_t r = 0; r < w; ++r) {
    const std::size_t s = t - w + r;
    const auto x = series.feature(s);
    std::copy(x.begin(), x.end(), z.row(r).begin());
    z(r, d) = residuals[s];
  }
  return z;
}

QrfEstimator::QrfEstimator(forest::ForestEnsemble ensemble, std::vector<double> targets,
                           std::vector<double> levels, Options options)
    : ensemble_(std::move(ensemble)),
      targets_(std::move(targets)),
      levels_(std::move(levels)),
      options_(std::move(options)) {}

std::vector<double> QrfEstimator::features(const Matrix& window) const {
  if (window.rows() != options_.window) {
    throw StructuralError("QrfEstimator: window has " + std::to_string(window.rows()) +
                          " rows, expected " + std::to_string(options_.window));
  }
  if (options_.residual_only) {
    std::vector<double> f(window.rows());
    for (std::size_t r = 0; r < window.rows(); ++r) f[r] = window(r, window.cols() - 1);
    return f;
  }
  return {window.flat().begin(), window.flat().end()};
}

QrfEstimator QrfEstimator::fit(const ObservationSeries& series, const ResidualSeries& residuals,
                               std::size_t begin, std::size_t end, std::vector<double> levels,
                               const Options& options, std::uint64_t seed) {
  const std::size_t w = options.window;
  begin = std::max(begin, w);
  end = std::min(end, series.size());
  if (begin >= end) throw ValidationError("QrfEstimator: no training windows");
  QrfEstimator shell(forest::ForestEnsemble{}, {}, levels, options);
  const std::size_t width = options.residual_only ? w : w * (series.dim() + 1);
  Matrix X(end - begin, width);
  std::vector<double> y(end - begin);
  for (std::size_t t = begin; t < end; ++t) {
    const auto f = shell.features(assemble_window(series, residuals.residuals(), t, w));
    std::copy(f.begin(), f.end(), X.row(t - begin).begin());
    y[t - begin] = residuals.residual(t);
  }
  auto ensemble = forest::fit_qrf(X, y, options.forest, seed);
  return QrfEstimator(std::move(ensemble), std::move(y), std::move(levels), options);
}

QuantileGrid QrfEstimator::predict(const Matrix& window) const {
  const auto z = features(window);
  return QuantileGrid(levels_, forest::qrf_quantiles(ensemble_, z, levels_, targets_));
}

PredictionInterval spci_interval(std::int64_t t, double point_pred, const QuantileGrid& grid,
                                 const BetaGrid& betas) {
  const BetaChoice c = beta_hat(grid, betas);
  return PredictionInterval(t, point_pred + c.lower, point_pred + c.upper,
                            SignificanceLevel(betas.alpha));
}

void IntervalTrace::push(PredictionInterval interval, double y, double y_hat_value) {
  intervals.push_back(interval);
  y_true.push_back(y);
  y_hat.push_back(y_hat_value);
}

namespace {

void check_range(const ObservationSeries& series, const ResidualSeries& residuals,
                 const SequentialConfig& c, std::size_t w) {
  if (residuals.size() != series.size()) {
    throw StructuralError("conformal: residual series does not match observations");
  }
  if (c.test_begin >= c.test_end) throw ValidationError("conformal: empty test range");
  if (c.test_end > series.size()) throw ValidationError("conformal: test range past the series");
  if (c.test_begin < w) {
    throw ValidationError("conformal: test start " + std::to_string(c.test_begin) +
                          " leaves no room for a window of " + std::to_string(w));
  }
}

}  // namespace

IntervalTrace sequential_spci(const ObservationSeries& series, const ResidualSeries& residuals,
                              const QuantileEstimator& estimator, const SequentialConfig& config,
                              const EstimatorFactory& refit) {
  const std::size_t w = estimator.window();
  check_range(series, residuals, config, w);
  if (config.refit_period > 0 && !refit) {
    throw ValidationError("sequential_spci: refit_period set without a factory");
  }
  const BetaGrid betas = BetaGrid::make(SignificanceLevel(config.alpha));
  std::unique_ptr<QuantileEstimator> refitted;
  const QuantileEstimator* current = &estimator;
  IntervalTrace trace;
  for (std::size_t t = config.test_begin; t < config.test_end; ++t) {
    const std::size_t step = t - config.test_begin;
    if (config.refit_period > 0 && step > 0 && step % config.refit_period == 0) {
      refitted = refit(t);
      if (!refitted || refitted->window() != w) {
        throw StructuralError("sequential_spci: refit returned an incompatible estimator");
      }
      current = refitted.get();
    }
    const auto grid = current->predict(assemble_window(series, residuals.residuals(), t, w));
    trace.push(spci_interval(series.time_of(t), residuals.prediction(t), grid, betas),
               series.outcome(t), residuals.prediction(t));
  }
  return trace;
}

PredictionInterval enbpi_interval(std::int64_t t, double point_pred,
                                  std::span<const double> history, const BetaGrid& betas) {
  if (history.empty()) throw ValidationError("enbpi_interval: empty residual history");
  const std::vector<double> uniform(history.size(), 1.0);
  const auto levels = betas.all_levels();
  const QuantileGrid grid(levels, weighted_quantiles(history, uniform, levels));
  return spci_interval(t, point_pred, grid, betas);
}

IntervalTrace sequential_enbpi(const ObservationSeries& series, const ResidualSeries& residuals,
                               std::size_t w, const SequentialConfig& config) {
  check_range(series, residuals, config, w);
  const BetaGrid betas = BetaGrid::make(SignificanceLevel(config.alpha));
  IntervalTrace trace;
  for (std::size_t t = config.test_begin; t < config.test_end; ++t) {
    const auto history = residuals.residuals().subspan(t - w, w);
    trace.push(enbpi_interval(series.time_of(t), residuals.prediction(t), history, betas),
               series.outcome(t), residuals.prediction(t));
  }
  return trace;
}

double nexcp_quantile(std::span<const double> abs_history, double alpha, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ValidationError("nexcp: rho must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("nexcp: alpha must lie in (0, 1)");
  const std::size_t n = abs_history.size();
  std::vector<double> values(abs_history.begin(), abs_history.end());
  std::vector<double> weights(n + 1);
  // history[i] is n - i steps old; the +inf point sits at the current time.
  double wgt = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    wgt *= rho;
    weights[k] = wgt;
  }
  values.push_back(std::numeric_limits<double>::infinity());
  weights[n] = 1.0;
  return weighted_quantile(values, weights, 1.0 - alpha);
}

PredictionInterval nexcp_interval(std::int64_t t, double point_pred,
                                  std::span<const double> abs_history, SignificanceLevel alpha,
                                  double rho) {
  const double q = nexcp_quantile(abs_history, alpha.value(), rho);
  return PredictionInterval(t, point_pred - q, point_pred + q, alpha);
}

IntervalTrace sequential_nexcp(const ObservationSeries& series, const ResidualSeries& residuals,
                               double rho, const SequentialConfig& config) {
  check_range(series, residuals, config, 0);
  const SignificanceLevel alpha(config.alpha);
  std::vector<double> abs_res(residuals.size());
  for (std::size_t i = 0; i < abs_res.size(); ++i) abs_res[i] = std::abs(residuals.residual(i));
  IntervalTrace trace;
  for (std::size_t t = config.test_begin; t < config.test_end; ++t) {
    const std::span<const double> history(abs_res.data(), t);
    trace.push(nexcp_interval(series.time_of(t), residuals.prediction(t), history, alpha, rho),
               series.outcome(t), residuals.prediction(t));
  }
  return trace;
}

IntervalTrace multistep_intervals(const ObservationSeries& series, const ResidualSeries& residuals,
                                  const QuantileEstimator& estimator,
                                  const MultistepConfig& config) {
  if (config.horizon == 0) throw ValidationError("multistep_intervals: horizon must be >= 1");
  const std::size_t w = estimator.window();
  const SequentialConfig& sc = config.sequential;
  check_range(series, residuals, sc, w + config.horizon - 1);
  const BetaGrid betas = BetaGrid::make(SignificanceLevel(sc.alpha));
  std::vector<double> history(residuals.residuals().begin(), residuals.residuals().end());
  IntervalTrace trace;
  for (std::size_t r = sc.test_begin; r < sc.test_end; ++r) {
    const std::size_t origin = r + 1 - config.horizon;
    // Residuals from the origin on are unknown when the interval is formed.
    for (std::size_t u = origin; u < r; ++u) {
      if (config.fill == GapFill::kZero) {
        history[u] = 0.0;
      } else {
        history[u] = estimator.predict(assemble_window(series, history, u, w)).at(0.5);
      }
    }
    const auto grid = estimator.predict(assemble_window(series, history, r, w));
    trace.push(spci_interval(series.time_of(r), residuals.prediction(r), grid, betas),
               series.outcome(r), residuals.prediction(r));
    for (std::size_t u = origin; u < r; ++u) history[u] = residuals.residual(u);
  }
  return trace;
}

void write_trace_csv(const IntervalTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  out << "t,y_true,y_hat,lower,upper,covered,width\n";
  char buf[256];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& iv = trace.intervals[i];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                  static_cast<long long>(iv.t), trace.y_true[i], trace.y_hat[i], iv.lower,
                  iv.upper, interval_contains(iv, trace.y_true[i]) ? 1 : 0, iv.width());
    out << buf;
  }
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path.string());
}

IntervalTrace read_trace_csv(const std::filesystem::path& path, SignificanceLevel alpha) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,y_true,y_hat,lower,upper,covered,width") {
    throw ValidationError("read_trace_csv: " + path.string() + " has an unexpected header");
  }
  IntervalTrace trace;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      v.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str() || *end != '\0') {
        throw ValidationError("read_trace_csv: bad value '" + cell + "' in data row " +
                              std::to_string(row));
      }
    }
    if (v.size() != 7) {
      throw ValidationError("read_trace_csv: data row " + std::to_string(row) +
                            " does not have 7 fields");
    }
    trace.push(PredictionInterval(static_cast<std::int64_t>(v[0]), v[3], v[4], alpha), v[1], v[2]);
  }
  return trace;
}

}  // namespace spcit::conformal
