#pragma once

// Experiment harness: data preparation with the shared LOO point predictor,
// one run per (method, dataset, seed), metrics, multi-seed aggregation and
// report/plot emission.
//
// Per-run seeding: every component draws from derive_seed(seed, stream) with
// the named streams of rng.hpp (point forest, quantile forest, transformer).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spcit/conformal.hpp"
#include "spcit/core.hpp"
#include "spcit/datagen.hpp"
#include "spcit/forest.hpp"
#include "spcit/tdqr.hpp"

namespace spcit::bench {

/// Build identifier baked in at configure time (version plus git describe).
const char* version_string() noexcept;

enum class Method { kSpciT, kSpci, kEnbpi, kNexcp };

/// "SPCI-T", "SPCI", "EnbPI", "NexCP".
std::string method_name(Method m);
/// Case-insensitive; accepts the display names and spci-t / spcit.
Method parse_method(const std::string& name);

/// Either a simulator (seeded per run) or a CSV file read through a schema.
struct DatasetSpec {
  std::string name;
  std::optional<datagen::SimulationSpec> simulation;
  std::filesystem::path csv;
  datagen::DatasetSchema schema;
};

struct MethodConfig {
  Method method = Method::kSpciT;
  double alpha = 0.1;
  std::size_t window = 100;
  std::size_t horizon = 1;
  double nexcp_rho = 0.99;
  std::size_t refit_period = 0;
  forest::ForestOptions point_forest;
  forest::ForestOptions quantile_forest;
  bool qrf_residual_only = false;
  /// window, input_dim, quantile_levels and seed are filled in per run.
  tdqr::DecoderConfig transformer;
  conformal::GapFill gap_fill = conformal::GapFill::kMedian;
};

/// Transformer hyperparameters per dataset family: "simulated", "wind",
/// "electricity", "solar", "solar_hourly".
tdqr::DecoderConfig transformer_preset(const std::string& family);

/// Series plus residuals from the LOO forest fitted on the rows before the
/// shared test block.
struct PreparedData {
  ObservationSeries series;
  ResidualSeries residuals;
  datagen::SplitPlan plan;  // train / validation / test for SPCI-T
  std::vector<double> true_noise;  // simulators only
};

ObservationSeries load_dataset(const DatasetSpec& spec, std::uint64_t seed,
                               std::vector<double>* true_noise = nullptr);

PreparedData prepare(ObservationSeries series, const forest::ForestOptions& point_forest,
                     std::uint64_t seed);

struct TrainedTransformer {
  tdqr::QuantileModel model;
  tdqr::TrainResult result;
};

/// Standardizes with training-row statistics and fits on windows whose
/// targets are training rows; validation targets drive model selection.
TrainedTransformer train_transformer(const PreparedData& data, const MethodConfig& config,
                                     std::uint64_t seed);

struct RunResult {
  Method method = Method::kSpciT;
  std::string dataset;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  std::size_t window = 0;
  std::size_t horizon = 1;
  conformal::IntervalTrace trace;
  double coverage = 0.0;
  double mean_width = 0.0;
  std::size_t infinite_count = 0;
  /// Transformer runs: best epoch, epochs run, best validation loss.
  std::optional<tdqr::CheckpointMetadata> training;
};

double empirical_coverage(const std::vector<PredictionInterval>& intervals,
                          std::span<const double> truths);

struct WidthSummary {
  double mean = 0.0;  // over finite intervals; +inf when none is finite
  std::size_t infinite_count = 0;
};
WidthSummary mean_width(const std::vector<PredictionInterval>& intervals);

/// One dataset and seed; the point predictor and any trained transformer are
/// reused across the method runs of the session.
class ExperimentSession {
 public:
  ExperimentSession(const DatasetSpec& dataset, std::uint64_t seed,
                    const forest::ForestOptions& point_forest = {});

  const PreparedData& data() const noexcept { return data_; }
  std::uint64_t seed() const noexcept { return seed_; }

  RunResult run(const MethodConfig& config);

  /// The transformer for this config, trained on first use.
  const TrainedTransformer& transformer(const MethodConfig& config);

  /// Registers an already trained model (e.g. from a checkpoint) for config.
  void adopt_transformer(const MethodConfig& config, tdqr::QuantileModel model,
                         const tdqr::CheckpointMetadata& meta);

 private:
  static std::string transformer_key(const MethodConfig& config);

  std::string name_;
  std::uint64_t seed_;
  PreparedData data_;
  std::map<std::string, std::unique_ptr<TrainedTransformer>> transformers_;
};

RunResult run_experiment(const DatasetSpec& dataset, const MethodConfig& config,
                         std::uint64_t seed);

struct AggregateResult {
  Method method = Method::kSpciT;
  std::string dataset;
  double alpha = 0.1;
  std::size_t window = 0;
  std::size_t horizon = 1;
  std::size_t n_seeds = 0;
  double coverage_mean = 0.0;
  double coverage_std = 0.0;
  double width_mean = 0.0;
  double width_std = 0.0;
  std::size_t infinite_count = 0;
  /// Set when n_seeds == 1 and the std columns are 0 by convention.
  bool single_seed = false;

  friend bool operator==(const AggregateResult&, const AggregateResult&) = default;
};

/// Sample mean and (n - 1) standard deviation over seeds, folded in seed
/// order. Results must share method, dataset, alpha, window and horizon.
AggregateResult aggregate(std::vector<RunResult const*> results);
AggregateResult aggregate(const std::vector<RunResult>& results);

/// Groups by (dataset, method, window, horizon, alpha) and aggregates each.
std::vector<AggregateResult> aggregate_all(const std::vector<RunResult>& results);

/// "%.4g" with a trailing "inf" for infinite values.
std::string format_sig4(double v);

void write_report_markdown(const std::vector<AggregateResult>& rows,
                           const std::filesystem::path& path);
void write_report_csv(const std::vector<AggregateResult>& rows, const std::filesystem::path& path);
void write_report_json(const std::vector<AggregateResult>& rows,
                       const std::filesystem::path& path);
std::vector<AggregateResult> read_report_json(const std::filesystem::path& path);

/// CSV t,y_true,lower,upper.
void write_band_csv(const conformal::IntervalTrace& trace, const std::filesystem::path& path);

/// Standalone SVG. The band polygon and truth polyline carry data
/// coordinates (t, value) inside a flipping transform; infinite bounds are
/// clipped to the finite extent of the trace.
void write_band_svg(const conformal::IntervalTrace& trace, const std::string& title,
                    const std::filesystem::path& path);

/// JSON echo of a method config (and back).
std::string method_config_to_json(const MethodConfig& config);
MethodConfig method_config_from_json(const std::string& json);

/// Run manifest: version, dataset, seed, effective config and metrics.
void write_manifest(const RunResult& run, const MethodConfig& config,
                    const std::string& dataset_description, const std::filesystem::path& path);

}  // namespace spcit::bench
