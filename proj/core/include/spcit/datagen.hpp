#pragma once

// Simulated and real time series: the non-stationary and heteroskedastic
// simulators, schema-driven CSV ingestion, hourly one-hot features, and
// chronological splits.
//
// Simulator draw order (one SplitMix64 seeded with
// derive_seed(seed, seed_stream::kSimulation)):
//   1. beta: ceil(sparsity * d) indices by partial Fisher-Yates over 0..d-1
//      (below()), then one uniform_open() value per chosen index in draw order;
//   2. for t = 1..T: d uniform() draws for X_t, then one normal() for e_t.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spcit/core.hpp"

namespace spcit::datagen {

enum class SimulationKind { kNonstationary, kHeteroskedastic };

struct SimulationSpec {
  SimulationKind kind = SimulationKind::kNonstationary;
  std::size_t T = 2000;
  std::size_t d = 10;
  double ar_rho = 0.6;
  double sparsity = 0.2;
  std::uint64_t seed = 0;
  /// Heteroskedastic only: innovation sd sigma(X) instead of
  /// sigma(X) * sqrt(1 - rho^2).
  bool pure_innovation = false;

  void validate() const;
};

struct Simulation {
  ObservationSeries series;
  std::vector<double> true_noise;  // eps_t, t = 1..T
  std::vector<double> beta;
};

/// log(t') sin(2 pi t' / 100) with t' = mod(t, 100), or 100 when that is 0.
double envelope(std::int64_t t);

/// (|u| + u^2 + |u|^3)^(1/4).
double link(double u);

/// Upper bound of the X_t,j uniform draw: exp(0.01 mod(t, 100)).
double feature_amplitude(std::int64_t t);

Simulation gen_nonstationary(const SimulationSpec& spec);
Simulation gen_heteroskedastic(const SimulationSpec& spec);
Simulation simulate(const SimulationSpec& spec);

/// Columns t, x1..xd, y, eps_true at round-trip precision.
void write_simulation_csv(const Simulation& sim, const std::filesystem::path& path);

struct DatasetSchema {
  std::string name;
  /// Empty means every column except the outcome and ignored ones.
  std::vector<std::string> feature_columns;
  std::string outcome_column;
  std::vector<std::string> ignore_columns;
  bool hourly_onehot = false;
  std::size_t samples_per_day = 0;

  void validate() const;
};

/// solar, solar_hourly, wind, electricity and simulated.
std::vector<DatasetSchema> builtin_schemas();
DatasetSchema builtin_schema(const std::string& name);

/// {"schemas": [{"name", "features", "outcome", "ignore", "hourly_onehot",
/// "samples_per_day"}]}
std::vector<DatasetSchema> load_schema_file(const std::filesystem::path& path);
void save_schema_file(const std::vector<DatasetSchema>& schemas,
                      const std::filesystem::path& path);

/// Header row required; rows become t = 1..T in file order. Errors name the
/// 1-based data row and the column. Applies the hourly one-hot step when the
/// schema asks for it.
ObservationSeries load_csv(const std::filesystem::path& path, const DatasetSchema& schema);

/// Appends 24 indicator columns hour0..hour23; row r is sample (r mod
/// samples_per_day) of its day.
ObservationSeries add_hourly_onehot(const ObservationSeries& series, std::size_t samples_per_day);

enum class SplitMode { kTrainValTest, kTrainTest };

/// Row ranges [0, train_end), [train_end, val_end), [val_end, T). The test
/// block is the last ceil(T / 10) rows in both modes; kTrainTest has no
/// validation rows (val_end == train_end).
struct SplitPlan {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;

  std::size_t train_size() const noexcept { return train_end; }
  std::size_t val_size() const noexcept { return val_end - train_end; }
  std::size_t test_size() const noexcept { return total - val_end; }
};

SplitPlan split(std::size_t T, SplitMode mode);

}  // namespace spcit::datagen
