#include "spcit/bench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <tuple>

#include "spcit/rng.hpp"

namespace spcit::bench {

const char* version_string() noexcept { return SPCIT_VERSION_STRING; }

std::string method_name(Method m) {
  switch (m) {
    case Method::kSpciT: return "SPCI-T";
    case Method::kSpci: return "SPCI";
    case Method::kEnbpi: return "EnbPI";
    case Method::kNexcp: return "NexCP";
  }
  throw StructuralError("method_name: unknown method");
}

Method parse_method(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "spci-t" || s == "spcit" || s == "spci_t") return Method::kSpciT;
  if (s == "spci" || s == "qrf") return Method::kSpci;
  if (s == "enbpi") return Method::kEnbpi;
  if (s == "nexcp") return Method::kNexcp;
  throw ValidationError("unknown method '" + name + "' (expected spci-t, spci, enbpi or nexcp)");
}

tdqr::DecoderConfig transformer_preset(const std::string& family) {
  tdqr::DecoderConfig c;
  c.batch_size = 4;
  c.n_heads = 4;
  c.n_layers = 4;
  c.learning_rate = 1e-4;
  c.d_model = 16;
  c.dropout = 0.2;
  c.max_epochs = 100;
  c.patience = 15;
  c.additional_training = true;
  if (family == "simulated" || family == "nonstationary" || family == "heteroskedastic") {
    c.learning_rate = 5e-4;
    c.additional_training = false;
  } else if (family == "wind") {
    c.d_model = 32;
    c.dropout = 0.1;
  } else if (family == "electricity") {
  } else if (family == "solar") {
    c.learning_rate = 5e-4;
  } else if (family == "solar_hourly") {
    c.learning_rate = 5e-4;
    c.d_model = 32;
  } else {
    throw ValidationError("transformer_preset: unknown family '" + family + "'");
  }
  return c;
}

ObservationSeries load_dataset(const DatasetSpec& spec, std::uint64_t seed,
                               std::vector<double>* true_noise) {
  if (spec.simulation) {
    datagen::SimulationSpec s = *spec.simulation;
    s.seed = seed;
    auto sim = datagen::simulate(s);
    if (true_noise != nullptr) *true_noise = std::move(sim.true_noise);
    return std::move(sim.series);
  }
  if (spec.csv.empty()) throw ValidationError("dataset '" + spec.name + "' has no source");
  return datagen::load_csv(spec.csv, spec.schema);
}

PreparedData prepare(ObservationSeries series, const forest::ForestOptions& point_forest,
                     std::uint64_t seed) {
  const auto plan = datagen::split(series.size(), datagen::SplitMode::kTrainValTest);
  const std::size_t n_fit = plan.val_end;
  Matrix X(n_fit, series.dim());
  for (std::size_t r = 0; r < n_fit; ++r) {
    std::copy(series.feature(r).begin(), series.feature(r).end(), X.row(r).begin());
  }
  const std::vector<double> y(series.outcomes().begin(),
                              series.outcomes().begin() + static_cast<std::ptrdiff_t>(n_fit));
  const auto ensemble =
      forest::fit_forest(X, y, point_forest, derive_seed(seed, seed_stream::kPointForest));
  std::vector<double> pred(series.size());
  for (std::size_t r = 0; r < series.size(); ++r) {
    pred[r] = r < n_fit ? forest::loo_point_predict(ensemble, X, r)
                        : forest::predict_test(ensemble, series.feature(r));
  }
  auto residuals = compute_residuals(series, pred);
  return PreparedData{std::move(series), std::move(residuals), plan, {}};
}

namespace {

tdqr::DecoderConfig effective_transformer(const PreparedData& data, const MethodConfig& config,
                                          std::uint64_t seed) {
  tdqr::DecoderConfig c = config.transformer;
  c.window = config.window;
  c.input_dim = data.series.dim() + 1;
  c.quantile_levels = conformal::spci_levels(SignificanceLevel(config.alpha));
  c.seed = derive_seed(seed, seed_stream::kTransformer);
  return c;
}

}  // namespace

TrainedTransformer train_transformer(const PreparedData& data, const MethodConfig& config,
                                     std::uint64_t seed) {
  const tdqr::DecoderConfig cfg = effective_transformer(data, config, seed);
  const auto& plan = data.plan;
  const std::size_t w = cfg.window;
  if (plan.train_end <= w) {
    throw ValidationError("train_transformer: " + std::to_string(plan.train_end) +
                          " training rows leave no window of " + std::to_string(w));
  }
  auto standardizer = tdqr::Standardizer::fit(data.series, data.residuals, 0, plan.train_end);
  const auto train_set = standardizer.apply(
      tdqr::build_windows(data.series, data.residuals, w, w, plan.train_end));
  const auto val_set = standardizer.apply(
      tdqr::build_windows(data.series, data.residuals, w, plan.train_end, plan.val_end));
  auto result = tdqr::train(cfg, train_set, val_set);
  tdqr::QuantileModel model{result.weights, std::move(standardizer)};
  return TrainedTransformer{std::move(model), std::move(result)};
}

double empirical_coverage(const std::vector<PredictionInterval>& intervals,
                          std::span<const double> truths) {
  if (intervals.size() != truths.size()) {
    throw StructuralError("empirical_coverage: " + std::to_string(intervals.size()) +
                          " intervals but " + std::to_string(truths.size()) + " truths");
  }
  if (intervals.empty()) throw ValidationError("empirical_coverage: no intervals");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (interval_contains(intervals[i], truths[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

WidthSummary mean_width(const std::vector<PredictionInterval>& intervals) {
  if (intervals.empty()) throw ValidationError("mean_width: no intervals");
  WidthSummary s;
  double total = 0.0;
  std::size_t finite = 0;
  for (const auto& iv : intervals) {
    if (iv.is_finite()) {
      total += iv.width();
      ++finite;
    } else {
      ++s.infinite_count;
    }
  }
  s.mean = finite == 0 ? std::numeric_limits<double>::infinity()
                       : total / static_cast<double>(finite);
  return s;
}

ExperimentSession::ExperimentSession(const DatasetSpec& dataset, std::uint64_t seed,
                                     const forest::ForestOptions& point_forest)
    : name_(dataset.name), seed_(seed), data_([&] {
        std::vector<double> noise;
        auto series = load_dataset(dataset, seed, &noise);
        auto prepared = prepare(std::move(series), point_forest, seed);
        prepared.true_noise = std::move(noise);
        return prepared;
      }()) {}

std::string ExperimentSession::transformer_key(const MethodConfig& config) {
  MethodConfig key_cfg = config;
  key_cfg.method = Method::kSpciT;
  key_cfg.horizon = 1;
  key_cfg.gap_fill = conformal::GapFill::kMedian;
  key_cfg.nexcp_rho = 0.99;
  key_cfg.refit_period = 0;
  key_cfg.quantile_forest = {};
  key_cfg.qrf_residual_only = false;
  return method_config_to_json(key_cfg);
}

const TrainedTransformer& ExperimentSession::transformer(const MethodConfig& config) {
  auto& slot = transformers_[transformer_key(config)];
  if (!slot) slot = std::make_unique<TrainedTransformer>(train_transformer(data_, config, seed_));
  return *slot;
}

void ExperimentSession::adopt_transformer(const MethodConfig& config, tdqr::QuantileModel model,
                                          const tdqr::CheckpointMetadata& meta) {
  const auto& cfg = model.weights.config();
  if (cfg.window != config.window || cfg.input_dim != data_.series.dim() + 1 ||
      cfg.quantile_levels != conformal::spci_levels(SignificanceLevel(config.alpha))) {
    throw ValidationError("adopt_transformer: model does not match the dataset, window or alpha");
  }
  tdqr::TrainResult result{model.weights, {}, meta.best_epoch, meta.best_val_loss,
                           meta.epochs_run};
  transformers_[transformer_key(config)] =
      std::make_unique<TrainedTransformer>(TrainedTransformer{std::move(model), std::move(result)});
}

RunResult ExperimentSession::run(const MethodConfig& config) {
  const SignificanceLevel alpha(config.alpha);
  const auto& series = data_.series;
  const auto& residuals = data_.residuals;
  conformal::SequentialConfig sc;
  sc.alpha = alpha.value();
  sc.test_begin = data_.plan.val_end;
  sc.test_end = series.size();
  sc.refit_period = config.refit_period;
  if (config.horizon == 0) throw ValidationError("run: horizon must be >= 1");
  const conformal::MultistepConfig mc{sc, config.horizon, config.gap_fill};

  RunResult out;
  out.method = config.method;
  out.dataset = name_;
  out.seed = seed_;
  out.alpha = alpha.value();
  out.window = config.window;
  out.horizon = config.horizon;

  switch (config.method) {
    case Method::kSpciT: {
      if (config.refit_period > 0) {
        throw ValidationError("run: SPCI-T is fitted once; refit_period is not supported");
      }
      const auto& trained = transformer(config);
      const conformal::TransformerEstimator est(trained.model);
      out.trace = config.horizon == 1 ? conformal::sequential_spci(series, residuals, est, sc)
                                      : conformal::multistep_intervals(series, residuals, est, mc);
      out.training = tdqr::CheckpointMetadata{trained.result.best_epoch,
                                              trained.result.best_val_loss,
                                              trained.result.epochs_run, ""};
      break;
    }
    case Method::kSpci: {
      const conformal::QrfEstimator::Options opts{config.window, config.quantile_forest,
                                                  config.qrf_residual_only};
      const auto levels = conformal::spci_levels(alpha);
      const std::uint64_t qseed = derive_seed(seed_, seed_stream::kQuantileForest);
      const auto est = conformal::QrfEstimator::fit(series, residuals, 0, data_.plan.val_end,
                                                    levels, opts, qseed);
      const conformal::EstimatorFactory refit = [&](std::size_t end) {
        return std::make_unique<conformal::QrfEstimator>(
            conformal::QrfEstimator::fit(series, residuals, 0, end, levels, opts, qseed));
      };
      out.trace = config.horizon == 1
                      ? conformal::sequential_spci(series, residuals, est, sc, refit)
                      : conformal::multistep_intervals(series, residuals, est, mc);
      break;
    }
    case Method::kEnbpi:
      if (config.horizon != 1) throw ValidationError("run: EnbPI supports horizon 1 only");
      out.trace = conformal::sequential_enbpi(series, residuals, config.window, sc);
      break;
    case Method::kNexcp:
      if (config.horizon != 1) throw ValidationError("run: NexCP supports horizon 1 only");
      out.trace = conformal::sequential_nexcp(series, residuals, config.nexcp_rho, sc);
      break;
  }
  out.coverage = empirical_coverage(out.trace.intervals, out.trace.y_true);
  const auto w = mean_width(out.trace.intervals);
  out.mean_width = w.mean;
  out.infinite_count = w.infinite_count;
  return out;
}

RunResult run_experiment(const DatasetSpec& dataset, const MethodConfig& config,
                         std::uint64_t seed) {
  ExperimentSession session(dataset, seed, config.point_forest);
  return session.run(config);
}

namespace {

auto group_key(const RunResult& r) {
  return std::make_tuple(r.dataset, static_cast<int>(r.method), r.window, r.horizon, r.alpha);
}

}  // namespace

AggregateResult aggregate(std::vector<RunResult const*> results) {
  if (results.empty()) throw ValidationError("aggregate: no results");
  const auto key = group_key(*results.front());
  for (const auto* r : results) {
    if (group_key(*r) != key) throw StructuralError("aggregate: results mix configurations");
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const RunResult* a, const RunResult* b) { return a->seed < b->seed; });
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i]->seed == results[i - 1]->seed) {
      throw ValidationError("aggregate: seed " + std::to_string(results[i]->seed) +
                            " appears twice");
    }
  }
  const auto& first = *results.front();
  AggregateResult a;
  a.method = first.method;
  a.dataset = first.dataset;
  a.alpha = first.alpha;
  a.window = first.window;
  a.horizon = first.horizon;
  a.n_seeds = results.size();
  const auto n = static_cast<double>(results.size());
  for (const auto* r : results) {
    a.coverage_mean += r->coverage;
    a.width_mean += r->mean_width;
    a.infinite_count += r->infinite_count;
  }
  a.coverage_mean /= n;
  a.width_mean /= n;
  if (results.size() == 1) {
    a.single_seed = true;
    return a;
  }
  double cv = 0.0;
  double wv = 0.0;
  for (const auto* r : results) {
    cv += (r->coverage - a.coverage_mean) * (r->coverage - a.coverage_mean);
    wv += (r->mean_width - a.width_mean) * (r->mean_width - a.width_mean);
  }
  a.coverage_std = std::sqrt(cv / (n - 1.0));
  a.width_std = std::isfinite(a.width_mean) ? std::sqrt(wv / (n - 1.0)) : 0.0;
  return a;
}

AggregateResult aggregate(const std::vector<RunResult>& results) {
  std::vector<RunResult const*> ptrs;
  for (const auto& r : results) ptrs.push_back(&r);
  return aggregate(std::move(ptrs));
}

std::vector<AggregateResult> aggregate_all(const std::vector<RunResult>& results) {
  std::map<decltype(group_key(results.front())), std::vector<RunResult const*>> groups;
  for (const auto& r : results) groups[group_key(r)].push_back(&r);
  std::vector<AggregateResult> out;
  for (auto& [key, members] : groups) out.push_back(aggregate(members));
  return out;
}

}  // namespace spcit::bench
