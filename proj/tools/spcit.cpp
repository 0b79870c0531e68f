// spcit: command-line front end.
//
//   spcit simulate  --kind nonstationary --seed 0 --out sim.csv
//   spcit ingest    --csv data/electricity_sample.csv --schema electricity
//   spcit train     --dataset sim:nonstationary --seed 0 --out model.json
//   spcit evaluate  --method nexcp --dataset sim.csv --seed 0 --out-dir runs/nexcp
//   spcit benchmark --suite simulated --alpha 0.1 --w 100 --seeds 0,1,2 --jobs 2
//   spcit plot      --trace runs/nexcp/trace.csv --out-prefix runs/nexcp/band
//
// A JSON config (--config) supplies defaults; flags given on the command
// line win. SPCIT_OUTPUT_DIR sets the default output directory.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spcit/bench.hpp"

namespace fs = std::filesystem;
using namespace spcit;

namespace {

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

fs::path default_output_dir() {
  const char* env = std::getenv("SPCIT_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("spcit-out");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(item, &used)));
      } else {
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string("bad ") + what + " '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(std::string("empty ") + what + " list");
  return out;
}

datagen::SimulationKind parse_kind(const std::string& s) {
  if (s == "nonstationary") return datagen::SimulationKind::kNonstationary;
  if (s == "heteroskedastic") return datagen::SimulationKind::kHeteroskedastic;
  throw ValidationError("unknown simulation kind '" + s + "'");
}

// Options shared by every command that touches a dataset.
struct DatasetOptions {
  std::string dataset;
  std::string schema;
  std::string schema_file;

  void attach(CLI::App* app) {
    app->add_option("--dataset", dataset,
                    "CSV path, or sim:nonstationary / sim:heteroskedastic")
        ->required();
    app->add_option("--schema", schema,
                    "schema name (solar, solar_hourly, wind, electricity, simulated)");
    app->add_option("--schema-file", schema_file, "JSON schema file overriding built-ins");
  }

  datagen::DatasetSchema resolve_schema(const std::string& fallback) const {
    const std::string name = schema.empty() ? fallback : schema;
    if (!schema_file.empty()) {
      for (auto& s : datagen::load_schema_file(schema_file)) {
        if (s.name == name) return s;
      }
      throw ValidationError("schema '" + name + "' not found in " + schema_file);
    }
    return datagen::builtin_schema(name);
  }

  bench::DatasetSpec spec() const {
    bench::DatasetSpec ds;
    if (dataset.rfind("sim:", 0) == 0) {
      datagen::SimulationSpec sim;
      sim.kind = parse_kind(dataset.substr(4));
      ds.simulation = sim;
      ds.name = dataset.substr(4);
      return ds;
    }
    ds.csv = dataset;
    ds.schema = resolve_schema("simulated");
    ds.name = fs::path(dataset).stem().string();
    return ds;
  }

  std::string family() const {
    if (dataset.rfind("sim:", 0) == 0) return "simulated";
    const std::string name = schema.empty() ? "simulated" : schema;
    return name == "custom" ? "simulated" : name;
  }
};

// Method configuration: config file, then preset, then flag overrides.
struct MethodOptions {
  std::string config_path;
  std::string method = "spci-t";
  std::optional<std::string> preset;
  std::optional<double> alpha;
  std::optional<std::size_t> window;
  std::optional<std::size_t> horizon;
  std::optional<double> rho;
  std::optional<std::size_t> refit_period;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> patience;
  std::optional<double> learning_rate;
  std::optional<std::size_t> d_model;
  std::optional<double> dropout;
  std::optional<std::size_t> trees;
  std::optional<std::size_t> qrf_trees;
  bool residual_only = false;
  bool zero_fill = false;

  void attach(CLI::App* app, bool with_method, bool with_window = true) {
    app->add_option("--config", config_path, "JSON method config; flags override it");
    if (with_method) app->add_option("--method", method, "spci-t, spci, enbpi or nexcp");
    app->add_option("--preset", preset,
                    "transformer preset: simulated, wind, electricity, solar, solar_hourly");
    app->add_option("--alpha", alpha, "miscoverage level");
    if (with_window) app->add_option("--window,-w", window, "past window w");
    if (with_window) app->add_option("--horizon,-s", horizon, "steps ahead (SPCI-T and SPCI)");
    app->add_option("--rho", rho, "NexCP weight decay");
    app->add_option("--refit-period", refit_period, "SPCI forest refit period (0: fit once)");
    app->add_option("--epochs", epochs, "transformer max epochs");
    app->add_option("--patience", patience, "early-stopping patience (0: off)");
    app->add_option("--lr", learning_rate, "transformer learning rate");
    app->add_option("--d-model", d_model, "transformer width");
    app->add_option("--dropout", dropout, "transformer dropout");
    app->add_option("--trees", trees, "trees in the LOO point forest");
    app->add_option("--qrf-trees", qrf_trees, "trees in the SPCI quantile forest");
    app->add_flag("--qrf-residual-only", residual_only, "QRF features: lagged residuals only");
    app->add_flag("--zero-fill", zero_fill, "multi-step gaps filled with 0 instead of the median");
  }

  bench::MethodConfig build(const std::string& family, bool method_given) const {
    bench::MethodConfig c;
    c.transformer = bench::transformer_preset(preset.value_or(family));
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ValidationError("cannot open config " + config_path);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      auto j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded()) throw ValidationError("config " + config_path + " is not valid JSON");
      if (!j.contains("transformer")) {
        j["transformer"] = nlohmann::json::parse(bench::method_config_to_json(c)).at("transformer");
      }
      c = bench::method_config_from_json(j.dump());
    }
    if (method_given || config_path.empty()) c.method = bench::parse_method(method);
    if (alpha) c.alpha = *alpha;
    if (window) c.window = *window;
    if (horizon) c.horizon = *horizon;
    if (rho) c.nexcp_rho = *rho;
    if (refit_period) c.refit_period = *refit_period;
    if (epochs) c.transformer.max_epochs = *epochs;
    if (patience) c.transformer.patience = *patience;
    if (learning_rate) c.transformer.learning_rate = *learning_rate;
    if (d_model) c.transformer.d_model = *d_model;
    if (dropout) c.transformer.dropout = *dropout;
    if (trees) c.point_forest.n_trees = *trees;
    if (qrf_trees) c.quantile_forest.n_trees = *qrf_trees;
    if (residual_only) c.qrf_residual_only = true;
    if (zero_fill) c.gap_fill = conformal::GapFill::kZero;
    SignificanceLevel check(c.alpha);
    (void)check;
    return c;
  }
};

void write_run_outputs(const bench::RunResult& run, const bench::MethodConfig& cfg,
                       const std::string& source, const fs::path& dir) {
  fs::create_directories(dir);
  conformal::write_trace_csv(run.trace, dir / "trace.csv");
  bench::write_manifest(run, cfg, source, dir / "manifest.json");
}

std::string run_dir_name(const bench::RunResult& r) {
  std::string m = bench::method_name(r.method);
  for (char& c : m) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return r.dataset + "_" + m + "_w" + std::to_string(r.window) + "_s" +
         std::to_string(r.horizon) + "_seed" + std::to_string(r.seed);
}

int cmd_simulate(const std::string& kind, std::uint64_t seed, std::size_t T, std::size_t d,
                 double rho, double sparsity, bool pure, const std::string& out) {
  datagen::SimulationSpec spec;
  spec.kind = parse_kind(kind);
  spec.seed = seed;
  spec.T = T;
  spec.d = d;
  spec.ar_rho = rho;
  spec.sparsity = sparsity;
  spec.pure_innovation = pure;
  const auto sim = stage("simulate", [&] { return datagen::simulate(spec); });
  const fs::path path = out.empty() ? default_output_dir() / (kind + ".csv") : fs::path(out);
  stage("write", [&] {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    datagen::write_simulation_csv(sim, path);
  });
  std::printf("wrote %s (%zu rows, d=%zu)\n", path.string().c_str(), sim.series.size(),
              sim.series.dim());
  return 0;
}

int cmd_ingest(const DatasetOptions& opts) {
  const auto series = stage("ingest", [&] {
    return datagen::load_csv(opts.dataset, opts.resolve_schema("simulated"));
  });
  const auto plan = datagen::split(series.size(), datagen::SplitMode::kTrainValTest);
  nlohmann::json summary = {{"path", opts.dataset},
                            {"rows", series.size()},
                            {"features", series.feature_names()},
                            {"split_8_1_1", {plan.train_size(), plan.val_size(), plan.test_size()}}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_train(const DatasetOptions& dopts, const MethodOptions& mopts, std::uint64_t seed,
              const std::string& out, const std::string& loss_csv) {
  auto cfg = stage("config", [&] { return mopts.build(dopts.family(), false); });
  cfg.method = bench::Method::kSpciT;
  const auto ds = stage("config", [&] { return dopts.spec(); });
  bench::ExperimentSession session =
      stage("prepare", [&] { return bench::ExperimentSession(ds, seed, cfg.point_forest); });
  const auto& trained = stage("train", [&]() -> const bench::TrainedTransformer& {
    return session.transformer(cfg);
  });
  const fs::path path = out.empty() ? default_output_dir() / "model.json" : fs::path(out);
  stage("write", [&] {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    tdqr::save_checkpoint(trained.model,
                          {trained.result.best_epoch, trained.result.best_val_loss,
                           trained.result.epochs_run, "dataset=" + dopts.dataset +
                                                          " seed=" + std::to_string(seed)},
                          path);
    if (!loss_csv.empty()) tdqr::write_loss_csv(trained.result.history, loss_csv);
  });
  std::printf("wrote %s (best epoch %zu of %zu, val loss %.6g)\n", path.string().c_str(),
              trained.result.best_epoch, trained.result.epochs_run, trained.result.best_val_loss);
  return 0;
}

int cmd_evaluate(const DatasetOptions& dopts, const MethodOptions& mopts, bool method_given,
                 std::uint64_t seed, const std::string& checkpoint, const std::string& out_dir,
                 bool plot) {
  const auto cfg = stage("config", [&] { return mopts.build(dopts.family(), method_given); });
  const auto ds = stage("config", [&] { return dopts.spec(); });
  bench::ExperimentSession session =
      stage("prepare", [&] { return bench::ExperimentSession(ds, seed, cfg.point_forest); });
  if (!checkpoint.empty()) {
    stage("checkpoint", [&] {
      tdqr::CheckpointMetadata meta;
      auto model = tdqr::load_checkpoint(checkpoint, &meta);
      session.adopt_transformer(cfg, std::move(model), meta);
    });
  }
  const auto run = stage("evaluate", [&] { return session.run(cfg); });
  const fs::path dir = out_dir.empty() ? default_output_dir() / run_dir_name(run) : fs::path(out_dir);
  stage("write", [&] {
    write_run_outputs(run, cfg, dopts.dataset, dir);
    if (plot) {
      bench::write_band_csv(run.trace, dir / "band.csv");
      bench::write_band_svg(run.trace, bench::method_name(run.method) + " on " + run.dataset,
                            dir / "band.svg");
    }
  });
  std::printf("%s %s seed %llu: coverage %s, width %s, infinite %zu -> %s\n",
              bench::method_name(run.method).c_str(), run.dataset.c_str(),
              static_cast<unsigned long long>(seed), bench::format_sig4(run.coverage).c_str(),
              bench::format_sig4(run.mean_width).c_str(), run.infinite_count,
              dir.string().c_str());
  return 0;
}

struct BenchmarkOptions {
  std::string suite = "simulated";
  std::string seeds = "0,1,2";
  std::string windows;
  std::string horizons = "1";
  std::string methods = "spci-t,spci,enbpi,nexcp";
  std::string data_dir = "data";
  std::string out_dir;
  std::size_t jobs = 1;
};

int cmd_benchmark(const BenchmarkOptions& b, const MethodOptions& mopts) {
  const auto seeds = stage("config", [&] { return parse_numbers<std::uint64_t>(b.seeds, "seed"); });
  const auto horizons =
      stage("config", [&] { return parse_numbers<std::size_t>(b.horizons, "horizon"); });
  std::vector<bench::Method> methods;
  stage("config", [&] {
    for (const auto& m : split_list(b.methods)) methods.push_back(bench::parse_method(m));
  });

  // Each dataset comes with the family used to pick transformer presets.
  std::vector<std::pair<bench::DatasetSpec, std::string>> datasets;
  std::string default_windows = "100";
  stage("config", [&] {
    if (b.suite == "simulated") {
      for (auto kind : {datagen::SimulationKind::kNonstationary,
                        datagen::SimulationKind::kHeteroskedastic}) {
        bench::DatasetSpec ds;
        datagen::SimulationSpec sim;
        sim.kind = kind;
        ds.simulation = sim;
        ds.name = kind == datagen::SimulationKind::kNonstationary ? "nonstationary"
                                                                  : "heteroskedastic";
        datasets.emplace_back(ds, "simulated");
      }
    } else if (b.suite == "real" || b.suite == "solar_hourly") {
      default_windows = "50,100";
      const std::vector<std::string> names =
          b.suite == "real" ? std::vector<std::string>{"wind", "electricity", "solar"}
                            : std::vector<std::string>{"solar_hourly"};
      for (const auto& name : names) {
        bench::DatasetSpec ds;
        ds.name = name;
        ds.schema = datagen::builtin_schema(name);
        const std::string file = name == "solar_hourly" ? "solar" : name;
        ds.csv = fs::path(b.data_dir) / (file + ".csv");
        if (!fs::exists(ds.csv)) {
          throw ValidationError("missing " + ds.csv.string() +
                                " (place the dataset CSV there or pass --data-dir)");
        }
        datasets.emplace_back(ds, name);
      }
    } else {
      throw ValidationError("unknown suite '" + b.suite + "' (simulated, real, solar_hourly)");
    }
  });
  const auto windows = stage("config", [&] {
    return parse_numbers<std::size_t>(b.windows.empty() ? default_windows : b.windows, "window");
  });

  struct Job {
    std::size_t dataset;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (auto s : seeds) jobs.push_back({d, s});
  }
  const fs::path out = b.out_dir.empty() ? default_output_dir() / ("benchmark_" + b.suite)
                                         : fs::path(b.out_dir);
  fs::create_directories(out);

  std::vector<std::vector<bench::RunResult>> per_job(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& [ds, family] = datasets[jobs[j].dataset];
      try {
        auto base = mopts.build(family, false);
        bench::ExperimentSession session(ds, jobs[j].seed, base.point_forest);
        for (auto w : windows) {
          for (auto m : methods) {
            for (auto s : horizons) {
              if (s > 1 && (m == bench::Method::kEnbpi || m == bench::Method::kNexcp)) continue;
              auto cfg = base;
              cfg.method = m;
              cfg.window = w;
              cfg.horizon = s;
              auto run = session.run(cfg);
              const std::string description =
                  ds.simulation ? "sim:" + ds.name
                                : ds.csv.string() + " (schema " + ds.schema.name + ")";
              write_run_outputs(run, cfg, description, out / "runs" / run_dir_name(run));
              {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::printf("%-16s %-7s w=%-3zu s=%zu seed=%-3llu coverage %s width %s\n",
                            ds.name.c_str(), bench::method_name(m).c_str(), w, s,
                            static_cast<unsigned long long>(jobs[j].seed),
                            bench::format_sig4(run.coverage).c_str(),
                            bench::format_sig4(run.mean_width).c_str());
                std::fflush(stdout);
              }
              run.trace = {};
              per_job[j].push_back(std::move(run));
            }
          }
        }
      } catch (const std::exception& e) {
        errors[j] = ds.name + " seed " + std::to_string(jobs[j].seed) + ": " + e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(b.jobs, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw StageError("benchmark", e);
  }

  std::vector<bench::RunResult> all;
  for (auto& v : per_job) {
    for (auto& r : v) all.push_back(std::move(r));
  }
  const auto rows = bench::aggregate_all(all);
  stage("report", [&] {
    bench::write_report_markdown(rows, out / "report.md");
    bench::write_report_csv(rows, out / "report.csv");
    bench::write_report_json(rows, out / "report.json");
  });
  std::ifstream md(out / "report.md");
  std::cout << md.rdbuf();
  return 0;
}

int cmd_plot(const std::string& trace_path, double alpha, const std::string& prefix,
             const std::string& title) {
  const auto trace = stage("plot", [&] {
    return conformal::read_trace_csv(trace_path, SignificanceLevel(alpha));
  });
  const fs::path base = prefix.empty() ? fs::path(trace_path).replace_extension() : fs::path(prefix);
  stage("write", [&] {
    if (base.has_parent_path()) fs::create_directories(base.parent_path());
    bench::write_band_csv(trace, base.string() + "_band.csv");
    bench::write_band_svg(trace, title.empty() ? fs::path(trace_path).stem().string() : title,
                          base.string() + "_band.svg");
  });
  std::printf("wrote %s_band.csv and %s_band.svg\n", base.string().c_str(), base.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential predictive conformal intervals with a transformer quantile model"};
  app.set_version_flag("--version", bench::version_string());
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "write a simulated series to CSV");
  std::string kind = "nonstationary", sim_out;
  std::uint64_t sim_seed = 0;
  std::size_t sim_T = 2000, sim_d = 10;
  double sim_rho = 0.6, sim_sparsity = 0.2;
  bool sim_pure = false;
  sim->add_option("--kind", kind, "nonstationary or heteroskedastic")->capture_default_str();
  sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  sim->add_option("--T", sim_T, "series length")->capture_default_str();
  sim->add_option("--d", sim_d, "feature dimension")->capture_default_str();
  sim->add_option("--rho", sim_rho, "AR(1) coefficient of the noise")->capture_default_str();
  sim->add_option("--sparsity", sim_sparsity, "fraction of nonzero beta entries")
      ->capture_default_str();
  sim->add_flag("--pure-innovation", sim_pure,
                "heteroskedastic: innovation sd sigma(X) without the sqrt(1 - rho^2) factor");
  sim->add_option("--out,-o", sim_out, "output CSV (default $SPCIT_OUTPUT_DIR/<kind>.csv)");

  auto* ingest = app.add_subcommand("ingest", "validate a CSV against a dataset schema");
  DatasetOptions ingest_ds;
  ingest->add_option("--csv", ingest_ds.dataset, "CSV file")->required();
  ingest->add_option("--schema", ingest_ds.schema, "schema name")->required();
  ingest->add_option("--schema-file", ingest_ds.schema_file, "JSON schema file");

  auto* train = app.add_subcommand("train", "train the transformer quantile model");
  DatasetOptions train_ds;
  MethodOptions train_m;
  std::uint64_t train_seed = 0;
  std::string train_out, train_loss;
  train_ds.attach(train);
  train_m.attach(train, false);
  train->add_option("--seed", train_seed, "random seed")->capture_default_str();
  train->add_option("--out,-o", train_out, "checkpoint path");
  train->add_option("--loss-csv", train_loss, "write the loss curve here");

  auto* eval = app.add_subcommand("evaluate", "run one method on one dataset and seed");
  DatasetOptions eval_ds;
  MethodOptions eval_m;
  std::uint64_t eval_seed = 0;
  std::string eval_ckpt, eval_out;
  bool eval_plot = false;
  eval_ds.attach(eval);
  eval_m.attach(eval, true);
  eval->add_option("--seed", eval_seed, "random seed")->capture_default_str();
  eval->add_option("--checkpoint", eval_ckpt, "use a trained SPCI-T checkpoint");
  eval->add_option("--out-dir", eval_out, "directory for trace.csv and manifest.json");
  eval->add_flag("--plot", eval_plot, "also write band.csv and band.svg");

  auto* bm = app.add_subcommand("benchmark", "run a method x dataset x seed matrix");
  BenchmarkOptions bopts;
  MethodOptions bench_m;
  bm->add_option("--suite", bopts.suite, "simulated, real or solar_hourly")->capture_default_str();
  bm->add_option("--seeds", bopts.seeds, "comma-separated seeds")->capture_default_str();
  bm->add_option("--w", bopts.windows, "comma-separated windows (default 100; real: 50,100)");
  bm->add_option("--horizons", bopts.horizons, "comma-separated horizons s")->capture_default_str();
  bm->add_option("--methods", bopts.methods, "comma-separated methods")->capture_default_str();
  bm->add_option("--data-dir", bopts.data_dir, "directory with wind/electricity/solar CSVs")
      ->capture_default_str();
  bm->add_option("--out-dir", bopts.out_dir, "report directory");
  bm->add_option("--jobs,-j", bopts.jobs, "parallel (dataset, seed) jobs")->capture_default_str();
  bench_m.attach(bm, false, false);

  auto* plot = app.add_subcommand("plot", "turn an interval trace into band plot files");
  std::string plot_trace, plot_prefix, plot_title;
  double plot_alpha = 0.1;
  plot->add_option("--trace", plot_trace, "trace CSV from evaluate")->required();
  plot->add_option("--alpha", plot_alpha, "miscoverage level of the trace")->capture_default_str();
  plot->add_option("--out-prefix", plot_prefix, "output prefix (default: trace path)");
  plot->add_option("--title", plot_title, "plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      return cmd_simulate(kind, sim_seed, sim_T, sim_d, sim_rho, sim_sparsity, sim_pure, sim_out);
    }
    if (*ingest) return cmd_ingest(ingest_ds);
    if (*train) return cmd_train(train_ds, train_m, train_seed, train_out, train_loss);
    if (*eval) {
      return cmd_evaluate(eval_ds, eval_m, eval->count("--method") > 0, eval_seed, eval_ckpt,
                          eval_out, eval_plot);
    }
    if (*bm) return cmd_benchmark(bopts, bench_m);
    if (*plot) return cmd_plot(plot_trace, plot_alpha, plot_prefix, plot_title);
  } catch (const StageError& e) {
    std::fprintf(stderr, "spcit %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spcit: %s\n", e.what());
    return 1;
  }
  return 1;
}
