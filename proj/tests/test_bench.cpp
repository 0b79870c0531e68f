#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "doctest.h"
#include "json.hpp"
#include "spcit/bench.hpp"

using namespace spcit;
using namespace spcit::bench;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RunResult fake_run(std::uint64_t seed, double coverage, double width, std::size_t inf = 0) {
  RunResult r;
  r.method = Method::kNexcp;
  r.dataset = "toy";
  r.seed = seed;
  r.window = 100;
  r.coverage = coverage;
  r.mean_width = width;
  r.infinite_count = inf;
  return r;
}

conformal::IntervalTrace small_trace() {
  conformal::IntervalTrace t;
  const SignificanceLevel a(0.1);
  t.push(PredictionInterval(10, -1.0, 2.0, a), 0.5, 0.4);
  t.push(PredictionInterval(11, -3.0, 1.0, a), 1.5, 0.0);
  t.push(PredictionInterval(12, 0.0, kInf, a), 4.0, 1.0);
  t.push(PredictionInterval(13, -2.0, 5.0, a), -2.5, 1.0);
  return t;
}

DatasetSpec small_sim(datagen::SimulationKind kind, std::size_t T) {
  DatasetSpec ds;
  ds.name = "small";
  datagen::SimulationSpec s;
  s.kind = kind;
  s.T = T;
  ds.simulation = s;
  return ds;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (auto m : {Method::kSpciT, Method::kSpci, Method::kEnbpi, Method::kNexcp}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(parse_method("spci-t") == Method::kSpciT);
  CHECK(parse_method("SPCIT") == Method::kSpciT);
  CHECK(parse_method("nexcp") == Method::kNexcp);
  CHECK(parse_method("qrf") == Method::kSpci);
  CHECK_THROWS_AS(parse_method("tcp"), ValidationError);
}

TEST_CASE("coverage equals one minus the violation rate") {
  const auto t = small_trace();
  std::size_t violations = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.y_true[i] < t.intervals[i].lower || t.y_true[i] > t.intervals[i].upper) ++violations;
  }
  CHECK(empirical_coverage(t.intervals, t.y_true) ==
        doctest::Approx(1.0 - static_cast<double>(violations) / 4.0));
  CHECK(empirical_coverage(t.intervals, t.y_true) == 0.5);
  CHECK_THROWS_AS(empirical_coverage(t.intervals, std::vector<double>{1.0}), StructuralError);
}

TEST_CASE("mean width skips infinite intervals and counts them") {
  const auto t = small_trace();
  const auto w = mean_width(t.intervals);
  CHECK(w.infinite_count == 1);
  CHECK(w.mean == doctest::Approx((3.0 + 4.0 + 7.0) / 3.0));
  std::vector<PredictionInterval> all_inf = {PredictionInterval(1, -kInf, kInf, SignificanceLevel(0.1))};
  CHECK(std::isinf(mean_width(all_inf).mean));
}

TEST_CASE("aggregation uses the n - 1 deviation and ignores seed order") {
  const std::vector<RunResult> a = {fake_run(0, 0.9, 10.0), fake_run(1, 0.8, 12.0),
                                    fake_run(2, 0.95, 14.0, 2)};
  std::vector<RunResult> b = {a[2], a[0], a[1]};
  const auto ra = aggregate(a);
  const auto rb = aggregate(b);
  CHECK(ra == rb);
  CHECK(ra.n_seeds == 3);
  CHECK(ra.width_mean == doctest::Approx(12.0));
  CHECK(ra.width_std == doctest::Approx(2.0));
  CHECK(ra.coverage_mean == doctest::Approx((0.9 + 0.8 + 0.95) / 3));
  CHECK(ra.infinite_count == 2);
  CHECK_FALSE(ra.single_seed);

  const auto one = aggregate(std::vector<RunResult>{fake_run(4, 0.9, 3.0)});
  CHECK(one.single_seed);
  CHECK(one.width_std == 0.0);

  auto other = fake_run(3, 0.9, 1.0);
  other.method = Method::kEnbpi;
  CHECK_THROWS_AS(aggregate(std::vector<RunResult>{a[0], other}), StructuralError);
  CHECK_THROWS_AS(aggregate(std::vector<RunResult>{a[0], a[0]}), ValidationError);
  const auto rows = aggregate_all({a[0], other, a[1]});
  CHECK(rows.size() == 2);
}

TEST_CASE("report files") {
  auto unbounded = fake_run(0, 1.0, kInf, 200);
  unbounded.dataset = "toy2";
  const auto rows = aggregate_all({fake_run(0, 0.9, 10.123456789), fake_run(1, 0.8, 12.0), unbounded});
  const auto dir = fs::temp_directory_path() / "spcit_reports";
  fs::create_directories(dir);
  write_report_json(rows, dir / "r.json");
  CHECK(read_report_json(dir / "r.json") == rows);

  CHECK(std::isinf(read_report_json(dir / "r.json")[1].width_mean));

  write_report_markdown(rows, dir / "r.md");
  const auto md = slurp(dir / "r.md");
  CHECK(md.find("| toy | NexCP | 100 | 1 | 0.1 | 2 |") != std::string::npos);
  CHECK(md.find("11.06") != std::string::npos);

  write_report_csv(rows, dir / "r.csv");
  const auto csv = slurp(dir / "r.csv");
  CHECK(csv.find("11.0617283945") != std::string::npos);
  fs::remove_all(dir);
  CHECK(format_sig4(123456.0) == "1.235e+05");
  CHECK(format_sig4(0.912345) == "0.9123");
  CHECK(format_sig4(-kInf) == "-inf");
}

TEST_CASE("band CSV and SVG") {
  const auto t = small_trace();
  const auto dir = fs::temp_directory_path() / "spcit_band";
  fs::create_directories(dir);
  write_band_csv(t, dir / "b.csv");
  std::ifstream in(dir / "b.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,y_true,lower,upper");
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 4);

  write_band_svg(t, "A < B & C", dir / "b.svg");
  boost::property_tree::ptree tree;
  REQUIRE_NOTHROW(boost::property_tree::read_xml((dir / "b.svg").string(), tree));
  const auto& svg = tree.get_child("svg");
  CHECK(svg.get<std::string>("title") == "A < B & C");
  std::string band_points;
  for (const auto& g : svg) {
    if (g.first != "g") continue;
    for (const auto& child : g.second) {
      if (child.first == "polygon" && child.second.get<std::string>("<xmlattr>.id") == "band") {
        band_points = child.second.get<std::string>("<xmlattr>.points");
      }
    }
  }
  REQUIRE_FALSE(band_points.empty());
  double ymin = kInf, ymax = -kInf;
  std::stringstream ss(band_points);
  for (std::string pt; ss >> pt;) {
    const double y = std::stod(pt.substr(pt.find(',') + 1));
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  // Finite extent of the trace: lower -3, upper 5 (the infinite bound is clipped).
  CHECK(ymin == -3.0);
  CHECK(ymax == 5.0);
  fs::remove_all(dir);
}

TEST_CASE("method config JSON round-trip") {
  MethodConfig c;
  c.method = Method::kSpci;
  c.alpha = 0.05;
  c.window = 50;
  c.horizon = 3;
  c.nexcp_rho = 0.95;
  c.refit_period = 10;
  c.point_forest.n_trees = 7;
  c.quantile_forest.tree.min_leaf_size = 3;
  c.qrf_residual_only = true;
  c.gap_fill = conformal::GapFill::kZero;
  c.transformer = transformer_preset("wind");
  c.transformer.patience = 9;
  const auto back = method_config_from_json(method_config_to_json(c));
  CHECK(back.method == c.method);
  CHECK(back.alpha == c.alpha);
  CHECK(back.window == 50);
  CHECK(back.horizon == 3);
  CHECK(back.nexcp_rho == 0.95);
  CHECK(back.refit_period == 10);
  CHECK(back.point_forest.n_trees == 7);
  CHECK(back.quantile_forest.tree.min_leaf_size == 3);
  CHECK(back.qrf_residual_only);
  CHECK(back.gap_fill == conformal::GapFill::kZero);
  CHECK(back.transformer.d_model == 32);
  CHECK(back.transformer.dropout == 0.1);
  CHECK(back.transformer.patience == 9);
  CHECK(back.transformer.additional_training);
  CHECK_THROWS_AS(method_config_from_json("{"), ValidationError);
  CHECK_THROWS_AS(method_config_from_json(R"({"gap_fill":"mean"})"), ValidationError);
  CHECK_THROWS_AS(method_config_from_json(R"({"window":"wide"})"), ValidationError);
}

TEST_CASE("transformer presets") {
  const auto sim = transformer_preset("simulated");
  CHECK(sim.d_model == 16);
  CHECK(sim.n_heads == 4);
  CHECK(sim.n_layers == 4);
  CHECK(sim.batch_size == 4);
  CHECK(sim.learning_rate == 5e-4);
  CHECK(sim.dropout == 0.2);
  CHECK(sim.max_epochs == 100);
  CHECK(sim.patience == 15);
  CHECK(transformer_preset("wind").learning_rate == 1e-4);
  CHECK_FALSE(sim.additional_training);
  CHECK(transformer_preset("electricity").additional_training);
  CHECK(transformer_preset("solar").learning_rate == 5e-4);
  const auto sh = transformer_preset("solar_hourly");
  CHECK(sh.learning_rate == 5e-4);
  CHECK(sh.d_model == 32);
  CHECK(sh.dropout == 0.2);
  CHECK_THROWS_AS(transformer_preset("tides"), ValidationError);
}

TEST_CASE("prepared data: LOO residuals on the fitting rows") {
  const auto ds = small_sim(datagen::SimulationKind::kNonstationary, 300);
  ExperimentSession session(ds, 1);
  const auto& d = session.data();
  CHECK(d.series.size() == 300);
  CHECK(d.residuals.size() == 300);
  CHECK(d.plan.train_end == 240);
  CHECK(d.plan.val_end == 270);
  CHECK(d.true_noise.size() == 300);
  for (std::size_t t = 0; t < 300; ++t) {
    CHECK(d.residuals.residual(t) ==
          doctest::Approx(d.series.outcome(t) - d.residuals.prediction(t)).epsilon(1e-12));
  }
}

TEST_CASE("baseline runs are reproducible and manifests replay them") {
  const auto ds = small_sim(datagen::SimulationKind::kHeteroskedastic, 400);
  MethodConfig c;
  c.window = 20;
  c.quantile_forest.n_trees = 5;
  for (auto m : {Method::kNexcp, Method::kEnbpi, Method::kSpci}) {
    CAPTURE(method_name(m));
    c.method = m;
    const auto a = run_experiment(ds, c, 3);
    const auto b = run_experiment(ds, c, 3);
    CHECK(a.trace.size() == 40);
    CHECK(a.coverage == b.coverage);
    CHECK(a.mean_width == b.mean_width);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(a.trace.intervals[i].lower == b.trace.intervals[i].lower);
      CHECK(a.trace.intervals[i].upper == b.trace.intervals[i].upper);
    }
    const auto path = fs::temp_directory_path() / "spcit_manifest.json";
    write_manifest(a, c, "sim:heteroskedastic", path);
    const auto doc = nlohmann::json::parse(slurp(path));
    fs::remove(path);
    CHECK(doc.at("seed").get<std::uint64_t>() == 3);
    CHECK(doc.at("version").get<std::string>() == version_string());
    const auto replay = method_config_from_json(doc.at("config").dump());
    CHECK(run_experiment(ds, replay, 3).mean_width == a.mean_width);
  }
}

TEST_CASE("run validation") {
  const auto ds = small_sim(datagen::SimulationKind::kNonstationary, 300);
  ExperimentSession session(ds, 0);
  MethodConfig c;
  c.window = 10;
  c.method = Method::kNexcp;
  c.horizon = 2;
  CHECK_THROWS_AS(session.run(c), ValidationError);
  c.method = Method::kSpciT;
  c.horizon = 1;
  c.refit_period = 5;
  CHECK_THROWS_AS(session.run(c), ValidationError);
  c.refit_period = 0;
  c.window = 290;
  CHECK_THROWS_AS(session.run(c), ValidationError);
}

TEST_CASE("a checkpointed transformer is adopted only for a matching config") {
  const auto ds = small_sim(datagen::SimulationKind::kNonstationary, 200);
  ExperimentSession session(ds, 0);
  MethodConfig c;
  c.method = Method::kSpciT;
  c.window = 8;
  c.transformer = transformer_preset("simulated");
  c.transformer.d_model = 8;
  c.transformer.n_heads = 2;
  c.transformer.n_layers = 1;
  c.transformer.max_epochs = 2;
  const auto& trained = session.transformer(c);
  const auto run = session.run(c);
  REQUIRE(run.training);
  CHECK(run.training->epochs_run == 2);

  ExperimentSession fresh(ds, 0);
  fresh.adopt_transformer(c, trained.model, {trained.result.best_epoch, trained.result.best_val_loss,
                                             trained.result.epochs_run, ""});
  const auto again = fresh.run(c);
  for (std::size_t i = 0; i < run.trace.size(); ++i) {
    CHECK(again.trace.intervals[i].lower == run.trace.intervals[i].lower);
  }
  MethodConfig wider = c;
  wider.window = 9;
  CHECK_THROWS_AS(fresh.adopt_transformer(wider, trained.model, {}), ValidationError);
}
