#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "spcit/datagen.hpp"

using namespace spcit;
using namespace spcit::datagen;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const auto path = fs::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

double lag1_autocorrelation(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i > 0) num += (x[i] - m) * (x[i - 1] - m);
  }
  return num / den;
}

}  // namespace

TEST_CASE("envelope, link and amplitude closed forms") {
  CHECK(envelope(25) == doctest::Approx(std::log(25.0)));
  CHECK(envelope(50) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(envelope(125) == doctest::Approx(std::log(25.0)));
  // mod(t, 100) = 0 uses t' = 100, where sin(2 pi) = 0.
  CHECK(std::isfinite(envelope(200)));
  CHECK(std::abs(envelope(200)) < 1e-12);
  CHECK(link(1.0) == doctest::Approx(std::pow(3.0, 0.25)));
  CHECK(link(-1.0) == doctest::Approx(std::pow(3.0, 0.25)));
  CHECK(link(0.0) == 0.0);
  CHECK(feature_amplitude(50) == doctest::Approx(std::exp(0.5)));
  CHECK(feature_amplitude(100) == 1.0);
}

TEST_CASE("spec validation") {
  SimulationSpec s;
  s.T = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.ar_rho = 1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.sparsity = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("non-stationary simulator structure") {
  SimulationSpec spec;
  spec.seed = 3;
  const auto sim = gen_nonstationary(spec);
  CHECK(sim.series.size() == 2000);
  CHECK(sim.series.dim() == 10);
  CHECK(sim.series.t0() == 1);

  std::size_t nonzero = 0;
  for (double b : sim.beta) {
    if (b != 0.0) {
      ++nonzero;
      CHECK(b > 0.0);
      CHECK(b < 1.0);
    }
  }
  CHECK(nonzero == 2);

  double first_cycle_early = 0.0, first_cycle_late = 0.0;
  for (std::size_t r = 0; r < sim.series.size(); ++r) {
    const auto t = sim.series.time_of(r);
    const auto x = sim.series.feature(r);
    for (double v : x) {
      CHECK(v >= 0.0);
      CHECK(v < feature_amplitude(t));
    }
    if (t <= 20) first_cycle_early = std::max(first_cycle_early, *std::max_element(x.begin(), x.end()));
    if (t >= 80 && t < 100) {
      first_cycle_late = std::max(first_cycle_late, *std::max_element(x.begin(), x.end()));
    }
    double bx = 0.0;
    for (std::size_t j = 0; j < 10; ++j) bx += sim.beta[j] * x[j];
    const double f = envelope(t) * link(bx);
    CHECK(sim.series.outcome(r) == doctest::Approx(f + sim.true_noise[r]).epsilon(1e-12));
  }
  CHECK(first_cycle_late > first_cycle_early);
  // t = 50: the envelope vanishes and Y is pure noise.
  CHECK(std::abs(sim.series.outcome(49) - sim.true_noise[49]) < 1e-12);
}

TEST_CASE("simulators are deterministic in the seed") {
  SimulationSpec spec;
  spec.T = 300;
  spec.seed = 11;
  const auto a = simulate(spec);
  const auto b = simulate(spec);
  CHECK(a.series.features() == b.series.features());
  CHECK(a.true_noise == b.true_noise);
  spec.seed = 12;
  CHECK(simulate(spec).true_noise != a.true_noise);
  spec.kind = SimulationKind::kHeteroskedastic;
  CHECK_THROWS_AS(gen_nonstationary(spec), ValidationError);
}

TEST_CASE("AR(1) lag-1 autocorrelation") {
  SimulationSpec spec;
  spec.T = 100000;
  spec.d = 1;
  spec.sparsity = 1.0;
  spec.seed = 5;
  const auto sim = gen_nonstationary(spec);
  CHECK(lag1_autocorrelation(sim.true_noise) == doctest::Approx(0.6).epsilon(0.02 / 0.6));
}

TEST_CASE("heteroskedastic simulator scales the innovation by sum(X)") {
  SimulationSpec spec;
  spec.kind = SimulationKind::kHeteroskedastic;
  spec.seed = 2;
  spec.T = 500;
  const auto sim = gen_heteroskedastic(spec);
  for (std::size_t r = 1; r < sim.series.size(); ++r) {
    const auto x = sim.series.feature(r);
    const double sigma = std::accumulate(x.begin(), x.end(), 0.0);
    double bx = 0.0;
    for (std::size_t j = 0; j < 10; ++j) bx += sim.beta[j] * x[j];
    CHECK(sim.series.outcome(r) == doctest::Approx(link(bx) + sim.true_noise[r]).epsilon(1e-12));
    // The innovation divided by its scale is a standard normal draw; it is
    // bounded well inside 7 sd for 500 draws.
    const double e = sim.true_noise[r] - 0.6 * sim.true_noise[r - 1];
    CHECK(std::abs(e / (sigma * std::sqrt(1 - 0.36))) < 7.0);
  }
  spec.pure_innovation = true;
  const auto pure = gen_heteroskedastic(spec);
  const auto x = pure.series.feature(0);
  const double sigma = std::accumulate(x.begin(), x.end(), 0.0);
  CHECK(pure.true_noise[0] / sim.true_noise[0] == doctest::Approx(1.0 / std::sqrt(1 - 0.36)));
  CHECK(std::abs(pure.true_noise[0] / sigma) < 7.0);
}

TEST_CASE("heteroskedastic innovations have unit variance once scaled") {
  SimulationSpec spec;
  spec.kind = SimulationKind::kHeteroskedastic;
  spec.T = 100000;
  spec.seed = 9;
  const auto sim = gen_heteroskedastic(spec);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t r = 1; r < sim.series.size(); ++r) {
    const auto x = sim.series.feature(r);
    const double sigma = std::accumulate(x.begin(), x.end(), 0.0);
    const double z = (sim.true_noise[r] - 0.6 * sim.true_noise[r - 1]) / (sigma * 0.8);
    sum += z;
    sum2 += z * z;
  }
  const double n = static_cast<double>(sim.series.size() - 1);
  CHECK(std::abs(sum / n) < 0.015);
  CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("simulation CSV columns") {
  SimulationSpec spec;
  spec.T = 5;
  spec.d = 2;
  spec.sparsity = 0.5;
  const auto sim = simulate(spec);
  const auto path = fs::temp_directory_path() / "spcit_sim.csv";
  write_simulation_csv(sim, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2,y,eps_true");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 5);
  const auto back = load_csv(path, builtin_schema("simulated"));
  fs::remove(path);
  CHECK(back.dim() == 2);
  CHECK(back.outcome(3) == sim.series.outcome(3));
  CHECK(back.feature(4)[1] == sim.series.feature(4)[1]);
}

TEST_CASE("CSV ingestion errors name row and column") {
  const auto schema = builtin_schema("electricity");
  const auto ok = write_temp("spcit_ok.csv",
                             "transfer,nswprice,vicprice,nswdemand,vicdemand,extra\n"
                             "1,2,3,4,5,9\n6,7,8,9,10,9\n11,12,13,14,15,9\n");
  const auto s = load_csv(ok, schema);
  CHECK(s.size() == 3);
  CHECK(s.dim() == 4);
  CHECK(s.feature_names() == std::vector<std::string>{"nswprice", "vicprice", "nswdemand", "vicdemand"});
  CHECK(s.feature(1)[0] == 7.0);
  CHECK(s.outcome(2) == 11.0);

  std::string text = "nswprice,vicprice,nswdemand,vicdemand,transfer\n";
  for (int r = 1; r <= 8; ++r) text += r == 7 ? "1,2,abc,4,5\n" : "1,2,3,4,5\n";
  const auto bad = write_temp("spcit_bad.csv", text);
  try {
    load_csv(bad, schema);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 7") != std::string::npos);
    CHECK(msg.find("nswdemand") != std::string::npos);
  }
  const auto missing = write_temp("spcit_missing.csv", "nswprice,vicprice,transfer\n1,2,3\n");
  CHECK_THROWS_WITH_AS(load_csv(missing, schema), doctest::Contains("nswdemand"), ValidationError);
  const auto empty = write_temp("spcit_empty.csv", "");
  CHECK_THROWS_AS(load_csv(empty, schema), ValidationError);
  const auto nan = write_temp("spcit_nan.csv",
                              "nswprice,vicprice,nswdemand,vicdemand,transfer\n1,2,3,4,nan\n");
  CHECK_THROWS_AS(load_csv(nan, schema), ValidationError);
  for (const auto& p : {ok, bad, missing, empty, nan}) fs::remove(p);
}

TEST_CASE("shipped sample files ingest under their schemas") {
  const fs::path dir = fs::path(SPCIT_DATA_DIR) / "samples";
  struct Case {
    const char* file;
    const char* schema;
    std::size_t dim;
  };
  for (const Case c : {Case{"solar_sample.csv", "solar", 7}, Case{"solar_sample.csv", "solar_hourly", 31},
                       Case{"wind_sample.csv", "wind", 9},
                       Case{"electricity_sample.csv", "electricity", 4}}) {
    CAPTURE(c.schema);
    const auto s = load_csv(dir / c.file, builtin_schema(c.schema));
    CHECK(s.size() == 96);
    CHECK(s.dim() == c.dim);
  }
}

TEST_CASE("schema file round-trip and the shipped schema file") {
  const auto builtins = builtin_schemas();
  const auto path = fs::temp_directory_path() / "spcit_schemas.json";
  save_schema_file(builtins, path);
  const auto back = load_schema_file(path);
  fs::remove(path);
  REQUIRE(back.size() == builtins.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].name == builtins[i].name);
    CHECK(back[i].feature_columns == builtins[i].feature_columns);
    CHECK(back[i].outcome_column == builtins[i].outcome_column);
    CHECK(back[i].ignore_columns == builtins[i].ignore_columns);
    CHECK(back[i].hourly_onehot == builtins[i].hourly_onehot);
    CHECK(back[i].samples_per_day == builtins[i].samples_per_day);
  }
  const auto shipped = load_schema_file(fs::path(SPCIT_DATA_DIR) / "schemas.json");
  REQUIRE(shipped.size() == builtins.size());
  for (std::size_t i = 0; i < shipped.size(); ++i) {
    CHECK(shipped[i].feature_columns == builtins[i].feature_columns);
    CHECK(shipped[i].outcome_column == builtins[i].outcome_column);
  }
  DatasetSchema clash{"x", {"a", "y"}, "y", {}, false, 0};
  CHECK_THROWS_AS(clash.validate(), ValidationError);
  CHECK_THROWS_AS(builtin_schema("nope"), ValidationError);
}

TEST_CASE("hourly one-hot encoding") {
  ObservationSeries s(Matrix(96, 1), std::vector<double>(96, 0.0), {"a"});
  const auto h = add_hourly_onehot(s, 48);
  CHECK(h.dim() == 25);
  CHECK(h.feature_names()[1] == "hour0");
  CHECK(h.feature_names()[24] == "hour23");
  CHECK(h.feature(0)[1] == 1.0);
  CHECK(h.feature(47)[24] == 1.0);
  CHECK(h.feature(48)[1] == 1.0);
  for (std::size_t r = 0; r < 96; ++r) {
    const auto x = h.feature(r);
    CHECK(std::accumulate(x.begin() + 1, x.end(), 0.0) == 1.0);
  }
  for (std::size_t c = 1; c < 25; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < 48; ++r) col += h.feature(r)[c];
    CHECK(col == 2.0);
  }
  CHECK_THROWS_AS(add_hourly_onehot(s, 36), ValidationError);
}

TEST_CASE("chronological splits share the test block") {
  const auto a = split(2000, SplitMode::kTrainValTest);
  CHECK(a.train_size() == 1600);
  CHECK(a.val_size() == 200);
  CHECK(a.test_size() == 200);
  const auto b = split(2000, SplitMode::kTrainTest);
  CHECK(b.train_size() == 1800);
  CHECK(b.val_size() == 0);
  CHECK(b.test_size() == 200);
  const auto c = split(10, SplitMode::kTrainValTest);
  CHECK(c.train_size() == 8);
  CHECK(c.val_size() == 1);
  CHECK(c.test_size() == 1);
  for (std::size_t T : {10u, 11u, 19u, 101u, 2003u}) {
    const auto p = split(T, SplitMode::kTrainValTest);
    const auto q = split(T, SplitMode::kTrainTest);
    CHECK(p.val_end == q.val_end);
    CHECK(p.test_size() == (T + 9) / 10);
    CHECK(p.train_end <= p.val_end);
    CHECK(p.total == T);
  }
  CHECK_THROWS_AS(split(9, SplitMode::kTrainTest), ValidationError);
}
