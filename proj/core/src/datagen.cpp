#include "spcit/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "spcit/rng.hpp"

namespace spcit::datagen {

void SimulationSpec::validate() const {
  if (T == 0) throw ValidationError("SimulationSpec: T must be >= 1");
  if (d == 0) throw ValidationError("SimulationSpec: d must be >= 1");
  if (!(ar_rho >= 0.0 && ar_rho < 1.0)) throw ValidationError("SimulationSpec: ar_rho must lie in [0, 1)");
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw ValidationError("SimulationSpec: sparsity must lie in (0, 1]");
  }
}

double envelope(std::int64_t t) {
  std::int64_t m = t % 100;
  if (m < 0) m += 100;
  const double tp = m == 0 ? 100.0 : static_cast<double>(m);
  return std::log(tp) * std::sin(2.0 * std::numbers::pi * tp / 100.0);
}

double link(double u) {
  const double a = std::abs(u);
  return std::pow(a + a * a + a * a * a, 0.25);
}

double feature_amplitude(std::int64_t t) {
  std::int64_t m = t % 100;
  if (m < 0) m += 100;
  return std::exp(0.01 * static_cast<double>(m));
}

namespace {

std::vector<double> draw_beta(std::size_t d, double sparsity, SplitMix64& rng) {
  const auto k = static_cast<std::size_t>(std::ceil(sparsity * static_cast<double>(d) - 1e-12));
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(d - i)]);
  std::vector<double> beta(d, 0.0);
  for (std::size_t i = 0; i < k; ++i) beta[idx[i]] = rng.uniform_open();
  return beta;
}

std::vector<std::string> x_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= d; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

Simulation generate(const SimulationSpec& spec, bool heteroskedastic) {
  spec.validate();
  SplitMix64 rng(derive_seed(spec.seed, seed_stream::kSimulation));
  std::vector<double> beta = draw_beta(spec.d, spec.sparsity, rng);
  const double innovation_scale =
      spec.pure_innovation ? 1.0 : std::sqrt(1.0 - spec.ar_rho * spec.ar_rho);

  Matrix X(spec.T, spec.d);
  std::vector<double> y(spec.T);
  std::vector<double> noise(spec.T);
  double eps = 0.0;
  for (std::size_t r = 0; r < spec.T; ++r) {
    const auto t = static_cast<std::int64_t>(r + 1);
    const double amp = feature_amplitude(t);
    double bx = 0.0;
    double sigma = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      const double x = rng.uniform() * amp;
      X(r, j) = x;
      bx += beta[j] * x;
      sigma += x;
    }
    const double e = rng.normal();
    if (heteroskedastic) {
      eps = spec.ar_rho * eps + sigma * innovation_scale * e;
      y[r] = link(bx) + eps;
    } else {
      eps = spec.ar_rho * eps + e;
      y[r] = envelope(t) * link(bx) + eps;
    }
    noise[r] = eps;
  }
  return {ObservationSeries(std::move(X), std::move(y), x_names(spec.d), 1), std::move(noise),
          std::move(beta)};
}

}  // namespace

Simulation gen_nonstationary(const SimulationSpec& spec) {
  if (spec.kind != SimulationKind::kNonstationary) {
    throw ValidationError("gen_nonstationary: spec kind is not nonstationary");
  }
  return generate(spec, false);
}

Simulation gen_heteroskedastic(const SimulationSpec& spec) {
  if (spec.kind != SimulationKind::kHeteroskedastic) {
    throw ValidationError("gen_heteroskedastic: spec kind is not heteroskedastic");
  }
  return generate(spec, true);
}

Simulation simulate(const SimulationSpec& spec) {
  return spec.kind == SimulationKind::kNonstationary ? gen_nonstationary(spec)
                                                     : gen_heteroskedastic(spec);
}

void write_simulation_csv(const Simulation& sim, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_simulation_csv: cannot open " + path.string());
  const auto& s = sim.series;
  out << "t";
  for (std::size_t j = 1; j <= s.dim(); ++j) out << ",x" << j;
  out << ",y,eps_true\n";
  char buf[64];
  for (std::size_t r = 0; r < s.size(); ++r) {
    out << s.time_of(r);
    for (double v : s.feature(r)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g", s.outcome(r));
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g\n", sim.true_noise[r]);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_simulation_csv: write failed for " + path.string());
}

void DatasetSchema::validate() const {
  if (name.empty()) throw ValidationError("DatasetSchema: empty name");
  if (outcome_column.empty()) throw ValidationError("DatasetSchema '" + name + "': no outcome column");
  if (std::find(feature_columns.begin(), feature_columns.end(), outcome_column) !=
      feature_columns.end()) {
    throw ValidationError("DatasetSchema '" + name + "': outcome column listed as a feature");
  }
  if (hourly_onehot && (samples_per_day == 0 || samples_per_day % 24 != 0)) {
    throw ValidationError("DatasetSchema '" + name +
                          "': samples_per_day must be a positive multiple of 24");
  }
}

std::vector<DatasetSchema> builtin_schemas() {
  const std::vector<std::string> solar_features = {"DNI",         "Dew Point",         "Surface Albedo",
                                                   "Wind Speed",  "Relative Humidity", "Temperature",
                                                   "Pressure"};
  std::vector<std::string> wind_features;
  for (int i = 2; i <= 10; ++i) wind_features.push_back("farm" + std::to_string(i));
  return {
      {"solar", solar_features, "DHI", {}, false, 48},
      {"solar_hourly", solar_features, "DHI", {}, true, 48},
      {"wind", wind_features, "farm1", {}, false, 96},
      {"electricity", {"nswprice", "vicprice", "nswdemand", "vicdemand"}, "transfer", {}, false, 48},
      {"simulated", {}, "y", {"t", "eps_true"}, false, 0},
  };
}

DatasetSchema builtin_schema(const std::string& name) {
  for (auto& s : builtin_schemas()) {
    if (s.name == name) return s;
  }
  throw ValidationError("unknown dataset schema '" + name + "'");
}

std::vector<DatasetSchema> load_schema_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_schema_file: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("load_schema_file: " + path.string() + ": " + e.what());
  }
  std::vector<DatasetSchema> out;
  for (const auto& j : doc.at("schemas")) {
    DatasetSchema s;
    s.name = j.at("name").get<std::string>();
    s.feature_columns = j.value("features", std::vector<std::string>{});
    s.outcome_column = j.at("outcome").get<std::string>();
    s.ignore_columns = j.value("ignore", std::vector<std::string>{});
    s.hourly_onehot = j.value("hourly_onehot", false);
    s.samples_per_day = j.value("samples_per_day", std::size_t{0});
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

void save_schema_file(const std::vector<DatasetSchema>& schemas,
                      const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : schemas) {
    arr.push_back({{"name", s.name},
                   {"features", s.feature_columns},
                   {"outcome", s.outcome_column},
                   {"ignore", s.ignore_columns},
                   {"hourly_onehot", s.hourly_onehot},
                   {"samples_per_day", s.samples_per_day}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_schema_file: cannot open " + path.string());
  out << nlohmann::json{{"schemas", arr}}.dump(2) << '\n';
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cur += c;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

ObservationSeries load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw ValidationError("load_csv: " + path.string() + " is empty");
  }
  const auto header = split_fields(line);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ValidationError("load_csv: " + path.string() + " has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::string> feature_names = schema.feature_columns;
  if (feature_names.empty()) {
    for (const auto& h : header) {
      const bool ignored = std::find(schema.ignore_columns.begin(), schema.ignore_columns.end(),
                                     h) != schema.ignore_columns.end();
      if (h != schema.outcome_column && !ignored) feature_names.push_back(h);
    }
    if (feature_names.empty()) throw ValidationError("load_csv: no feature columns");
  }
  std::vector<std::size_t> feature_idx;
  for (const auto& f : feature_names) feature_idx.push_back(column(f));
  const std::size_t outcome_idx = column(schema.outcome_column);

  std::vector<double> flat;
  std::vector<double> outcomes;
  std::size_t row = 0;
  auto parse = [&](const std::vector<std::string>& fields, std::size_t idx) {
    const std::string& cell = fields[idx];
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
      throw ValidationError("load_csv: " + path.string() + ": data row " + std::to_string(row) +
                            ", column '" + header[idx] + "': cannot parse '" + cell + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ValidationError("load_csv: " + path.string() + ": data row " + std::to_string(row) +
                            " has " + std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    for (std::size_t idx : feature_idx) flat.push_back(parse(fields, idx));
    outcomes.push_back(parse(fields, outcome_idx));
  }
  if (outcomes.empty()) throw ValidationError("load_csv: " + path.string() + " has no data rows");
  const std::size_t n = outcomes.size();
  ObservationSeries series(Matrix(n, feature_idx.size(), std::move(flat)), std::move(outcomes),
                           feature_names, 1);
  return schema.hourly_onehot ? add_hourly_onehot(series, schema.samples_per_day) : series;
}

ObservationSeries add_hourly_onehot(const ObservationSeries& series, std::size_t samples_per_day) {
  if (samples_per_day == 0 || samples_per_day % 24 != 0) {
    throw ValidationError("add_hourly_onehot: " + std::to_string(samples_per_day) +
                          " samples per day do not map onto 24 hours");
  }
  const std::size_t per_hour = samples_per_day / 24;
  const std::size_t d = series.dim();
  Matrix out(series.size(), d + 24);
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto x = series.feature(r);
    std::copy(x.begin(), x.end(), out.row(r).begin());
    out(r, d + (r % samples_per_day) / per_hour) = 1.0;
  }
  auto names = series.feature_names();
  if (names.empty()) {
    for (std::size_t j = 1; j <= d; ++j) names.push_back("x" + std::to_string(j));
  }
  for (int h = 0; h < 24; ++h) names.push_back("hour" + std::to_string(h));
  return ObservationSeries(std::move(out),
                           std::vector<double>(series.outcomes().begin(), series.outcomes().end()),
                           std::move(names), series.t0());
}

SplitPlan split(std::size_t T, SplitMode mode) {
  if (T < 10) throw ValidationError("split: series of length " + std::to_string(T) + " is shorter than 10");
  const std::size_t test = (T + 9) / 10;
  SplitPlan p;
  p.total = T;
  p.val_end = T - test;
  p.train_end = mode == SplitMode::kTrainValTest ? (8 * T) / 10 : p.val_end;
  return p;
}

}  // namespace spcit::datagen
