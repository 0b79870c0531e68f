#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "spcit/bench.hpp"

namespace spcit::bench {

namespace {

std::ofstream open_out(const std::filesystem::path& path, const char* who) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(std::string(who) + ": cannot open " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path, const char* who) {
  out.flush();
  if (!out) throw std::runtime_error(std::string(who) + ": write failed for " + path.string());
}

std::string full(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no infinity; widths that are infinite travel as null.
nlohmann::json json_real(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double real_from_json(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string format_sig4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void write_report_markdown(const std::vector<AggregateResult>& rows,
                           const std::filesystem::path& path) {
  if (rows.empty()) throw ValidationError("write_report_markdown: no rows");
  auto out = open_out(path, "write_report_markdown");
  out << "| dataset | method | w | s | alpha | seeds | coverage | coverage std | width | width std "
         "| infinite |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.dataset << " | " << method_name(r.method) << " | " << r.window << " | "
        << r.horizon << " | " << format_sig4(r.alpha) << " | " << r.n_seeds
        << (r.single_seed ? "*" : "") << " | " << format_sig4(r.coverage_mean) << " | "
        << format_sig4(r.coverage_std) << " | " << format_sig4(r.width_mean) << " | "
        << format_sig4(r.width_std) << " | " << r.infinite_count << " |\n";
  }
  if (std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.single_seed; })) {
    out << "\n\\* single seed: standard deviations are 0 by convention.\n";
  }
  finish(out, path, "write_report_markdown");
}

void write_report_csv(const std::vector<AggregateResult>& rows, const std::filesystem::path& path) {
  if (rows.empty()) throw ValidationError("write_report_csv: no rows");
  auto out = open_out(path, "write_report_csv");
  out << "dataset,method,window,horizon,alpha,n_seeds,coverage_mean,coverage_std,width_mean,"
         "width_std,infinite_count,single_seed\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << method_name(r.method) << ',' << r.window << ',' << r.horizon << ','
        << full(r.alpha) << ',' << r.n_seeds << ',' << full(r.coverage_mean) << ','
        << full(r.coverage_std) << ',' << full(r.width_mean) << ',' << full(r.width_std) << ','
        << r.infinite_count << ',' << (r.single_seed ? 1 : 0) << '\n';
  }
  finish(out, path, "write_report_csv");
}

void write_report_json(const std::vector<AggregateResult>& rows,
                       const std::filesystem::path& path) {
  if (rows.empty()) throw ValidationError("write_report_json: no rows");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"dataset", r.dataset},
                   {"method", method_name(r.method)},
                   {"window", r.window},
                   {"horizon", r.horizon},
                   {"alpha", r.alpha},
                   {"n_seeds", r.n_seeds},
                   {"coverage_mean", r.coverage_mean},
                   {"coverage_std", r.coverage_std},
                   {"width_mean", json_real(r.width_mean)},
                   {"width_std", json_real(r.width_std)},
                   {"infinite_count", r.infinite_count},
                   {"single_seed", r.single_seed}});
  }
  auto out = open_out(path, "write_report_json");
  out << nlohmann::json{{"version", version_string()}, {"results", arr}}.dump(2) << '\n';
  finish(out, path, "write_report_json");
}

std::vector<AggregateResult> read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_report_json: cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  std::vector<AggregateResult> out;
  for (const auto& j : doc.at("results")) {
    AggregateResult r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.window = j.at("window").get<std::size_t>();
    r.horizon = j.at("horizon").get<std::size_t>();
    r.alpha = j.at("alpha").get<double>();
    r.n_seeds = j.at("n_seeds").get<std::size_t>();
    r.coverage_mean = j.at("coverage_mean").get<double>();
    r.coverage_std = j.at("coverage_std").get<double>();
    r.width_mean = real_from_json(j.at("width_mean"));
    r.width_std = real_from_json(j.at("width_std"));
    r.infinite_count = j.at("infinite_count").get<std::size_t>();
    r.single_seed = j.at("single_seed").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

void write_band_csv(const conformal::IntervalTrace& trace, const std::filesystem::path& path) {
  auto out = open_out(path, "write_band_csv");
  out << "t,y_true,lower,upper\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& iv = trace.intervals[i];
    out << iv.t << ',' << full(trace.y_true[i]) << ',' << full(iv.lower) << ',' << full(iv.upper)
        << '\n';
  }
  finish(out, path, "write_band_csv");
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_band_svg(const conformal::IntervalTrace& trace, const std::string& title,
                    const std::filesystem::path& path) {
  if (trace.size() == 0) throw ValidationError("write_band_svg: empty trace");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto extend = [&](double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    extend(trace.intervals[i].lower);
    extend(trace.intervals[i].upper);
  }
  const double band_lo = lo;
  const double band_hi = hi;
  for (double y : trace.y_true) extend(y);
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 1.0;
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const auto clip = [&](double v) { return std::isfinite(v) ? v : (v > 0 ? band_hi : band_lo); };
  const double t0 = static_cast<double>(trace.intervals.front().t);
  const double t1 = std::max(static_cast<double>(trace.intervals.back().t), t0 + 1.0);

  constexpr double W = 800.0, H = 400.0, M = 40.0;
  const double sx = (W - 2 * M) / (t1 - t0);
  const double sy = (H - 2 * M) / (hi - lo);

  auto out = open_out(path, "write_band_svg");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "  <title>" << xml_escape(title) << "</title>\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "  <g id=\"data\" transform=\"translate(" << full(M - t0 * sx) << ' '
      << full(H - M + lo * sy) << ") scale(" << full(sx) << ' ' << full(-sy) << ")\">\n";
  out << "    <polygon id=\"band\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << (i ? " " : "") << trace.intervals[i].t << ',' << full(clip(trace.intervals[i].upper));
  }
  for (std::size_t i = trace.size(); i-- > 0;) {
    out << ' ' << trace.intervals[i].t << ',' << full(clip(trace.intervals[i].lower));
  }
  out << "\"/>\n";
  out << "    <polyline id=\"truth\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" "
         "vector-effect=\"non-scaling-stroke\" points=\"";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << (i ? " " : "") << trace.intervals[i].t << ',' << full(trace.y_true[i]);
  }
  out << "\"/>\n  </g>\n";
  out << "  <text x=\"" << M << "\" y=\"" << M / 2 << "\" font-family=\"sans-serif\" "
         "font-size=\"14\">" << xml_escape(title) << "</text>\n";
  out << "  <text x=\"" << M << "\" y=\"" << H - 8 << "\" font-family=\"sans-serif\" "
         "font-size=\"11\">t = " << trace.intervals.front().t << " .. "
      << trace.intervals.back().t << ", y in [" << format_sig4(lo) << ", " << format_sig4(hi)
      << "]</text>\n";
  out << "</svg>\n";
  finish(out, path, "write_band_svg");
}

namespace {

nlohmann::json forest_to_json(const forest::ForestOptions& f) {
  return {{"n_trees", f.n_trees},
          {"max_depth", f.tree.max_depth},
          {"min_leaf_size", f.tree.min_leaf_size},
          {"mtry", f.tree.mtry},
          {"bootstrap", f.bootstrap}};
}

forest::ForestOptions forest_from_json(const nlohmann::json& j) {
  forest::ForestOptions f;
  f.n_trees = j.value("n_trees", f.n_trees);
  f.tree.max_depth = j.value("max_depth", f.tree.max_depth);
  f.tree.min_leaf_size = j.value("min_leaf_size", f.tree.min_leaf_size);
  f.tree.mtry = j.value("mtry", f.tree.mtry);
  f.bootstrap = j.value("bootstrap", f.bootstrap);
  return f;
}

nlohmann::json method_config_json(const MethodConfig& c) {
  const auto& t = c.transformer;
  return {{"method", method_name(c.method)},
          {"alpha", c.alpha},
          {"window", c.window},
          {"horizon", c.horizon},
          {"nexcp_rho", c.nexcp_rho},
          {"refit_period", c.refit_period},
          {"point_forest", forest_to_json(c.point_forest)},
          {"quantile_forest", forest_to_json(c.quantile_forest)},
          {"qrf_residual_only", c.qrf_residual_only},
          {"gap_fill", c.gap_fill == conformal::GapFill::kMedian ? "median" : "zero"},
          {"transformer",
           {{"d_model", t.d_model},
            {"n_heads", t.n_heads},
            {"n_layers", t.n_layers},
            {"d_ff", t.d_ff},
            {"dropout", t.dropout},
            {"learning_rate", t.learning_rate},
            {"batch_size", t.batch_size},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience},
            {"additional_training", t.additional_training}}}};
}

}  // namespace

std::string method_config_to_json(const MethodConfig& config) {
  return method_config_json(config).dump();
}

MethodConfig method_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("method config: ") + e.what());
  }
  MethodConfig c;
  try {
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    c.alpha = j.value("alpha", c.alpha);
    c.window = j.value("window", c.window);
    c.horizon = j.value("horizon", c.horizon);
    c.nexcp_rho = j.value("nexcp_rho", c.nexcp_rho);
    c.refit_period = j.value("refit_period", c.refit_period);
    if (j.contains("point_forest")) c.point_forest = forest_from_json(j.at("point_forest"));
    if (j.contains("quantile_forest")) c.quantile_forest = forest_from_json(j.at("quantile_forest"));
    c.qrf_residual_only = j.value("qrf_residual_only", c.qrf_residual_only);
    const std::string fill = j.value("gap_fill", std::string("median"));
    if (fill != "median" && fill != "zero") {
      throw ValidationError("method config: gap_fill must be 'median' or 'zero'");
    }
    c.gap_fill = fill == "median" ? conformal::GapFill::kMedian : conformal::GapFill::kZero;
    if (j.contains("transformer")) {
      const auto& t = j.at("transformer");
      auto& d = c.transformer;
      d.d_model = t.value("d_model", d.d_model);
      d.n_heads = t.value("n_heads", d.n_heads);
      d.n_layers = t.value("n_layers", d.n_layers);
      d.d_ff = t.value("d_ff", d.d_ff);
      d.dropout = t.value("dropout", d.dropout);
      d.learning_rate = t.value("learning_rate", d.learning_rate);
      d.batch_size = t.value("batch_size", d.batch_size);
      d.max_epochs = t.value("max_epochs", d.max_epochs);
      d.patience = t.value("patience", d.patience);
      d.additional_training = t.value("additional_training", d.additional_training);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("method config: ") + e.what());
  }
  return c;
}

void write_manifest(const RunResult& run, const MethodConfig& config,
                    const std::string& dataset_description, const std::filesystem::path& path) {
  nlohmann::json doc = {{"version", version_string()},
                        {"dataset", run.dataset},
                        {"dataset_source", dataset_description},
                        {"seed", run.seed},
                        {"config", method_config_json(config)},
                        {"metrics",
                         {{"coverage", run.coverage},
                          {"mean_width", json_real(run.mean_width)},
                          {"infinite_count", run.infinite_count},
                          {"n_test", run.trace.size()}}}};
  if (run.training) {
    doc["training"] = {{"best_epoch", run.training->best_epoch},
                       {"best_val_loss", run.training->best_val_loss},
                       {"epochs_run", run.training->epochs_run}};
  }
  auto out = open_out(path, "write_manifest");
  out << doc.dump(2) << '\n';
  finish(out, path, "write_manifest");
}

}  // namespace spcit::bench
