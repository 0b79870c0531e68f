#include <cmath>

#include "spcit/tdqr.hpp"

namespace spcit::tdqr {

void DecoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ValidationError("DecoderConfig: d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0) throw ValidationError("DecoderConfig: n_layers must be >= 1");
  if (window == 0) throw ValidationError("DecoderConfig: window must be >= 1");
  if (input_dim == 0) throw ValidationError("DecoderConfig: input_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ValidationError("DecoderConfig: dropout must lie in [0, 1)");
  }
  if (quantile_levels.empty()) throw ValidationError("DecoderConfig: no quantile levels");
  for (std::size_t i = 0; i < quantile_levels.size(); ++i) {
    const double p = quantile_levels[i];
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("DecoderConfig: level outside (0, 1)");
    if (i > 0 && !(p > quantile_levels[i - 1])) {
      throw ValidationError("DecoderConfig: quantile levels must be strictly increasing");
    }
  }
  if (!(learning_rate > 0.0)) throw ValidationError("DecoderConfig: learning_rate must be > 0");
  if (batch_size == 0) throw ValidationError("DecoderConfig: batch_size must be >= 1");
}

ParameterLayout::ParameterLayout(const DecoderConfig& config) {
  config.validate();
  const std::size_t D = config.d_model;
  const std::size_t F = config.ff_dim();
  const std::size_t K = config.n_quantiles();
  auto take = [this](std::size_t rows, std::size_t cols) {
    TensorSlot s{total, rows, cols};
    total += rows * cols;
    return s;
  };
  input_w = take(config.input_dim, D);
  input_b = take(1, D);
  layers.resize(config.n_layers);
  for (auto& l : layers) {
    l.ln1_gain = take(1, D);
    l.ln1_bias = take(1, D);
    l.wq = take(D, D);
    l.bq = take(1, D);
    l.wk = take(D, D);
    l.bk = take(1, D);
    l.wv = take(D, D);
    l.bv = take(1, D);
    l.wo = take(D, D);
    l.bo = take(1, D);
    l.ln2_gain = take(1, D);
    l.ln2_bias = take(1, D);
    l.w1 = take(D, F);
    l.b1 = take(1, F);
    l.w2 = take(F, D);
    l.b2 = take(1, D);
  }
  final_gain = take(1, D);
  final_bias = take(1, D);
  output_w = take(D, K);
  output_b = take(1, K);
}

std::vector<std::pair<std::string, TensorSlot>> ParameterLayout::named_slots() const {
  std::vector<std::pair<std::string, TensorSlot>> out = {{"input_w", input_w},
                                                         {"input_b", input_b}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.insert(out.end(), {{p + "ln1_gain", l.ln1_gain}, {p + "ln1_bias", l.ln1_bias},
                           {p + "wq", l.wq},             {p + "bq", l.bq},
                           {p + "wk", l.wk},             {p + "bk", l.bk},
                           {p + "wv", l.wv},             {p + "bv", l.bv},
                           {p + "wo", l.wo},             {p + "bo", l.bo},
                           {p + "ln2_gain", l.ln2_gain}, {p + "ln2_bias", l.ln2_bias},
                           {p + "w1", l.w1},             {p + "b1", l.b1},
                           {p + "w2", l.w2},             {p + "b2", l.b2}});
  }
  out.insert(out.end(), {{"final_gain", final_gain},
                         {"final_bias", final_bias},
                         {"output_w", output_w},
                         {"output_b", output_b}});
  return out;
}

Matrix sinusoidal_positions(std::size_t length, std::size_t d_model) {
  Matrix pe(length, d_model);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

DecoderWeights::DecoderWeights(DecoderConfig config)
    : config_(std::move(config)),
      layout_(config_),
      positional_(sinusoidal_positions(config_.window, config_.d_model)),
      values_(layout_.total, 0.0) {}

DecoderWeights DecoderWeights::initialize(DecoderConfig config) {
  DecoderWeights w(std::move(config));
  SplitMix64 rng(derive_seed(w.config_.seed, 0));
  for (const auto& [name, slot] : w.layout_.named_slots()) {
    auto values = w.slot(slot);
    const std::string leaf = name.substr(name.find('.') + 1);
    const bool is_matrix = leaf.starts_with('w') || leaf.ends_with("_w");
    if (leaf.ends_with("gain")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (is_matrix) {
      const double limit = std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
      for (double& v : values) v = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }
  return w;
}

}  // namespace spcit::tdqr
