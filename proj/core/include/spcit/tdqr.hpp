#pragma once

// Transformer-decoder conditional quantile regressor.
//
// A window of w rows Z_s = [X_s, residual_s] (oldest first) is projected to
// d_model, summed with a fixed sinusoidal position table, and passed through
// n_layers pre-norm causal decoder blocks:
//
//   h = h + Dropout(Attn(LN1(h)))
//   h = h + Dropout(W2 GELU(W1 LN2(h) + b1) + b2)
//
// A final layer norm and a linear head on the last position give one value
// per quantile level. Gradients are hand-written reverse mode over a tape of
// forward intermediates.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spcit/core.hpp"
#include "spcit/rng.hpp"

namespace spcit::tdqr {

struct DecoderConfig {
  std::size_t d_model = 16;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  /// Feed-forward width; 0 means 4 * d_model.
  std::size_t d_ff = 0;
  double dropout = 0.2;
  std::size_t window = 100;
  /// Columns of Z: feature dimension + 1 for the residual.
  std::size_t input_dim = 11;
  std::vector<double> quantile_levels = {0.05, 0.5, 0.95};

  std::uint64_t seed = 0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 4;
  std::size_t max_epochs = 100;
  /// Stop after this many epochs without a validation improvement; 0 disables.
  std::size_t patience = 0;
  /// Extra pass over the validation windows after model selection, lasting
  /// 10% of the epochs run in the main phase.
  bool additional_training = false;

  std::size_t ff_dim() const noexcept { return d_ff == 0 ? 4 * d_model : d_ff; }
  std::size_t head_dim() const noexcept { return d_model / n_heads; }
  std::size_t n_quantiles() const noexcept { return quantile_levels.size(); }

  /// Throws ValidationError on inconsistent settings.
  void validate() const;
};

struct TensorSlot {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
};

struct LayerSlots {
  TensorSlot ln1_gain, ln1_bias;
  TensorSlot wq, bq, wk, bk, wv, bv, wo, bo;
  TensorSlot ln2_gain, ln2_bias;
  TensorSlot w1, b1, w2, b2;
};

/// Offsets of every parameter tensor inside one flat vector. Matrices are
/// stored (fan_in x fan_out) row-major; biases and gains as 1 x n.
class ParameterLayout {
 public:
  explicit ParameterLayout(const DecoderConfig& config);

  TensorSlot input_w, input_b;
  std::vector<LayerSlots> layers;
  TensorSlot final_gain, final_bias;
  TensorSlot output_w, output_b;
  std::size_t total = 0;

  std::vector<std::pair<std::string, TensorSlot>> named_slots() const;
};

class DecoderWeights {
 public:
  /// All parameters zero (gains included).
  explicit DecoderWeights(DecoderConfig config);

  /// Glorot-uniform matrices, zero biases, unit layer-norm gains; drawn in
  /// named_slots() order from SplitMix64(derive_seed(config.seed, 0)).
  static DecoderWeights initialize(DecoderConfig config);

  const DecoderConfig& config() const noexcept { return config_; }
  const ParameterLayout& layout() const noexcept { return layout_; }
  const Matrix& positional_table() const noexcept { return positional_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> slot(const TensorSlot& s) noexcept { return {values_.data() + s.offset, s.size()}; }
  std::span<const double> slot(const TensorSlot& s) const noexcept {
    return {values_.data() + s.offset, s.size()};
  }

 private:
  DecoderConfig config_;
  ParameterLayout layout_;
  Matrix positional_;
  std::vector<double> values_;
};

/// Fixed sinusoidal table: PE[pos][2i] = sin(pos / 10000^(2i/D)),
/// PE[pos][2i+1] = cos(same).
Matrix sinusoidal_positions(std::size_t length, std::size_t d_model);

struct LayerTape {
  /// First window position with a query row; rows before it carry keys and
  /// values only.
  std::size_t query_begin = 0;
  Matrix h_in;
  Matrix ln1_xhat;
  std::vector<double> ln1_rstd;
  Matrix a, q, k, v;
  std::vector<Matrix> probs;  // per head, w x w, zero above the diagonal
  Matrix attn_concat;
  Matrix drop1;  // dropout scale factors, empty in eval mode
  Matrix h_mid;
  Matrix ln2_xhat;
  std::vector<double> ln2_rstd;
  Matrix b, f1, g;
  Matrix drop2;
};

/// Forward intermediates of one window, sufficient for backward().
struct TrainingTape {
  Matrix input;
  std::vector<LayerTape> layers;
  Matrix h_out;
  Matrix final_xhat;
  std::vector<double> final_rstd;
  Matrix final_out;
  std::vector<double> output;
};

/// K predictions for the step after the window. Dropout is active only when
/// train_mode is set (rng is not touched otherwise). When `tape` is given it
/// receives the intermediates needed by backward().
std::vector<double> forward(const DecoderWeights& weights, const Matrix& window, bool train_mode,
                            SplitMix64& rng, TrainingTape* tape = nullptr);

/// Eval-mode outputs of every position (row i depends on window rows <= i).
Matrix forward_all_positions(const DecoderWeights& weights, const Matrix& window);

/// Accumulates d(loss)/d(parameters) into `grad` given d(loss)/d(output).
void backward(const DecoderWeights& weights, const TrainingTape& tape,
              std::span<const double> output_grad, std::span<double> grad);

/// p (e - e') if e >= e', else (1 - p)(e' - e).
double pinball_loss(double eps, double eps_pred, double p) noexcept;

/// d pinball_loss / d eps_pred; the tie e == e' takes the p branch (-p).
double pinball_slope(double eps, double eps_pred, double p) noexcept;

/// Mean over levels of the pinball losses of one prediction vector.
double mean_pinball(double eps, std::span<const double> predictions,
                    std::span<const double> levels) noexcept;

/// Windows paired with the residual that follows each one.
struct WindowSet {
  std::vector<Matrix> windows;
  std::vector<double> targets;
  std::vector<std::size_t> target_rows;  // row index of each target in the series

  std::size_t size() const noexcept { return targets.size(); }
};

/// One example per target row t in [max(w, target_begin), target_end): the
/// window holds rows t-w..t-1 of Z = [X, residual], oldest first.
WindowSet build_windows(const ObservationSeries& series, const ResidualSeries& residuals,
                        std::size_t w, std::size_t target_begin, std::size_t target_end);

/// Every admissible target of the series (T - w examples).
WindowSet build_windows(const ObservationSeries& series, const ResidualSeries& residuals,
                        std::size_t w);

/// Mean pinball loss over `indices` and accumulation of its gradient into
/// `grad` (skipped when grad is empty).
double batch_loss_and_gradient(const DecoderWeights& weights, const WindowSet& data,
                               std::span<const std::size_t> indices, bool train_mode,
                               SplitMix64& rng, std::span<double> grad);

/// Eval-mode mean pinball loss over a whole window set.
double evaluate_loss(const DecoderWeights& weights, const WindowSet& data);

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8, no weight decay.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n_parameters, double learning_rate);
  void step(std::span<double> parameters, std::span<const double> gradient);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool continuation = false;
};

struct TrainResult {
  DecoderWeights weights;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
};

/// Minibatch Adam on shuffled windows; after each epoch the validation loss
/// is measured and the best snapshot kept. Shuffling and dropout draw from
/// SplitMix64(derive_seed(config.seed, 1)).
TrainResult train(const DecoderConfig& config, const WindowSet& train_set,
                  const WindowSet& validation_set);

/// Eval-mode prediction in model units, sorted to remove crossings.
QuantileGrid predict_quantile_grid(const DecoderWeights& weights, const Matrix& window);

/// Column-wise z-scoring of Z with statistics from training rows. The last
/// column is the residual, which is also the regression target.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const ObservationSeries& series, const ResidualSeries& residuals,
                          std::size_t row_begin, std::size_t row_end);

  Matrix apply(const Matrix& window) const;
  WindowSet apply(const WindowSet& data) const;
  double to_model(double residual) const noexcept { return (residual - mean.back()) / scale.back(); }
  double from_model(double value) const noexcept { return mean.back() + scale.back() * value; }
};

/// A trained regressor operating on raw (unstandardized) windows.
struct QuantileModel {
  DecoderWeights weights;
  Standardizer standardizer;

  QuantileGrid predict(const Matrix& raw_window) const;
};

struct CheckpointMetadata {
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  std::string note;
};

/// JSON checkpoint: {"format":"spcit-tdqr","version":1,"config":{...},
/// "standardizer":{...},"parameters":[...],"training":{...}}.
void save_checkpoint(const QuantileModel& model, const CheckpointMetadata& meta,
                     const std::filesystem::path& path);
QuantileModel load_checkpoint(const std::filesystem::path& path,
                              CheckpointMetadata* meta = nullptr);

/// CSV with header "epoch,train_loss,val_loss,phase".
void write_loss_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace spcit::tdqr
