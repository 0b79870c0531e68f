#include <algorithm>
#include <cmath>
#include <numeric>

#include "spcit/tdqr.hpp"

namespace spcit::tdqr {

namespace {

double accumulate_batch(const DecoderWeights& weights, const DecoderConfig& cfg,
                        const WindowSet& data, std::span<const std::size_t> indices,
                        bool train_mode, SplitMix64& rng, std::span<double> grad,
                        TrainingTape& tape) {
  const auto& levels = cfg.quantile_levels;
  const std::size_t K = levels.size();
  const double scale = 1.0 / static_cast<double>(indices.size() * K);
  std::vector<double> output_grad(K);
  double total = 0.0;
  for (std::size_t idx : indices) {
    const double target = data.targets[idx];
    const auto pred = forward(weights, data.windows[idx], train_mode, rng, &tape);
    for (std::size_t k = 0; k < K; ++k) {
      total += pinball_loss(target, pred[k], levels[k]);
      output_grad[k] = pinball_slope(target, pred[k], levels[k]) * scale;
    }
    if (!grad.empty()) backward(weights, tape, output_grad, grad);
  }
  return total * scale;
}

}  // namespace

double batch_loss_and_gradient(const DecoderWeights& weights, const WindowSet& data,
                               std::span<const std::size_t> indices, bool train_mode,
                               SplitMix64& rng, std::span<double> grad) {
  if (indices.empty()) throw ValidationError("batch_loss_and_gradient: empty batch");
  TrainingTape tape;
  return accumulate_batch(weights, weights.config(), data, indices, train_mode, rng, grad, tape);
}

double evaluate_loss(const DecoderWeights& weights, const WindowSet& data) {
  if (data.size() == 0) throw ValidationError("evaluate_loss: empty window set");
  SplitMix64 unused(0);
  const auto& levels = weights.config().quantile_levels;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = forward(weights, data.windows[i], false, unused);
    total += mean_pinball(data.targets[i], pred, levels);
  }
  return total / static_cast<double>(data.size());
}

AdamOptimizer::AdamOptimizer(std::size_t n_parameters, double learning_rate)
    : lr_(learning_rate), m_(n_parameters, 0.0), v_(n_parameters, 0.0) {}

void AdamOptimizer::step(std::span<double> parameters, std::span<const double> gradient) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * gradient[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * gradient[i] * gradient[i];
    parameters[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

namespace {

// One pass over `data` in shuffled minibatches; returns the mean train loss.
double run_epoch(DecoderWeights& weights, AdamOptimizer& optimizer, const WindowSet& data,
                 SplitMix64& rng, std::size_t epoch, TrainingTape& tape) {
  const DecoderConfig& cfg = weights.config();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<double> grad(weights.values().size());
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = accumulate_batch(weights, cfg, data, batch, true, rng, grad, tape);
    if (!std::isfinite(loss)) {
      throw NumericError("tdqr::train: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch starting at " + std::to_string(start));
    }
    loss_sum += loss * static_cast<double>(batch.size());
    optimizer.step(weights.values(), grad);
  }
  return loss_sum / static_cast<double>(data.size());
}

}  // namespace

TrainResult train(const DecoderConfig& config, const WindowSet& train_set,
                  const WindowSet& validation_set) {
  config.validate();
  if (train_set.size() == 0) throw ValidationError("tdqr::train: empty training set");
  if (validation_set.size() == 0) throw ValidationError("tdqr::train: empty validation set");
  if (config.max_epochs == 0) throw ValidationError("tdqr::train: max_epochs must be >= 1");

  DecoderWeights weights = DecoderWeights::initialize(config);
  AdamOptimizer optimizer(weights.values().size(), config.learning_rate);
  SplitMix64 rng(derive_seed(config.seed, 1));
  TrainingTape tape;

  TrainResult result{weights, {}, 0, evaluate_loss(weights, validation_set), 0};
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double train_loss = run_epoch(weights, optimizer, train_set, rng, epoch, tape);
    const double val_loss = evaluate_loss(weights, validation_set);
    result.history.push_back({epoch, train_loss, val_loss, false});
    result.epochs_run = epoch;
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.weights = weights;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }

  if (config.additional_training) {
    const auto extra = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(result.epochs_run))));
    weights = result.weights;
    AdamOptimizer continuation(weights.values().size(), config.learning_rate);
    for (std::size_t e = 1; e <= extra; ++e) {
      const double loss = run_epoch(weights, continuation, validation_set, rng, e, tape);
      result.history.push_back({result.epochs_run + e, loss, evaluate_loss(weights, validation_set),
                                true});
    }
    result.weights = std::move(weights);
  }
  return result;
}

}  // namespace spcit::tdqr
