#include <benchmark/benchmark.h>

#include <vector>

#include "spcit/forest.hpp"
#include "spcit/tdqr.hpp"

using namespace spcit;

namespace {

tdqr::DecoderConfig full_size_config(std::size_t window) {
  tdqr::DecoderConfig c;
  c.window = window;
  c.input_dim = 11;
  c.quantile_levels.clear();
  for (int i = 1; i <= 23; ++i) c.quantile_levels.push_back(i / 24.0);
  return c;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.flat()) v = rng.normal();
  return m;
}

void BM_DecoderForward(benchmark::State& state) {
  const auto weights = tdqr::DecoderWeights::initialize(full_size_config(state.range(0)));
  const auto window = random_matrix(state.range(0), 11, 1);
  SplitMix64 rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tdqr::forward(weights, window, false, rng));
  }
}
BENCHMARK(BM_DecoderForward)->Arg(20)->Arg(100);

void BM_DecoderForwardBackward(benchmark::State& state) {
  const auto weights = tdqr::DecoderWeights::initialize(full_size_config(state.range(0)));
  const auto window = random_matrix(state.range(0), 11, 1);
  SplitMix64 rng(2);
  std::vector<double> grad(weights.values().size());
  const std::vector<double> out_grad(weights.config().n_quantiles(), 1.0);
  for (auto _ : state) {
    tdqr::TrainingTape tape;
    tdqr::forward(weights, window, true, rng, &tape);
    tdqr::backward(weights, tape, out_grad, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_DecoderForwardBackward)->Arg(20)->Arg(100);

void BM_TreeFit(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto X = random_matrix(n, 10, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = X(i, 0) + 0.5 * X(i, 1);
  for (auto _ : state) {
    SplitMix64 rng(4);
    benchmark::DoNotOptimize(forest::fit_tree(X, y, {}, rng));
  }
}
BENCHMARK(BM_TreeFit)->Arg(500)->Arg(2000);

void BM_QrfQuantile(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto X = random_matrix(n, 20, 5);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = X(i, 0);
  const auto qrf = forest::fit_qrf(X, y, {}, 6);
  const auto z = random_matrix(1, 20, 7);
  const std::vector<double> levels = {0.05, 0.5, 0.95};
  for (auto _ : state) {
    benchmark::DoNotOptimize(forest::qrf_quantiles(qrf, z.row(0), levels, y));
  }
}
BENCHMARK(BM_QrfQuantile)->Arg(500)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
