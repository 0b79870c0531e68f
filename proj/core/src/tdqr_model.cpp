#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spcit/tdqr.hpp"

namespace spcit::tdqr {

namespace {

constexpr double kLayerNormEps = 1e-5;

void ensure_shape(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) {
    m = Matrix(rows, cols);
  } else {
    m.fill(0.0);
  }
}

// Y = X[r0:] W + b with W stored (in x out) row-major.
void linear(const Matrix& X, std::span<const double> W, std::span<const double> b,
            std::size_t out, Matrix& Y, std::size_t r0 = 0) {
  const std::size_t n = X.rows() - r0;
  const std::size_t in = X.cols();
  ensure_shape(Y, n, out);
  for (std::size_t r = 0; r < n; ++r) {
    double* y = Y.row(r).data();
    std::copy(b.begin(), b.end(), y);
    const double* x = X.row(r0 + r).data();
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[i];
      const double* w = W.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) y[o] += xi * w[o];
    }
  }
}

bool row_is_zero(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
}

// Reverse of linear(): dW += X[r0:]^T dY, db += colsum(dY), and dX = dY W^T
// when dX is given. Rows of dY that are entirely zero are skipped.
void linear_backward(const Matrix& X, std::span<const double> W, const Matrix& dY,
                     std::span<double> dW, std::span<double> db, Matrix* dX,
                     std::size_t r0 = 0) {
  const std::size_t n = dY.rows();
  const std::size_t in = X.cols();
  const std::size_t out = dY.cols();
  thread_local std::vector<double> wt;
  if (dX != nullptr) {
    ensure_shape(*dX, n, in);
    wt.resize(in * out);
    for (std::size_t i = 0; i < in; ++i) {
      for (std::size_t o = 0; o < out; ++o) wt[o * in + i] = W[i * out + o];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto dy_row = dY.row(r);
    if (row_is_zero(dy_row)) continue;
    const double* dy = dy_row.data();
    const double* x = X.row(r0 + r).data();
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[i];
      double* dw = dW.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) dw[o] += xi * dy[o];
    }
    if (dX != nullptr) {
      double* dx = dX->row(r).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double g = dy[o];
        const double* w = wt.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) dx[i] += g * w[i];
      }
    }
  }
}

void layer_norm(const Matrix& X, std::span<const double> gain, std::span<const double> bias,
                Matrix& xhat, std::vector<double>& rstd, Matrix& Y) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  ensure_shape(xhat, n, d);
  ensure_shape(Y, n, d);
  rstd.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = X.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double s = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[r] = s;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (x[c] - mean) * s;
      xhat(r, c) = h;
      Y(r, c) = gain[c] * h + bias[c];
    }
  }
}

// dX = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), dxhat = dY * gain.
void layer_norm_backward(const Matrix& dY, const Matrix& xhat, std::span<const double> rstd,
                         std::span<const double> gain, std::span<double> dgain,
                         std::span<double> dbias, Matrix& dX) {
  const std::size_t n = dY.rows();
  const std::size_t d = dY.cols();
  ensure_shape(dX, n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto dy = dY.row(r);
    if (row_is_zero(dy)) continue;
    const auto xh = xhat.row(r);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += dy[c] * xh[c];
      dbias[c] += dy[c];
      const double g = dy[c] * gain[c];
      mean_dxhat += g;
      mean_dxhat_xhat += g * xh[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dX(r, c) = rstd[r] * (dy[c] * gain[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
    }
  }
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Query row i sits at position q0 + i and attends to key rows 0..q0+i.
void causal_attention(const Matrix& Q, const Matrix& K, const Matrix& V, std::size_t n_heads,
                      std::size_t q0, std::vector<Matrix>& probs, Matrix& out) {
  const std::size_t nq = Q.rows();
  const std::size_t w = K.rows();
  const std::size_t D = Q.cols();
  const std::size_t dh = D / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  probs.resize(n_heads);
  ensure_shape(out, nq, D);
  for (std::size_t h = 0; h < n_heads; ++h) {
    Matrix& P = probs[h];
    ensure_shape(P, nq, w);
    const std::size_t c0 = h * dh;
    for (std::size_t qi_row = 0; qi_row < nq; ++qi_row) {
      const std::size_t i = q0 + qi_row;
      const double* qi = Q.row(qi_row).data() + c0;
      double* p = P.row(qi_row).data();
      double max_s = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        const double* kj = K.row(j).data() + c0;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        max_s = std::max(max_s, p[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - max_s);
        z += p[j];
      }
      double* oi = out.row(qi_row).data() + c0;
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] /= z;
        const double* vj = V.row(j).data() + c0;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
      }
    }
  }
}

void causal_attention_backward(const Matrix& Q, const Matrix& K, const Matrix& V,
                               const std::vector<Matrix>& probs, const Matrix& dOut,
                               std::size_t n_heads, std::size_t q0, Matrix& dQ, Matrix& dK,
                               Matrix& dV) {
  const std::size_t nq = Q.rows();
  const std::size_t w = K.rows();
  const std::size_t D = Q.cols();
  const std::size_t dh = D / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  ensure_shape(dQ, nq, D);
  ensure_shape(dK, w, D);
  ensure_shape(dV, w, D);
  std::vector<double> dp(w);
  for (std::size_t qi_row = 0; qi_row < nq; ++qi_row) {
    if (row_is_zero(dOut.row(qi_row))) continue;
    const std::size_t i = q0 + qi_row;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const Matrix& P = probs[h];
      const std::size_t c0 = h * dh;
      const double* doi = dOut.row(qi_row).data() + c0;
      const double* p = P.row(qi_row).data();
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double* vj = V.row(j).data() + c0;
        double* dvj = dV.row(j).data() + c0;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += doi[c] * vj[c];
          dvj[c] += p[j] * doi[c];
        }
        dp[j] = s;
        dot += p[j] * s;
      }
      const double* qi = Q.row(qi_row).data() + c0;
      double* dqi = dQ.row(qi_row).data() + c0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double ds = p[j] * (dp[j] - dot) * scale;
        if (ds == 0.0) continue;
        const double* kj = K.row(j).data() + c0;
        double* dkj = dK.row(j).data() + c0;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

void add_in_place(Matrix& a, const Matrix& b) {
  auto x = a.flat();
  const auto y = b.flat();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

// a[r0 + r] += b[r] for every row of b.
void add_rows_at(Matrix& a, const Matrix& b, std::size_t r0) {
  for (std::size_t r = 0; r < b.rows(); ++r) {
    auto x = a.row(r0 + r);
    const auto y = b.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += y[c];
  }
}

Matrix tail_rows(const Matrix& m, std::size_t r0) {
  Matrix out(m.rows() - r0, m.cols());
  std::copy(m.flat().begin() + static_cast<std::ptrdiff_t>(r0 * m.cols()), m.flat().end(),
            out.flat().begin());
  return out;
}

void draw_dropout(Matrix& mask, std::size_t rows, std::size_t cols, double rate, SplitMix64& rng) {
  ensure_shape(mask, rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.flat()) m = rng.uniform() < rate ? 0.0 : keep_scale;
}

void multiply_in_place(Matrix& a, const Matrix& mask) {
  auto x = a.flat();
  const auto m = mask.flat();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= m[i];
}

void check_window(const DecoderConfig& cfg, const Matrix& window) {
  if (window.rows() != cfg.window || window.cols() != cfg.input_dim) {
    throw ValidationError("tdqr: window is " + std::to_string(window.rows()) + "x" +
                          std::to_string(window.cols()) + ", expected " +
                          std::to_string(cfg.window) + "x" + std::to_string(cfg.input_dim));
  }
  for (double v : window.flat()) {
    if (!std::isfinite(v)) throw ValidationError("tdqr: non-finite value in window");
  }
}

}  // namespace

namespace {

// With all_positions unset, the last layer computes its query path only for
// the final row, which is all the output head reads.
std::vector<double> forward_impl(const DecoderWeights& weights, const Matrix& window,
                                 bool train_mode, SplitMix64& rng, TrainingTape& tp,
                                 bool all_positions) {
  const DecoderConfig& cfg = weights.config();
  const ParameterLayout& L = weights.layout();
  check_window(cfg, window);
  const std::size_t w = cfg.window;
  const std::size_t D = cfg.d_model;
  const bool use_dropout = train_mode && cfg.dropout > 0.0;

  tp.input = window;
  tp.layers.resize(cfg.n_layers);

  Matrix h;
  linear(window, weights.slot(L.input_w), weights.slot(L.input_b), D, h);
  add_in_place(h, weights.positional_table());

  Matrix branch;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const LayerSlots& s = L.layers[l];
    LayerTape& lt = tp.layers[l];
    const std::size_t q0 = (!all_positions && l + 1 == cfg.n_layers) ? w - 1 : 0;
    lt.query_begin = q0;
    lt.h_in = h;

    layer_norm(h, weights.slot(s.ln1_gain), weights.slot(s.ln1_bias), lt.ln1_xhat, lt.ln1_rstd,
               lt.a);
    linear(lt.a, weights.slot(s.wq), weights.slot(s.bq), D, lt.q, q0);
    linear(lt.a, weights.slot(s.wk), weights.slot(s.bk), D, lt.k);
    linear(lt.a, weights.slot(s.wv), weights.slot(s.bv), D, lt.v);
    causal_attention(lt.q, lt.k, lt.v, cfg.n_heads, q0, lt.probs, lt.attn_concat);
    linear(lt.attn_concat, weights.slot(s.wo), weights.slot(s.bo), D, branch);
    const std::size_t nq = branch.rows();
    if (use_dropout) {
      draw_dropout(lt.drop1, nq, D, cfg.dropout, rng);
      multiply_in_place(branch, lt.drop1);
    } else {
      lt.drop1 = Matrix();
    }
    if (q0 > 0) h = tail_rows(h, q0);
    add_in_place(h, branch);
    lt.h_mid = h;

    layer_norm(h, weights.slot(s.ln2_gain), weights.slot(s.ln2_bias), lt.ln2_xhat, lt.ln2_rstd,
               lt.b);
    linear(lt.b, weights.slot(s.w1), weights.slot(s.b1), cfg.ff_dim(), lt.f1);
    ensure_shape(lt.g, lt.f1.rows(), lt.f1.cols());
    for (std::size_t i = 0; i < lt.f1.flat().size(); ++i) lt.g.flat()[i] = gelu(lt.f1.flat()[i]);
    linear(lt.g, weights.slot(s.w2), weights.slot(s.b2), D, branch);
    if (use_dropout) {
      draw_dropout(lt.drop2, nq, D, cfg.dropout, rng);
      multiply_in_place(branch, lt.drop2);
    } else {
      lt.drop2 = Matrix();
    }
    add_in_place(h, branch);
  }

  tp.h_out = h;
  layer_norm(h, weights.slot(L.final_gain), weights.slot(L.final_bias), tp.final_xhat,
             tp.final_rstd, tp.final_out);

  const std::size_t K = cfg.n_quantiles();
  const auto wout = weights.slot(L.output_w);
  const auto bout = weights.slot(L.output_b);
  const auto last = tp.final_out.row(tp.final_out.rows() - 1);
  tp.output.assign(bout.begin(), bout.end());
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t k = 0; k < K; ++k) tp.output[k] += last[i] * wout[i * K + k];
  }
  for (double v : tp.output) {
    if (!std::isfinite(v)) throw NumericError("tdqr: non-finite activation in forward pass");
  }
  return tp.output;
}

}  // namespace

std::vector<double> forward(const DecoderWeights& weights, const Matrix& window, bool train_mode,
                            SplitMix64& rng, TrainingTape* tape) {
  if (tape != nullptr) return forward_impl(weights, window, train_mode, rng, *tape, false);
  TrainingTape local;
  return forward_impl(weights, window, train_mode, rng, local, false);
}

Matrix forward_all_positions(const DecoderWeights& weights, const Matrix& window) {
  SplitMix64 unused(0);
  TrainingTape tape;
  forward_impl(weights, window, false, unused, tape, true);
  const ParameterLayout& L = weights.layout();
  Matrix out;
  linear(tape.final_out, weights.slot(L.output_w), weights.slot(L.output_b),
         weights.config().n_quantiles(), out);
  return out;
}

void backward(const DecoderWeights& weights, const TrainingTape& tape,
              std::span<const double> output_grad, std::span<double> grad) {
  const DecoderConfig& cfg = weights.config();
  const ParameterLayout& L = weights.layout();
  if (grad.size() != L.total) throw StructuralError("backward: gradient buffer has wrong size");
  if (output_grad.size() != cfg.n_quantiles()) {
    throw StructuralError("backward: output gradient has wrong size");
  }
  const std::size_t D = cfg.d_model;
  const std::size_t K = cfg.n_quantiles();
  auto g = [&](const TensorSlot& s) { return grad.subspan(s.offset, s.size()); };

  // head: output = final_out[last] Wout + bout
  const std::size_t n_out = tape.final_out.rows();
  Matrix d_final(n_out, D);
  {
    const auto wout = weights.slot(L.output_w);
    auto gw = g(L.output_w);
    auto gb = g(L.output_b);
    const auto last = tape.final_out.row(n_out - 1);
    for (std::size_t k = 0; k < K; ++k) gb[k] += output_grad[k];
    for (std::size_t i = 0; i < D; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        gw[i * K + k] += last[i] * output_grad[k];
        acc += output_grad[k] * wout[i * K + k];
      }
      d_final(n_out - 1, i) = acc;
    }
  }

  Matrix dh;
  layer_norm_backward(d_final, tape.final_xhat, tape.final_rstd, weights.slot(L.final_gain),
                      g(L.final_gain), g(L.final_bias), dh);

  Matrix d_branch, dg, df1, d_ln, tmp, dq, dk, dv, d_concat, da;
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const LayerSlots& s = L.layers[l];
    const LayerTape& lt = tape.layers[l];
    const std::size_t q0 = lt.query_begin;

    // feed-forward branch
    d_branch = dh;
    if (!lt.drop2.empty()) multiply_in_place(d_branch, lt.drop2);
    linear_backward(lt.g, weights.slot(s.w2), d_branch, g(s.w2), g(s.b2), &dg);
    df1 = dg;
    for (std::size_t i = 0; i < df1.flat().size(); ++i) df1.flat()[i] *= gelu_grad(lt.f1.flat()[i]);
    linear_backward(lt.b, weights.slot(s.w1), df1, g(s.w1), g(s.b1), &d_ln);
    layer_norm_backward(d_ln, lt.ln2_xhat, lt.ln2_rstd, weights.slot(s.ln2_gain), g(s.ln2_gain),
                        g(s.ln2_bias), tmp);
    add_in_place(dh, tmp);

    // attention branch
    d_branch = dh;
    if (!lt.drop1.empty()) multiply_in_place(d_branch, lt.drop1);
    linear_backward(lt.attn_concat, weights.slot(s.wo), d_branch, g(s.wo), g(s.bo), &d_concat);
    causal_attention_backward(lt.q, lt.k, lt.v, lt.probs, d_concat, cfg.n_heads, q0, dq, dk, dv);
    linear_backward(lt.a, weights.slot(s.wk), dk, g(s.wk), g(s.bk), &da);
    linear_backward(lt.a, weights.slot(s.wv), dv, g(s.wv), g(s.bv), &tmp);
    add_in_place(da, tmp);
    linear_backward(lt.a, weights.slot(s.wq), dq, g(s.wq), g(s.bq), &tmp, q0);
    add_rows_at(da, tmp, q0);
    layer_norm_backward(da, lt.ln1_xhat, lt.ln1_rstd, weights.slot(s.ln1_gain), g(s.ln1_gain),
                        g(s.ln1_bias), tmp);
    add_rows_at(tmp, dh, q0);
    std::swap(dh, tmp);
  }

  linear_backward(tape.input, weights.slot(L.input_w), dh, g(L.input_w), g(L.input_b), nullptr);
}

double pinball_loss(double eps, double eps_pred, double p) noexcept {
  return eps >= eps_pred ? p * (eps - eps_pred) : (1.0 - p) * (eps_pred - eps);
}

double pinball_slope(double eps, double eps_pred, double p) noexcept {
  return eps >= eps_pred ? -p : 1.0 - p;
}

double mean_pinball(double eps, std::span<const double> predictions,
                    std::span<const double> levels) noexcept {
  double total = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) total += pinball_loss(eps, predictions[k], levels[k]);
  return total / static_cast<double>(levels.size());
}

WindowSet build_windows(const ObservationSeries& series, const ResidualSeries& residuals,
                        std::size_t w, std::size_t target_begin, std::size_t target_end) {
  if (residuals.size() != series.size()) {
    throw StructuralError("build_windows: residual series does not match observations");
  }
  if (w == 0) throw ValidationError("build_windows: window must be >= 1");
  if (series.size() <= w) {
    throw ValidationError("build_windows: series of length " + std::to_string(series.size()) +
                          " is too short for window " + std::to_string(w));
  }
  target_end = std::min(target_end, series.size());
  target_begin = std::max(target_begin, w);
  const std::size_t d = series.dim();
  WindowSet out;
  for (std::size_t t = target_begin; t < target_end; ++t) {
    Matrix z(w, d + 1);
    for (std::size_t r = 0; r < w; ++r) {
      const std::size_t s = t - w + r;
      const auto x = series.feature(s);
      std::copy(x.begin(), x.end(), z.row(r).begin());
      z(r, d) = residuals.residual(s);
    }
    out.windows.push_back(std::move(z));
    out.targets.push_back(residuals.residual(t));
    out.target_rows.push_back(t);
  }
  return out;
}

WindowSet build_windows(const ObservationSeries& series, const ResidualSeries& residuals,
                        std::size_t w) {
  return build_windows(series, residuals, w, w, series.size());
}

QuantileGrid predict_quantile_grid(const DecoderWeights& weights, const Matrix& window) {
  SplitMix64 unused(0);
  auto values = forward(weights, window, false, unused);
  return rearrange_monotone(QuantileGrid(weights.config().quantile_levels, std::move(values)));
}

Standardizer Standardizer::fit(const ObservationSeries& series, const ResidualSeries& residuals,
                               std::size_t row_begin, std::size_t row_end) {
  if (row_end > series.size() || row_begin >= row_end) {
    throw ValidationError("Standardizer: empty fitting range");
  }
  const std::size_t d = series.dim();
  const auto n = static_cast<double>(row_end - row_begin);
  Standardizer s;
  s.mean.assign(d + 1, 0.0);
  s.scale.assign(d + 1, 0.0);
  auto value = [&](std::size_t r, std::size_t c) {
    return c < d ? series.feature(r)[c] : residuals.residual(r);
  };
  for (std::size_t c = 0; c <= d; ++c) {
    double m = 0.0;
    for (std::size_t r = row_begin; r < row_end; ++r) m += value(r, c);
    m /= n;
    double v = 0.0;
    for (std::size_t r = row_begin; r < row_end; ++r) v += (value(r, c) - m) * (value(r, c) - m);
    const double sd = std::sqrt(v / n);
    s.mean[c] = m;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& window) const {
  if (window.cols() != mean.size()) throw StructuralError("Standardizer: column count mismatch");
  Matrix out = window;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / scale[c];
  }
  return out;
}

WindowSet Standardizer::apply(const WindowSet& data) const {
  WindowSet out;
  out.target_rows = data.target_rows;
  out.windows.reserve(data.size());
  for (const auto& w : data.windows) out.windows.push_back(apply(w));
  for (double t : data.targets) out.targets.push_back(to_model(t));
  return out;
}

QuantileGrid QuantileModel::predict(const Matrix& raw_window) const {
  const QuantileGrid model_units = predict_quantile_grid(weights, standardizer.apply(raw_window));
  std::vector<double> values;
  values.reserve(model_units.size());
  for (double v : model_units.values()) values.push_back(standardizer.from_model(v));
  return QuantileGrid(std::vector<double>(model_units.levels().begin(), model_units.levels().end()),
                      std::move(values));
}

}  // namespace spcit::tdqr
