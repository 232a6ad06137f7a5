#include "vpf/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vpf/error.hpp"
#include "vpf/kernels.hpp"
#include "lstm_gates.hpp"

namespace vpf::nn {

double standard_normal(Rng& rng) {
  // Box-Muller, one value per call.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// -- losses ------------------------------------------------------------------

const char* to_string(LossKind kind) { return kind == LossKind::MAE ? "mae" : "mse"; }

LossKind parse_loss(std::string_view name) {
  if (name == "mae" || name == "MAE") return LossKind::MAE;
  if (name == "mse" || name == "MSE") return LossKind::MSE;
  throw Error(ErrorKind::Config, "unknown loss '" + std::string(name) + "'");
}

namespace {

template <class ElementLoss>
LossResult masked_loss_impl(const Matrix& pred, const Matrix& target, const Matrix& mask, ElementLoss element) {
  if (!pred.same_shape(target) || !pred.same_shape(mask))
    throw Error(ErrorKind::Dimension, "loss: pred " + shape_string(pred) + ", target " + shape_string(target) +
                                          ", mask " + shape_string(mask));
  LossResult r;
  r.grad.resize(pred.rows(), pred.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i] == 0.0) continue;
    ++r.count;
    double g = 0.0;
    sum += element(pred[i] - target[i], g);
    r.grad[i] = g;
  }
  if (r.count == 0) {
    r.skipped = true;
    return r;
  }
  const double inv = 1.0 / static_cast<double>(r.count);
  r.value = sum * inv;
  for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] *= inv;
  return r;
}

}  // namespace

LossResult masked_mae(const Matrix& pred, const Matrix& target, const Matrix& mask) {
  return masked_loss_impl(pred, target, mask, [](double d, double& g) {
    g = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return std::abs(d);
  });
}

LossResult masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask) {
  return masked_loss_impl(pred, target, mask, [](double d, double& g) {
    g = 2.0 * d;
    return d * d;
  });
}

LossResult masked_loss(LossKind kind, const Matrix& pred, const Matrix& target, const Matrix& mask) {
  return kind == LossKind::MAE ? masked_mae(pred, target, mask) : masked_mse(pred, target, mask);
}

// -- dropout -----------------------------------------------------------------

void DropoutSpec::validate() const {
  if (!(rate >= 0.0 && rate < 1.0) || !(recurrent_rate >= 0.0 && recurrent_rate < 1.0))
    throw Error(ErrorKind::Config, "dropout rates must lie in [0, 1)");
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

DropoutOutput dropout_forward(const Matrix& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::Config, "dropout rate must lie in [0, 1)");
  DropoutOutput out;
  if (mode == Mode::Infer || rate == 0.0) {
    out.y = x;
    return out;
  }
  out.mask = dropout_mask(x.rows(), x.cols(), rate, rng);
  out.y = x;
  for (std::size_t i = 0; i < x.size(); ++i) out.y[i] *= out.mask[i];
  return out;
}

// -- dense -------------------------------------------------------------------

Matrix dense_forward(const Matrix& x, const DenseParams& p) {
  if (x.cols() != p.in()) throw Error(ErrorKind::Dimension, "dense: input " + shape_string(x) + ", weights " + shape_string(p.W));
  Matrix y;
  kernels::gemm_nn(x, p.W, y);
  kernels::add_row_bias(y, p.b);
  return y;
}

Matrix dense_backward(const Matrix& x, const Matrix& dy, const DenseParams& p, Matrix& dW, Matrix& db, bool want_dx) {
  kernels::gemm_tn(x, dy, dW, true);
  kernels::accumulate_column_sums(dy, db);
  Matrix dx;
  if (want_dx) kernels::gemm_nt(dy, p.W, dx);
  return dx;
}

// -- LSTM --------------------------------------------------------------------

void LstmParams::validate() const {
  const std::size_t h = U.rows();
  if (h == 0 || U.cols() != 4 * h || W.cols() != 4 * h || b.rows() != 1 || b.cols() != 4 * h)
    throw Error(ErrorKind::Dimension, "inconsistent LSTM parameter shapes W " + shape_string(W) + ", U " +
                                          shape_string(U) + ", b " + shape_string(b));
}

namespace {

void cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmParams& p,
                  const Matrix& mask, Matrix& h_out, Matrix& c_out, LstmCellCache* cache) {
  const std::size_t batch = x.rows(), h = p.hidden();
  if (x.cols() != p.input_dim()) throw Error(ErrorKind::Dimension, "lstm: input " + shape_string(x) + " vs W " + shape_string(p.W));
  require_shape(h_prev, batch, h, "lstm h_prev");
  require_shape(c_prev, batch, h, "lstm c_prev");
  if (!mask.empty()) require_shape(mask, batch, h, "lstm recurrent mask");

  Matrix h_in = h_prev;
  if (!mask.empty())
    for (std::size_t i = 0; i < h_in.size(); ++i) h_in[i] *= mask[i];

  Matrix z;
  kernels::gemm_nn(x, p.W, z);
  kernels::gemm_nn(h_in, p.U, z, true);
  kernels::add_row_bias(z, p.b);

  h_out.resize(batch, h);
  c_out.resize(batch, h);
  Matrix tanh_c(batch, h);
  detail::lstm_gates_forward(z.data(), c_prev.data(), c_out.data(), tanh_c.data(), h_out.data(), batch, h);
  if (cache) {
    cache->x = x;
    cache->h_in = std::move(h_in);
    cache->c_prev = c_prev;
    cache->gates = std::move(z);
    cache->tanh_c = std::move(tanh_c);
  }
}

}  // namespace

LstmCellOutput lstm_cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmParams& p,
                                 const Matrix& recurrent_mask) {
  p.validate();
  LstmCellOutput out;
  cell_forward(x, h_prev, c_prev, p, recurrent_mask, out.h, out.c, &out.cache);
  return out;
}

LstmCellGrads lstm_cell_backward(const Matrix& dh, const Matrix& dc, const LstmCellCache& cache, const LstmParams& p,
                                 const Matrix& recurrent_mask, LstmGrads& grads, bool want_dx) {
  const std::size_t batch = cache.x.rows(), h = p.hidden();
  require_shape(dh, batch, h, "lstm dh");
  require_shape(dc, batch, h, "lstm dc");
  Matrix dz(batch, 4 * h);
  LstmCellGrads out;
  out.dc_prev.resize(batch, h);
  detail::lstm_gates_backward(cache.gates.data(), cache.tanh_c.data(), cache.c_prev.data(), dh.data(), dc.data(),
                              dz.data(), out.dc_prev.data(), batch, h);
  kernels::gemm_tn(cache.x, dz, grads.dW, true);
  kernels::gemm_tn(cache.h_in, dz, grads.dU, true);
  kernels::accumulate_column_sums(dz, grads.db);
  kernels::gemm_nt(dz, p.U, out.dh_prev);
  if (!recurrent_mask.empty())
    for (std::size_t i = 0; i < out.dh_prev.size(); ++i) out.dh_prev[i] *= recurrent_mask[i];
  if (want_dx) kernels::gemm_nt(dz, p.W, out.dx);
  return out;
}

LstmForwardResult lstm_forward(std::span<const Matrix> sequence, const LstmParams& p, double recurrent_rate, Mode mode,
                               Rng& rng) {
  if (sequence.empty()) throw Error(ErrorKind::Size, "lstm_forward: empty sequence");
  p.validate();
  if (!(recurrent_rate >= 0.0 && recurrent_rate < 1.0))
    throw Error(ErrorKind::Config, "recurrent dropout rate must lie in [0, 1)");
  const std::size_t batch = sequence.front().rows(), h = p.hidden();
  LstmForwardResult r;
  const bool train = mode == Mode::Train;
  if (train && recurrent_rate > 0.0) r.cache.recurrent_mask = dropout_mask(batch, h, recurrent_rate, rng);
  if (train) r.cache.steps.resize(sequence.size());

  Matrix h_cur(batch, h), c_cur(batch, h), h_next, c_next;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    cell_forward(sequence[t], h_cur, c_cur, p, r.cache.recurrent_mask, h_next, c_next,
                 train ? &r.cache.steps[t] : nullptr);
    std::swap(h_cur, h_next);
    std::swap(c_cur, c_next);
  }
  r.h_last = std::move(h_cur);
  return r;
}

void lstm_backward(const Matrix& dh_last, const LstmSequenceCache& cache, const LstmParams& p, LstmGrads& grads,
                   std::vector<Matrix>* dx) {
  if (cache.steps.empty()) throw Error(ErrorKind::State, "lstm_backward: forward caches missing (run in training mode)");
  require_shape(grads.dW, p.W.rows(), p.W.cols(), "lstm dW");
  require_shape(grads.dU, p.U.rows(), p.U.cols(), "lstm dU");
  require_shape(grads.db, 1, p.b.cols(), "lstm db");
  const std::size_t steps = cache.steps.size();
  if (dx) dx->assign(steps, Matrix{});
  Matrix dh = dh_last;
  Matrix dc(dh.rows(), dh.cols());
  for (std::size_t t = steps; t-- > 0;) {
    auto g = lstm_cell_backward(dh, dc, cache.steps[t], p, cache.recurrent_mask, grads, dx != nullptr);
    dh = std::move(g.dh_prev);
    dc = std::move(g.dc_prev);
    if (dx) (*dx)[t] = std::move(g.dx);
  }
}

// -- initialisation ----------------------------------------------------------

void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.flat()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

void orthogonal(Matrix& w, Rng& rng) {
  const bool by_rows = w.rows() <= w.cols();
  const std::size_t count = by_rows ? w.rows() : w.cols();
  const std::size_t len = by_rows ? w.cols() : w.rows();
  std::vector<std::vector<double>> vecs(count, std::vector<double>(len));
  for (auto& v : vecs)
    for (auto& e : v) e = standard_normal(rng);
  // Modified Gram-Schmidt.
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < len; ++k) d += vecs[i][k] * vecs[j][k];
      for (std::size_t k = 0; k < len; ++k) vecs[i][k] -= d * vecs[j][k];
    }
    double norm = 0.0;
    for (double e : vecs[i]) norm += e * e;
    norm = std::sqrt(norm);
    for (auto& e : vecs[i]) e /= norm;
  }
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < len; ++k) (by_rows ? w(i, k) : w(k, i)) = vecs[i][k];
}

LstmParams init_lstm(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.W.resize(input_dim, 4 * hidden);
  p.U.resize(hidden, 4 * hidden);
  p.b.resize(1, 4 * hidden);
  glorot_uniform(p.W, input_dim, 4 * hidden, rng);
  orthogonal(p.U, rng);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b[j] = 1.0;  // forget gate
  return p;
}

DenseParams init_dense(std::size_t in, std::size_t out, Rng& rng) {
  DenseParams p;
  p.W.resize(in, out);
  p.b.resize(1, out);
  glorot_uniform(p.W, in, out, rng);
  return p;
}

// -- optimiser ---------------------------------------------------------------

AdamState AdamState::for_params(std::span<const Matrix* const> params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(ErrorKind::Dimension, "adam: parameter, gradient and moment counts differ");
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& theta = *params[k];
    const Matrix& g = grads[k];
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    if (!theta.same_shape(g) || !theta.same_shape(m) || !theta.same_shape(v))
      throw Error(ErrorKind::Dimension, "adam: shape mismatch in tensor " + std::to_string(k));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double global_norm(std::span<const Matrix> grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.flat()) s += v * v;
  return std::sqrt(s);
}

double clip_global_norm(std::span<Matrix> grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads)
      for (auto& v : g.flat()) v *= scale;
  }
  return norm;
}

// -- verification ------------------------------------------------------------

GradCheckResult check_gradients(const std::function<double()>& loss, std::span<Matrix* const> params,
                                std::span<const Matrix> analytic, double delta, double floor) {
  if (params.size() != analytic.size()) throw Error(ErrorKind::Dimension, "gradcheck: tensor count mismatch");
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    if (!p.same_shape(analytic[k])) throw Error(ErrorKind::Dimension, "gradcheck: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + delta;
      const double up = loss();
      p[i] = saved - delta;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * delta);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      r.max_rel_error = std::max(r.max_rel_error, rel);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace vpf::nn
