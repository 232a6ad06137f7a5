#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "vpf/matrix.hpp"

/// Layers, losses and the optimiser for the fixed two-branch LSTM family.
/// Everything is batch-major: row b of every activation matrix is sample b.
namespace vpf::nn {

using Rng = std::mt19937_64;

enum class Mode { Train, Infer };

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double standard_normal(Rng& rng);

// -- activations -------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }
inline double leaky_relu(double x, double alpha) { return x >= 0.0 ? x : alpha * x; }
inline double leaky_relu_grad(double x, double alpha) { return x >= 0.0 ? 1.0 : alpha; }
inline double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}
inline double tanh_grad(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

inline constexpr double kLeakyAlpha = 0.01;

// -- losses ------------------------------------------------------------------

enum class LossKind { MAE, MSE };

const char* to_string(LossKind kind);
LossKind parse_loss(std::string_view name);

/// Mean over unmasked elements. When every element is masked, `skipped` is
/// set, value is 0 and the gradient is all zeros.
struct LossResult {
  double value = 0.0;
  Matrix grad;             // d value / d pred
  std::size_t count = 0;   // unmasked elements
  bool skipped = false;
};

LossResult masked_mae(const Matrix& pred, const Matrix& target, const Matrix& mask);
LossResult masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask);
LossResult masked_loss(LossKind kind, const Matrix& pred, const Matrix& target, const Matrix& mask);

// -- dropout -----------------------------------------------------------------

struct DropoutSpec {
  double rate = 0.5;            // dense-layer dropout
  double recurrent_rate = 0.5;  // LSTM hidden-to-hidden dropout

  void validate() const;
};

/// Inverted-dropout mask of the given shape: each entry is 0 with probability
/// `rate`, else 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

struct DropoutOutput {
  Matrix y;
  Matrix mask;  // empty in inference mode or for rate 0
};

DropoutOutput dropout_forward(const Matrix& x, double rate, Mode mode, Rng& rng);

// -- dense -------------------------------------------------------------------

/// y = x W + b with W stored in x out.
struct DenseParams {
  Matrix W;
  Matrix b;

  std::size_t in() const { return W.rows(); }
  std::size_t out() const { return W.cols(); }
};

Matrix dense_forward(const Matrix& x, const DenseParams& p);

/// Accumulates into dW, db; returns dx (skipped when `want_dx` is false).
Matrix dense_backward(const Matrix& x, const Matrix& dy, const DenseParams& p, Matrix& dW, Matrix& db,
                      bool want_dx = true);

// -- LSTM --------------------------------------------------------------------

/// Gate blocks along the 4h axis are ordered input, forget, candidate, output.
/// W: d x 4h (input weights), U: h x 4h (recurrent weights), b: 1 x 4h.
struct LstmParams {
  Matrix W;
  Matrix U;
  Matrix b;

  std::size_t input_dim() const { return W.rows(); }
  std::size_t hidden() const { return U.rows(); }
  void validate() const;
};

struct LstmCellCache {
  Matrix x;        // B x d
  Matrix h_in;     // h_prev after the recurrent mask, B x h
  Matrix c_prev;   // B x h
  Matrix gates;    // activated i, f, g, o; B x 4h
  Matrix tanh_c;   // B x h
};

struct LstmCellOutput {
  Matrix h;
  Matrix c;
  LstmCellCache cache;
};

/// One step: i,f,o = sigmoid, g = tanh; c = f*c_prev + i*g; h = o*tanh(c).
/// `recurrent_mask` (B x h, may be empty) multiplies h_prev inside the
/// recurrent product.
LstmCellOutput lstm_cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmParams& p,
                                 const Matrix& recurrent_mask = {});

struct LstmGrads {
  Matrix dW, dU, db;
};

struct LstmCellGrads {
  Matrix dh_prev;
  Matrix dc_prev;
  Matrix dx;  // empty unless requested
};

LstmCellGrads lstm_cell_backward(const Matrix& dh, const Matrix& dc, const LstmCellCache& cache, const LstmParams& p,
                                 const Matrix& recurrent_mask, LstmGrads& grads, bool want_dx);

struct LstmSequenceCache {
  std::vector<LstmCellCache> steps;
  Matrix recurrent_mask;  // fixed for the whole sequence; empty when disabled
};

struct LstmForwardResult {
  Matrix h_last;            // B x h
  LstmSequenceCache cache;  // populated in training mode only
};

/// Runs the cell over `sequence` (T matrices of B x d) from zero state and
/// returns the final hidden state. In training mode a single variational
/// recurrent dropout mask is drawn per sequence.
LstmForwardResult lstm_forward(std::span<const Matrix> sequence, const LstmParams& p, double recurrent_rate, Mode mode,
                               Rng& rng);

/// Full backpropagation through time from a gradient on the final hidden
/// state. Accumulates into `grads`; fills `dx` (one matrix per step) when non-null.
void lstm_backward(const Matrix& dh_last, const LstmSequenceCache& cache, const LstmParams& p, LstmGrads& grads,
                   std::vector<Matrix>* dx = nullptr);

// -- initialisation ----------------------------------------------------------

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// Rows of `w` made orthonormal (w.rows() <= w.cols()) from a Gaussian draw.
void orthogonal(Matrix& w, Rng& rng);

LstmParams init_lstm(std::size_t input_dim, std::size_t hidden, Rng& rng);
DenseParams init_dense(std::size_t in, std::size_t out, Rng& rng);

// -- optimiser ---------------------------------------------------------------

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  /// Fresh moments shaped like `params`.
  static AdamState for_params(std::span<const Matrix* const> params, double lr);
};

/// theta -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

/// Scales all gradients so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_global_norm(std::span<Matrix> grads, double max_norm);
double global_norm(std::span<const Matrix> grads);

// -- verification ------------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `loss` w.r.t. every
/// entry of every tensor in `params` (entries are restored afterwards).
/// Relative error: |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(const std::function<double()>& loss, std::span<Matrix* const> params,
                                std::span<const Matrix> analytic, double delta = 1e-5, double floor = 1e-6);

}  // namespace vpf::nn
