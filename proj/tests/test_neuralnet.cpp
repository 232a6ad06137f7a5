#include "doctest.h"

#include <cmath>
#include <random>

#include "vpf/error.hpp"
#include "vpf/neuralnet.hpp"

using namespace vpf;
using namespace vpf::nn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.flat()) v = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

LstmParams random_lstm(std::size_t d, std::size_t h, Rng& rng, double scale = 0.5) {
  return {random_matrix(d, 4 * h, rng, scale), random_matrix(h, 4 * h, rng, scale), random_matrix(1, 4 * h, rng, scale)};
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straightforward re-implementation of the forward recursion, one sample and
// one unit at a time, written against the gate equations only.
Matrix oracle_lstm(const std::vector<Matrix>& seq, const LstmParams& p, const Matrix& mask) {
  const std::size_t B = seq[0].rows(), d = p.W.rows(), h = p.U.rows();
  Matrix hs(B, h), cs(B, h);
  for (const auto& x : seq) {
    Matrix hn(B, h), cn(B, h);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < h; ++j) {
        double pre[4];
        for (int g = 0; g < 4; ++g) {
          const std::size_t col = g * h + j;
          double s = p.b(0, col);
          for (std::size_t k = 0; k < d; ++k) s += x(b, k) * p.W(k, col);
          for (std::size_t k = 0; k < h; ++k) s += hs(b, k) * (mask.empty() ? 1.0 : mask(b, k)) * p.U(k, col);
          pre[g] = s;
        }
        const double i = sig(pre[0]), f = sig(pre[1]), g = std::tanh(pre[2]), o = sig(pre[3]);
        cn(b, j) = f * cs(b, j) + i * g;
        hn(b, j) = o * std::tanh(cn(b, j));
      }
    hs = hn;
    cs = cn;
  }
  return hs;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("activations") {
  CHECK(leaky_relu(-2.0, 0.01) == doctest::Approx(-0.02));
  CHECK(leaky_relu(2.0, 0.01) == 2.0);
  CHECK(relu(-3.0) == 0.0);
  CHECK(relu(3.0) == 3.0);
  Rng rng(1);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    double x = 8.0 * uniform01(rng) - 4.0;
    if (std::abs(x) < 1e-3) x += 0.01;  // keep away from the kinks
    auto fd = [&](auto f) { return (f(x + h) - f(x - h)) / (2 * h); };
    CHECK(std::abs(sigmoid_grad(x) - fd([](double v) { return sigmoid(v); })) < 1e-7);
    CHECK(std::abs(tanh_grad(x) - fd([](double v) { return std::tanh(v); })) < 1e-7);
    CHECK(std::abs(relu_grad(x) - fd([](double v) { return relu(v); })) < 1e-7);
    CHECK(std::abs(leaky_relu_grad(x, 0.01) - fd([](double v) { return leaky_relu(v, 0.01); })) < 1e-7);
  }
}

TEST_CASE("masked losses") {
  Matrix pred(1, 2), target(1, 2), mask(1, 2);
  pred[0] = 1;
  pred[1] = 3;
  mask.fill(1.0);
  CHECK(masked_mae(pred, target, mask).value == 2.0);
  CHECK(masked_mse(pred, target, mask).value == 5.0);
  mask[1] = 0.0;
  CHECK(masked_mae(pred, target, mask).value == 1.0);
  CHECK(masked_mse(pred, target, mask).value == 1.0);
  const auto g = masked_mse(pred, target, mask);
  CHECK(g.grad[0] == 2.0);
  CHECK(g.grad[1] == 0.0);
  CHECK(masked_mae(pred, pred, mask).value == 0.0);
  mask.fill(0.0);
  const auto none = masked_mae(pred, target, mask);
  CHECK(none.skipped);
  CHECK(none.value == 0.0);
  CHECK(std::isfinite(none.value));
  CHECK(parse_loss("mse") == LossKind::MSE);
  CHECK_THROWS_AS(parse_loss("huber"), Error);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(2);
  Matrix pred = random_matrix(3, 5, rng), target = random_matrix(3, 5, rng), mask(3, 5);
  for (auto& m : mask.flat()) m = uniform01(rng) < 0.7 ? 1.0 : 0.0;
  mask[0] = 1.0;
  for (auto kind : {LossKind::MAE, LossKind::MSE}) {
    const auto r = masked_loss(kind, pred, target, mask);
    Matrix* params[] = {&pred};
    const auto check = check_gradients([&] { return masked_loss(kind, pred, target, mask).value; }, params,
                                       std::span<const Matrix>(&r.grad, 1));
    CHECK(check.max_rel_error < 1e-6);
  }
}

TEST_CASE("dropout") {
  Rng rng(3);
  Matrix x(1, 100000);
  x.fill(1.0);
  const auto id = dropout_forward(x, 0.0, Mode::Train, rng);
  CHECK(id.y == x);
  CHECK(dropout_forward(x, 0.5, Mode::Infer, rng).y == x);
  const auto d = dropout_forward(x, 0.5, Mode::Train, rng);
  double mean = 0;
  for (double v : d.y.flat()) {
    CHECK((v == 0.0 || v == 2.0));
    mean += v;
  }
  mean /= static_cast<double>(x.size());
  CHECK(mean >= 0.98);
  CHECK(mean <= 1.02);
}

TEST_CASE("lstm cell with zero parameters stays at zero") {
  LstmParams p{Matrix(3, 8), Matrix(2, 8), Matrix(1, 8)};
  Rng rng(4);
  const auto out = lstm_cell_forward(random_matrix(5, 3, rng), Matrix(5, 2), Matrix(5, 2), p);
  for (double v : out.h.flat()) CHECK(v == 0.0);
  for (double v : out.c.flat()) CHECK(v == 0.0);
  for (std::size_t j = 0; j < 8; ++j) {
    if (j / 2 == 2)
      CHECK(out.cache.gates(0, j) == 0.0);
    else
      CHECK(out.cache.gates(0, j) == doctest::Approx(0.5));
  }
}

TEST_CASE("single-unit cell matches a hand computation") {
  LstmParams p{Matrix(1, 4), Matrix(1, 4), Matrix(1, 4)};
  const double w[] = {0.5, -0.3, 0.8, 0.1}, u[] = {0.2, 0.4, -0.6, 0.9}, b[] = {0.1, 1.0, -0.2, 0.05};
  for (int g = 0; g < 4; ++g) {
    p.W[g] = w[g];
    p.U[g] = u[g];
    p.b[g] = b[g];
  }
  Matrix x(1, 1), h0(1, 1), c0(1, 1);
  x[0] = 1.5;
  h0[0] = -0.4;
  c0[0] = 0.7;
  const double i = sig(0.5 * 1.5 + 0.2 * -0.4 + 0.1);
  const double f = sig(-0.3 * 1.5 + 0.4 * -0.4 + 1.0);
  const double g = std::tanh(0.8 * 1.5 - 0.6 * -0.4 - 0.2);
  const double o = sig(0.1 * 1.5 + 0.9 * -0.4 + 0.05);
  const double c = f * 0.7 + i * g;
  const auto out = lstm_cell_forward(x, h0, c0, p);
  CHECK(std::abs(out.c[0] - c) < 1e-14);
  CHECK(std::abs(out.h[0] - o * std::tanh(c)) < 1e-14);
}

TEST_CASE("saturated forget gate preserves the cell state") {
  const std::size_t h = 3;
  LstmParams p{Matrix(2, 4 * h), Matrix(h, 4 * h), Matrix(1, 4 * h)};
  for (std::size_t j = 0; j < h; ++j) p.b(0, h + j) = 50.0;
  Matrix c(1, h), hs(1, h), x(1, 2);
  c[0] = 0.8;
  c[1] = -1.7;
  c[2] = 3.0;
  const Matrix c0 = c;
  for (int t = 0; t < 100; ++t) {
    auto out = lstm_cell_forward(x, hs, c, p);
    hs = out.h;
    c = out.c;
  }
  CHECK(max_abs_diff(c, c0) < 1e-9);
}

TEST_CASE("lstm forward matches the step-loop oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 1 + trial, h = 2 + trial, B = 3, T = 4 + trial;
    const auto p = random_lstm(d, h, rng, 0.8);
    std::vector<Matrix> seq;
    for (std::size_t t = 0; t < T; ++t) seq.push_back(random_matrix(B, d, rng, 2.0));
    Rng r2(9);
    const auto res = lstm_forward(seq, p, 0.0, Mode::Infer, r2);
    CHECK(max_abs_diff(res.h_last, oracle_lstm(seq, p, {})) < 1e-12);
    // with a recurrent dropout mask, training mode matches the oracle using the drawn mask
    const auto tr = lstm_forward(seq, p, 0.5, Mode::Train, r2);
    REQUIRE(!tr.cache.recurrent_mask.empty());
    CHECK(tr.cache.steps.size() == T);
    CHECK(max_abs_diff(tr.h_last, oracle_lstm(seq, p, tr.cache.recurrent_mask)) < 1e-12);
  }
}

TEST_CASE("lstm forward edge cases") {
  Rng rng(6);
  const auto p = random_lstm(2, 3, rng);
  std::vector<Matrix> one{random_matrix(4, 2, rng)};
  const auto seq = lstm_forward(one, p, 0.0, Mode::Infer, rng);
  const auto cell = lstm_cell_forward(one[0], Matrix(4, 3), Matrix(4, 3), p);
  CHECK(seq.h_last == cell.h);
  std::vector<Matrix> many;
  for (int t = 0; t < 6; ++t) many.push_back(random_matrix(4, 2, rng));
  CHECK(lstm_forward(many, p, 0.0, Mode::Train, rng).h_last == lstm_forward(many, p, 0.0, Mode::Infer, rng).h_last);
  CHECK_THROWS_AS(lstm_forward(std::span<const Matrix>{}, p, 0.0, Mode::Infer, rng), Error);
  std::vector<Matrix> wrong{random_matrix(4, 5, rng)};
  try {
    lstm_forward(wrong, p, 0.0, Mode::Infer, rng);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
  LstmSequenceCache empty;
  LstmGrads g{Matrix(2, 12), Matrix(3, 12), Matrix(1, 12)};
  try {
    lstm_backward(Matrix(4, 3), empty, p, g);
    FAIL("expected state error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::State);
  }
}

TEST_CASE("lstm backpropagation through time matches finite differences") {
  Rng rng(7);
  const std::size_t d = 3, h = 4, T = 3, B = 2;
  auto p = random_lstm(d, h, rng, 0.7);
  std::vector<Matrix> seq;
  for (std::size_t t = 0; t < T; ++t) seq.push_back(random_matrix(B, d, rng, 1.5));
  const Matrix w = random_matrix(B, h, rng);  // loss = sum(w * h_T)
  for (double rate : {0.0, 0.5}) {
    Rng mask_rng(21);
    const auto fwd = lstm_forward(seq, p, rate, Mode::Train, mask_rng);
    LstmGrads g{Matrix(d, 4 * h), Matrix(h, 4 * h), Matrix(1, 4 * h)};
    std::vector<Matrix> dx;
    lstm_backward(w, fwd.cache, p, g, &dx);
    auto loss = [&] {
      Rng r(21);
      const auto out = lstm_forward(seq, p, rate, Mode::Train, r);
      double s = 0;
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * out.h_last[i];
      return s;
    };
    Matrix* params[] = {&p.W, &p.U, &p.b, &seq[0], &seq[1], &seq[2]};
    const Matrix analytic[] = {g.dW, g.dU, g.db, dx[0], dx[1], dx[2]};
    const auto r = check_gradients(loss, params, analytic);
    CHECK(r.checked == d * 4 * h + h * 4 * h + 4 * h + 3 * B * d);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(8);
  const auto p = random_lstm(2, 3, rng);
  std::vector<Matrix> seq;
  for (int t = 0; t < 4; ++t) seq.push_back(random_matrix(2, 2, rng));
  const auto fwd = lstm_forward(seq, p, 0.5, Mode::Train, rng);
  LstmGrads g{Matrix(2, 12), Matrix(3, 12), Matrix(1, 12)};
  lstm_backward(Matrix(2, 3), fwd.cache, p, g);
  for (const Matrix* m : {&g.dW, &g.dU, &g.db})
    for (double v : m->flat()) CHECK(v == 0.0);
}

TEST_CASE("dense layer gradients") {
  Rng rng(9);
  DenseParams p{random_matrix(4, 3, rng), random_matrix(1, 3, rng)};
  Matrix x = random_matrix(5, 4, rng), w = random_matrix(5, 3, rng);
  Matrix dW(4, 3), db(1, 3);
  const Matrix dx = dense_backward(x, w, p, dW, db);
  auto loss = [&] {
    const Matrix y = dense_forward(x, p);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s;
  };
  Matrix* params[] = {&p.W, &p.b, &x};
  const Matrix analytic[] = {dW, db, dx};
  CHECK(check_gradients(loss, params, analytic).max_rel_error < 1e-6);
}

TEST_CASE("mse on a linear layer reproduces the least-squares gradient") {
  Rng rng(10);
  const std::size_t n = 20, d = 4;
  Matrix X = random_matrix(n, d, rng), y = random_matrix(n, 1, rng);
  DenseParams p{random_matrix(d, 1, rng), Matrix(1, 1)};
  Matrix mask(n, 1);
  mask.fill(1.0);
  const auto l = masked_mse(dense_forward(X, p), y, mask);
  Matrix dW(d, 1), db(1, 1);
  dense_backward(X, l.grad, p, dW, db, false);
  for (std::size_t k = 0; k < d; ++k) {
    double expect = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = -y(i, 0);
      for (std::size_t j = 0; j < d; ++j) r += X(i, j) * p.W(j, 0);
      expect += 2.0 * X(i, k) * r / static_cast<double>(n);
    }
    CHECK(std::abs(dW(k, 0) - expect) < 1e-12);
  }
}

TEST_CASE("adam first step and zero gradients") {
  Matrix theta(1, 1);
  theta[0] = 1.0;
  Matrix* params[] = {&theta};
  auto st = AdamState::for_params(std::span<const Matrix* const>(params), 0.1);
  Matrix g(1, 1);
  g[0] = 2.0 * theta[0];
  adam_step(params, std::span<const Matrix>(&g, 1), st);
  CHECK(std::abs(theta[0] - 0.9) < 1e-9);
  CHECK(st.t == 1);

  Matrix phi(2, 2);
  phi.fill(0.37);
  const Matrix phi0 = phi;
  Matrix* pp[] = {&phi};
  auto s2 = AdamState::for_params(std::span<const Matrix* const>(pp), 0.01);
  const Matrix zero(2, 2);
  for (int i = 0; i < 5; ++i) adam_step(pp, std::span<const Matrix>(&zero, 1), s2);
  CHECK(phi == phi0);
  CHECK(s2.t == 5);
}

TEST_CASE("adam converges on a quadratic") {
  Matrix theta(1, 1);
  Matrix* params[] = {&theta};
  auto st = AdamState::for_params(std::span<const Matrix* const>(params), 0.1);
  for (int i = 0; i < 200; ++i) {
    Matrix g(1, 1);
    g[0] = 2.0 * (theta[0] - 3.0);
    adam_step(params, std::span<const Matrix>(&g, 1), st);
  }
  CHECK(std::abs(theta[0] - 3.0) < 0.05);
}

TEST_CASE("global norm clipping") {
  Matrix a(1, 2), b(1, 1);
  a[0] = 3;
  a[1] = 0;
  b[0] = 4;
  std::vector<Matrix> g{a, b};
  CHECK(global_norm(g) == 5.0);
  CHECK(clip_global_norm(g, 10.0) == 5.0);
  CHECK(g[0][0] == 3.0);
  clip_global_norm(g, 1.0);
  CHECK(global_norm(g) == doctest::Approx(1.0));
  CHECK(g[1][0] == doctest::Approx(0.8));
}

TEST_CASE("initialisers") {
  Rng rng(11);
  Matrix q(8, 32);
  orthogonal(q, rng);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 32; ++k) s += q(i, k) * q(j, k);
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  const auto p = init_lstm(5, 4, rng);
  const double lim = std::sqrt(6.0 / (5 + 16));
  for (double v : p.W.flat()) CHECK(std::abs(v) <= lim);
  for (std::size_t j = 0; j < 16; ++j) CHECK(p.b(0, j) == (j >= 4 && j < 8 ? 1.0 : 0.0));
  Rng a(12), b(12);
  CHECK(init_lstm(3, 5, a).U == init_lstm(3, 5, b).U);
}
