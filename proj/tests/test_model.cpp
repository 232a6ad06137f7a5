#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "vpf/error.hpp"
#include "vpf/model.hpp"

using namespace vpf;
using namespace vpf::model;

namespace {

ArchitectureSpec toy_arch() {
  ArchitectureSpec a;
  a.lstm_units = 4;
  a.dense1 = 8;
  a.dense2 = 8;
  a.lookback = 6;
  a.output_dim = 4;
  return a;
}

// Periodic power with a feature-driven component and smooth random features.
std::pair<grid::PowerSeries, grid::FeatureFrame> toy_series(std::size_t n, std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  grid::FeatureFrame f;
  f.start = make_time(2018, 1, 1);
  f.values.resize(n, grid::FeatureFrame::kColumns);
  for (std::size_t c = 0; c < f.values.cols(); ++c) {
    double v = g(rng);
    for (std::size_t i = 0; i < n; ++i) {
      v = 0.95 * v + 0.3 * g(rng);
      f.values(i, c) = v;
    }
  }
  grid::PowerSeries p;
  p.start = f.start;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / 24.0;
    p.values.push_back(10.0 + 4.0 * std::sin(phase) + 0.5 * f.values(i, 0) + noise * g(rng));
    p.status.push_back(grid::Status::Reliable);
  }
  return {p, f};
}

std::size_t walk_parameter_count(const ModelParams& m) {
  std::size_t n = 0;
  for (const Matrix* t : m.tensors()) n += t->rows() * t->cols();
  return n;
}

}  // namespace

TEST_CASE("parameter count of the paper architecture") {
  const auto spec = ArchitectureSpec::paper();
  const std::size_t expect = 4 * 100 * (1 + 100) + 4 * 100 + 4 * 100 * (17 + 100) + 4 * 100 + 500 * 200 + 500 +
                             500 * 500 + 500 + 192 * 500 + 192;
  CHECK(expect == 535192);
  CHECK(parameter_count(spec) == expect);
  const auto m = build_model(spec, 1);
  CHECK(walk_parameter_count(m) == expect);
  CHECK(m.power_lstm.W.rows() == 1);
  CHECK(m.feature_lstm.W.rows() == 17);
  CHECK(m.dense1.W.rows() == 200);
  CHECK(m.output.W.cols() == 192);
}

TEST_CASE("parameter count agrees with the tensors for random architectures") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> d(1, 24);
  for (int i = 0; i < 20; ++i) {
    ArchitectureSpec a;
    a.lstm_units = d(rng);
    a.dense1 = d(rng);
    a.dense2 = d(rng);
    a.output_dim = d(rng);
    a.feat_dim = d(rng);
    a.lookback = d(rng);
    const auto m = build_model(a, 7);
    CHECK(walk_parameter_count(m) == parameter_count(a));
    CHECK(m.parameter_count() == parameter_count(a));
    // one forward pass on a single sample yields output_dim values
    Batch b;
    b.x_power.assign(a.lookback, Matrix(1, 1));
    b.x_feat.assign(a.lookback, Matrix(1, a.feat_dim));
    nn::Rng r(0);
    const Matrix out = forward(m, b, nn::Mode::Infer, r);
    CHECK(out.rows() == 1);
    CHECK(out.cols() == a.output_dim);
  }
}

TEST_CASE("presets and validation") {
  CHECK(ArchitectureSpec::from_preset("paper") == ArchitectureSpec::paper());
  CHECK(ArchitectureSpec::desk().lstm_units == 32);
  CHECK_THROWS_AS(ArchitectureSpec::from_preset("huge"), Error);
  auto a = toy_arch();
  a.dense1 = 0;
  CHECK_THROWS_AS(build_model(a, 1), Error);
}

TEST_CASE("initialisation is deterministic per seed") {
  const auto a = build_model(toy_arch(), 5), b = build_model(toy_arch(), 5), c = build_model(toy_arch(), 6);
  for (std::size_t i = 0; i < ModelParams::kTensorCount; ++i) CHECK(*a.tensors()[i] == *b.tensors()[i]);
  CHECK(a.power_lstm.W != c.power_lstm.W);
}

TEST_CASE("composed model gradients match finite differences") {
  for (double rate : {0.0, 0.5}) {
    auto arch = toy_arch();
    arch.dropout = rate;
    arch.recurrent_dropout = rate;
    auto m = build_model(arch, 3);
    // non-zero biases so every code path carries gradient
    nn::Rng init(4);
    for (Matrix* t : m.tensors())
      if (t->rows() == 1)
        for (auto& v : t->flat()) v = 0.2 * (2 * nn::uniform01(init) - 1);
    auto [p, f] = toy_series(40, 5);
    m.power_z = {{10.0}, {3.0}};
    m.feature_z = prep::fit_zscore(f.values);
    auto ds = prep::normalize(p, f, m.power_z, m.feature_z, arch.lookback, arch.output_dim);
    ds.origins = {8, 20};
    const Batch batch = assemble_batch(ds, std::vector<std::size_t>{0, 1});
    auto loss = [&] {
      nn::Rng r(77);
      ForwardCache c;
      const Matrix pred = forward(m, batch, nn::Mode::Train, r, &c);
      return nn::masked_mse(pred, batch.y, batch.mask).value;
    };
    nn::Rng r(77);
    ForwardCache cache;
    const Matrix pred = forward(m, batch, nn::Mode::Train, r, &cache);
    const auto l = nn::masked_mse(pred, batch.y, batch.mask);
    auto grads = zero_grads(m);
    backward(m, cache, l.grad, grads);
    const auto tensors = m.tensors();
    const auto res = nn::check_gradients(loss, tensors, grads);
    CHECK(res.checked == m.parameter_count());
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("zero-weight model forecasts the training mean") {
  auto m = build_model(toy_arch(), 1);
  for (Matrix* t : m.tensors()) t->fill(0.0);
  m.power_z = {{5.0}, {2.0}};
  m.feature_z = {std::vector<double>(17, 0.0), std::vector<double>(17, 1.0)};
  std::vector<double> window(6, 123.0);
  Matrix feat(6, 17);
  const auto y = predict(m, window, feat);
  REQUIRE(y.size() == 4);
  for (double v : y) CHECK(v == 5.0);
  std::vector<double> short_window(5, 1.0);
  try {
    predict(m, short_window, feat);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
}

TEST_CASE("inference ignores the dropout random stream") {
  auto arch = toy_arch();
  const auto m = build_model(arch, 9);
  auto [p, f] = toy_series(60, 1);
  auto ds = prep::normalize(p, f, m.power_z, m.feature_z, arch.lookback, arch.output_dim);
  ds.origins = prep::window_origins(p.size(), arch.lookback, arch.output_dim);
  std::vector<std::size_t> ids(ds.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const Batch b = assemble_batch(ds, ids);
  nn::Rng r1(1), r2(999);
  CHECK(forward(m, b, nn::Mode::Infer, r1) == forward(m, b, nn::Mode::Infer, r2));
  std::vector<double> w(p.values.begin(), p.values.begin() + 6);
  CHECK(predict(m, w, f.values.row_block(0, 6)) == predict(m, w, f.values.row_block(0, 6)));
}

TEST_CASE("early stopping rule") {
  EarlyStopping worse(0);
  CHECK(worse.observe(1, 1.0));
  CHECK_FALSE(worse.stop());
  CHECK_FALSE(worse.observe(2, 2.0));
  CHECK(worse.stop());
  CHECK(worse.best_epoch() == 1);

  EarlyStopping s(2);
  const double losses[] = {5, 4, 4.5, 3, 3.1, 3.2, 1};
  std::size_t stopped_at = 0;
  for (std::size_t e = 1; e <= 7; ++e) {
    s.observe(e, losses[e - 1]);
    if (s.stop()) {
      stopped_at = e;
      break;
    }
  }
  CHECK(stopped_at == 6);
  CHECK(s.best_epoch() == 4);
  CHECK(s.best_loss() == 3.0);
}

TEST_CASE("training reduces the loss and keeps the best validation weights") {
  auto arch = toy_arch();
  arch.lstm_units = 8;
  arch.dense1 = 16;
  arch.dense2 = 16;
  arch.dropout = 0.0;
  arch.recurrent_dropout = 0.0;
  auto [p, f] = toy_series(600, 11);
  auto m = build_model(arch, 2);
  const auto train_p = p.slice(0, 450), val_p = p.slice(450, 600);
  const auto train_f = f.slice(0, 450), val_f = f.slice(450, 600);
  fit_normalization(m, train_p, train_f);
  auto tr = model_dataset(m, train_p, train_f);
  tr.origins = prep::window_origins(tr.power.size(), arch.lookback, arch.output_dim);
  auto va = model_dataset(m, val_p, val_f);
  va.origins = prep::window_origins(va.power.size(), arch.lookback, arch.output_dim);

  TrainingConfig cfg;
  cfg.epochs = 30;
  cfg.steps_per_epoch = 20;
  cfg.batch_size = 32;
  cfg.lr = 0.01;
  cfg.patience = 30;
  cfg.seed = 3;
  const double initial = evaluate_loss(m, tr, nn::LossKind::MAE);
  const auto res = train_initial(m, tr, va, cfg);
  CHECK(res.history.size() <= cfg.epochs);
  const double final_loss = evaluate_loss(res.model, tr, nn::LossKind::MAE);
  CHECK(final_loss * 10.0 < initial);
  // the returned weights are those of the best validation epoch
  double best = 1e300;
  for (const auto& e : res.history) best = std::min(best, e.val_loss);
  CHECK(res.history[res.best_epoch - 1].val_loss == best);
  CHECK(evaluate_loss(res.model, va, nn::LossKind::MAE, cfg.batch_size) == best);

  // same seed, same result bit for bit
  const auto again = train_initial(m, tr, va, cfg);
  for (std::size_t i = 0; i < ModelParams::kTensorCount; ++i)
    CHECK(*again.model.tensors()[i] == *res.model.tensors()[i]);
}

TEST_CASE("training rejects fully unreliable targets") {
  const auto arch = toy_arch();
  auto [p, f] = toy_series(100, 1);
  for (auto& s : p.status) s = grid::Status::Unreliable;
  const auto m = build_model(arch, 1);
  auto ds = model_dataset(m, p, f);
  ds.origins = prep::window_origins(p.size(), arch.lookback, arch.output_dim);
  try {
    train_initial(m, ds, ds, TrainingConfig{});
    FAIL("expected data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("rolling forecasts align with their origins") {
  auto arch = toy_arch();
  arch.lookback = prep::kLookback;
  arch.output_dim = prep::kHorizon;
  const auto m = build_model(arch, 4);
  auto [p, f] = toy_series(96 * 20, 2);
  std::vector<Timestamp> daily;
  for (int d = 1; d <= 14; ++d) daily.push_back(p.start + days(d) - kStep);
  const auto set = rolling_forecast(m, p, f, daily);
  CHECK(set.records.size() == 14);
  CHECK(set.skipped == 0);
  for (const auto& r : set.records) {
    REQUIRE(r.values.size() == 192);
    CHECK(r.target_time(1) == r.origin + kStep);
    CHECK(r.target_time(192) == r.origin + hours(48));
  }
  std::vector<Timestamp> quarter;
  for (int k = 0; k < 96; ++k) quarter.push_back(p.start + days(3) + kStep * k);
  CHECK(rolling_forecast(m, p, f, quarter).records.size() == 96);
  // too early, too late and off-grid origins are skipped
  const std::vector<Timestamp> bad{p.start, p.end() - hours(1), p.start + days(4) + minutes(5)};
  const auto skipped = rolling_forecast(m, p, f, bad);
  CHECK(skipped.records.empty());
  CHECK(skipped.skipped == 3);
  // a forecast from the rolling path equals the raw-window predict path
  const std::size_t o = 96 * 5 - 1;
  std::vector<double> w(p.values.begin() + (o - 95), p.values.begin() + o + 1);
  const auto direct = predict(m, w, f.values.row_block(o - 95, o + 1));
  const std::vector<Timestamp> one{p.time_at(o)};
  const auto via = rolling_forecast(m, p, f, one).records.at(0).values;
  for (std::size_t k = 0; k < 192; ++k) CHECK(via[k] == doctest::Approx(direct[k]).epsilon(1e-12));
}

TEST_CASE("checkpoints restore identical inference") {
  auto m = build_model(toy_arch(), 8);
  auto [p, f] = toy_series(200, 3);
  fit_normalization(m, p, f);
  Checkpoint ck{m, nn::AdamState::for_params(std::as_const(m).tensors(), 0.01), prep::QuantileScaler{-1.5, 3.25}};
  ck.optimizer->t = 17;
  ck.optimizer->m[3].fill(0.125);
  const auto path = std::filesystem::temp_directory_path() / "vpf_test_ckpt.json";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  for (std::size_t i = 0; i < ModelParams::kTensorCount; ++i) CHECK(*back.model.tensors()[i] == *m.tensors()[i]);
  CHECK(back.model.power_z == m.power_z);
  CHECK(back.model.feature_z == m.feature_z);
  CHECK(back.model.arch == m.arch);
  REQUIRE(back.optimizer);
  CHECK(back.optimizer->t == 17);
  CHECK(back.optimizer->m[3] == ck.optimizer->m[3]);
  REQUIRE(back.eval_scaler);
  CHECK(*back.eval_scaler == *ck.eval_scaler);
  std::vector<double> w(p.values.begin(), p.values.begin() + 6);
  CHECK(predict(back.model, w, f.values.row_block(0, 6)) == predict(m, w, f.values.row_block(0, 6)));
}
