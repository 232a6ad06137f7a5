#include "vpf/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vpf/error.hpp"
#include "vpf/kernels.hpp"
#include "vpf/log.hpp"

namespace vpf::model {

// -- architecture ------------------------------------------------------------

ArchitectureSpec ArchitectureSpec::paper() { return ArchitectureSpec{}; }

ArchitectureSpec ArchitectureSpec::desk() {
  ArchitectureSpec s;
  s.lstm_units = 32;
  s.dense1 = 128;
  s.dense2 = 128;
  return s;
}

ArchitectureSpec ArchitectureSpec::from_preset(std::string_view name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw Error(ErrorKind::Config, "unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

void ArchitectureSpec::validate() const {
  if (lstm_units == 0 || dense1 == 0 || dense2 == 0 || output_dim == 0 || feat_dim == 0 || lookback == 0)
    throw Error(ErrorKind::Config, "architecture sizes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0) || !(recurrent_dropout >= 0.0 && recurrent_dropout < 1.0))
    throw Error(ErrorKind::Config, "dropout rates must lie in [0, 1)");
  if (!(leaky_alpha >= 0.0)) throw Error(ErrorKind::Config, "LeakyReLU slope must be non-negative");
}

std::size_t parameter_count(const ArchitectureSpec& s) {
  const std::size_t u = s.lstm_units;
  const std::size_t lstm_power = 4 * u * (1 + u) + 4 * u;
  const std::size_t lstm_feat = 4 * u * (s.feat_dim + u) + 4 * u;
  return lstm_power + lstm_feat + s.dense1 * 2 * u + s.dense1 + s.dense2 * s.dense1 + s.dense2 +
         s.output_dim * s.dense2 + s.output_dim;
}

const std::array<const char*, ModelParams::kTensorCount>& ModelParams::tensor_names() {
  static const std::array<const char*, kTensorCount> names = {
      "power_lstm.W", "power_lstm.U", "power_lstm.b", "feature_lstm.W", "feature_lstm.U", "feature_lstm.b",
      "dense1.W",     "dense1.b",     "dense2.W",     "dense2.b",       "output.W",       "output.b"};
  return names;
}

std::array<Matrix*, ModelParams::kTensorCount> ModelParams::tensors() {
  return {&power_lstm.W, &power_lstm.U, &power_lstm.b, &feature_lstm.W, &feature_lstm.U, &feature_lstm.b,
          &dense1.W,     &dense1.b,     &dense2.W,     &dense2.b,       &output.W,       &output.b};
}

std::array<const Matrix*, ModelParams::kTensorCount> ModelParams::tensors() const {
  return {&power_lstm.W, &power_lstm.U, &power_lstm.b, &feature_lstm.W, &feature_lstm.U, &feature_lstm.b,
          &dense1.W,     &dense1.b,     &dense2.W,     &dense2.b,       &output.W,       &output.b};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* t : tensors()) n += t->size();
  return n;
}

void ModelParams::validate() const {
  arch.validate();
  const std::size_t u = arch.lstm_units;
  require_shape(power_lstm.W, 1, 4 * u, "power_lstm.W");
  require_shape(power_lstm.U, u, 4 * u, "power_lstm.U");
  require_shape(power_lstm.b, 1, 4 * u, "power_lstm.b");
  require_shape(feature_lstm.W, arch.feat_dim, 4 * u, "feature_lstm.W");
  require_shape(feature_lstm.U, u, 4 * u, "feature_lstm.U");
  require_shape(feature_lstm.b, 1, 4 * u, "feature_lstm.b");
  require_shape(dense1.W, 2 * u, arch.dense1, "dense1.W");
  require_shape(dense1.b, 1, arch.dense1, "dense1.b");
  require_shape(dense2.W, arch.dense1, arch.dense2, "dense2.W");
  require_shape(dense2.b, 1, arch.dense2, "dense2.b");
  require_shape(output.W, arch.dense2, arch.output_dim, "output.W");
  require_shape(output.b, 1, arch.output_dim, "output.b");
  if (power_z.features() != 1 || feature_z.features() != arch.feat_dim)
    throw Error(ErrorKind::Dimension, "normalisation parameters do not match the architecture");
}

ModelParams build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  nn::Rng rng(seed);
  ModelParams m;
  m.arch = spec;
  m.power_lstm = nn::init_lstm(1, spec.lstm_units, rng);
  m.feature_lstm = nn::init_lstm(spec.feat_dim, spec.lstm_units, rng);
  m.dense1 = nn::init_dense(2 * spec.lstm_units, spec.dense1, rng);
  m.dense2 = nn::init_dense(spec.dense1, spec.dense2, rng);
  m.output = nn::init_dense(spec.dense2, spec.output_dim, rng);
  m.power_z = {{0.0}, {1.0}};
  m.feature_z = {std::vector<double>(spec.feat_dim, 0.0), std::vector<double>(spec.feat_dim, 1.0)};
  return m;
}

void fit_normalization(ModelParams& model, const grid::PowerSeries& train_power,
                       const grid::FeatureFrame& train_features) {
  model.power_z = prep::fit_zscore(train_power);
  model.feature_z = prep::fit_zscore(train_features.values);
}

// -- forward / backward ------------------------------------------------------

Batch assemble_batch(const prep::WindowDataset& data, std::span<const std::size_t> sample_ids) {
  const std::size_t batch = sample_ids.size(), lookback = data.lookback, horizon = data.horizon;
  const std::size_t f = data.features.cols();
  Batch out;
  out.x_power.assign(lookback, Matrix(batch, 1));
  out.x_feat.assign(lookback, Matrix(batch, f));
  out.y.resize(batch, horizon);
  out.mask.resize(batch, horizon);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t o = data.origins.at(sample_ids[b]);
    const std::size_t first = o + 1 - lookback;
    for (std::size_t t = 0; t < lookback; ++t) {
      out.x_power[t](b, 0) = data.power[first + t];
      const double* src = data.features.data() + (first + t) * f;
      std::copy(src, src + f, out.x_feat[t].data() + b * f);
    }
    for (std::size_t k = 0; k < horizon; ++k) {
      out.y(b, k) = data.power[o + 1 + k];
      out.mask(b, k) = data.status[o + 1 + k] == grid::Status::Reliable ? 1.0 : 0.0;
    }
  }
  return out;
}

Matrix forward(const ModelParams& model, const Batch& batch, nn::Mode mode, nn::Rng& rng, ForwardCache* cache) {
  const auto& a = model.arch;
  if (batch.x_power.size() != batch.x_feat.size() || batch.x_power.empty())
    throw Error(ErrorKind::Dimension, "batch branches must have the same non-zero length");
  if (batch.x_feat.front().cols() != a.feat_dim)
    throw Error(ErrorKind::Dimension, "feature width " + std::to_string(batch.x_feat.front().cols()) +
                                          " does not match architecture " + std::to_string(a.feat_dim));
  const bool train = mode == nn::Mode::Train;
  if (train && !cache) throw Error(ErrorKind::State, "training-mode forward needs a cache");

  auto power = nn::lstm_forward(batch.x_power, model.power_lstm, a.recurrent_dropout, mode, rng);
  auto feat = nn::lstm_forward(batch.x_feat, model.feature_lstm, a.recurrent_dropout, mode, rng);

  const std::size_t bsz = power.h_last.rows(), u = a.lstm_units;
  Matrix concat(bsz, 2 * u);
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t j = 0; j < u; ++j) {
      concat(b, j) = nn::leaky_relu(power.h_last(b, j), a.leaky_alpha);
      concat(b, u + j) = nn::leaky_relu(feat.h_last(b, j), a.leaky_alpha);
    }

  Matrix z1 = nn::dense_forward(concat, model.dense1);
  Matrix r1 = z1;
  for (auto& v : r1.flat()) v = nn::relu(v);
  auto d1 = nn::dropout_forward(r1, a.dropout, mode, rng);

  Matrix z2 = nn::dense_forward(d1.y, model.dense2);
  Matrix r2 = z2;
  for (auto& v : r2.flat()) v = nn::relu(v);
  auto d2 = nn::dropout_forward(r2, a.dropout, mode, rng);

  Matrix out = nn::dense_forward(d2.y, model.output);

  if (cache) {
    cache->power_seq = std::move(power.cache);
    cache->feature_seq = std::move(feat.cache);
    cache->power_h = std::move(power.h_last);
    cache->feature_h = std::move(feat.h_last);
    cache->concat = std::move(concat);
    cache->z1 = std::move(z1);
    cache->drop1_mask = std::move(d1.mask);
    cache->a1 = std::move(d1.y);
    cache->z2 = std::move(z2);
    cache->drop2_mask = std::move(d2.mask);
    cache->a2 = std::move(d2.y);
  }
  return out;
}

std::vector<Matrix> zero_grads(const ModelParams& model) {
  std::vector<Matrix> g;
  for (const Matrix* t : model.tensors()) g.emplace_back(t->rows(), t->cols());
  return g;
}

namespace {

// Gradient through dropout(relu(z)).
void relu_dropout_backward(Matrix& d, const Matrix& z, const Matrix& mask) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!mask.empty()) d[i] *= mask[i];
    d[i] *= nn::relu_grad(z[i]);
  }
}

}  // namespace

void backward(const ModelParams& model, const ForwardCache& cache, const Matrix& dpred, std::vector<Matrix>& grads) {
  if (cache.power_seq.steps.empty() || cache.feature_seq.steps.empty())
    throw Error(ErrorKind::State, "backward: forward caches missing (run forward in training mode)");
  if (grads.size() != ModelParams::kTensorCount) throw Error(ErrorKind::Dimension, "backward: wrong gradient count");
  const auto& a = model.arch;

  Matrix d2 = nn::dense_backward(cache.a2, dpred, model.output, grads[10], grads[11]);
  relu_dropout_backward(d2, cache.z2, cache.drop2_mask);
  Matrix d1 = nn::dense_backward(cache.a1, d2, model.dense2, grads[8], grads[9]);
  relu_dropout_backward(d1, cache.z1, cache.drop1_mask);
  Matrix dconcat = nn::dense_backward(cache.concat, d1, model.dense1, grads[6], grads[7]);

  const std::size_t bsz = dconcat.rows(), u = a.lstm_units;
  Matrix dh_power(bsz, u), dh_feat(bsz, u);
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t j = 0; j < u; ++j) {
      dh_power(b, j) = dconcat(b, j) * nn::leaky_relu_grad(cache.power_h(b, j), a.leaky_alpha);
      dh_feat(b, j) = dconcat(b, u + j) * nn::leaky_relu_grad(cache.feature_h(b, j), a.leaky_alpha);
    }

  nn::LstmGrads gp{std::move(grads[0]), std::move(grads[1]), std::move(grads[2])};
  nn::lstm_backward(dh_power, cache.power_seq, model.power_lstm, gp);
  grads[0] = std::move(gp.dW);
  grads[1] = std::move(gp.dU);
  grads[2] = std::move(gp.db);

  nn::LstmGrads gf{std::move(grads[3]), std::move(grads[4]), std::move(grads[5])};
  nn::lstm_backward(dh_feat, cache.feature_seq, model.feature_lstm, gf);
  grads[3] = std::move(gf.dW);
  grads[4] = std::move(gf.dU);
  grads[5] = std::move(gf.db);
}

// -- training ----------------------------------------------------------------

void TrainingConfig::validate() const {
  if (epochs == 0 || steps_per_epoch == 0 || batch_size == 0)
    throw Error(ErrorKind::Config, "epochs, steps per epoch and batch size must be positive");
  if (!(lr > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
}

bool EarlyStopping::observe(std::size_t epoch, double val_loss) {
  if (best_epoch_ == 0 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    return true;
  }
  ++wait_;
  return false;
}

nn::LossResult train_step(ModelParams& model, const Batch& batch, nn::LossKind loss, nn::AdamState& adam,
                          nn::Rng& rng, double clip_norm) {
  ForwardCache cache;
  const Matrix pred = forward(model, batch, nn::Mode::Train, rng, &cache);
  nn::LossResult res = nn::masked_loss(loss, pred, batch.y, batch.mask);
  if (res.skipped) return res;
  if (!std::isfinite(res.value)) throw Error(ErrorKind::Numerical, "non-finite training loss");
  auto grads = zero_grads(model);
  backward(model, cache, res.grad, grads);
  if (clip_norm > 0.0) nn::clip_global_norm(grads, clip_norm);
  auto params = model.tensors();
  nn::adam_step(params, grads, adam);
  return res;
}

double evaluate_loss(const ModelParams& model, const prep::WindowDataset& data, nn::LossKind loss,
                     std::size_t batch_size) {
  double weighted = 0.0;
  std::size_t count = 0;
  nn::Rng unused(0);
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    ids.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) ids.push_back(i);
    const Batch batch = assemble_batch(data, ids);
    const Matrix pred = forward(model, batch, nn::Mode::Infer, unused);
    const auto r = nn::masked_loss(loss, pred, batch.y, batch.mask);
    if (r.skipped) continue;
    weighted += r.value * static_cast<double>(r.count);
    count += r.count;
  }
  if (count == 0) throw Error(ErrorKind::Data, "no reliable targets to evaluate");
  return weighted / static_cast<double>(count);
}

TrainingResult train_initial(ModelParams model, const prep::WindowDataset& train, const prep::WindowDataset& val,
                             const TrainingConfig& config) {
  config.validate();
  model.validate();
  if (train.size() == 0 || val.size() == 0) throw Error(ErrorKind::Size, "training and validation sets must be non-empty");
  if (train.reliable_targets() == 0) throw Error(ErrorKind::Data, "all training targets are unreliable");

  TrainingResult result;
  nn::Rng rng(config.seed);
  prep::BatchSampler sampler(train.size(), config.batch_size, config.seed ^ 0x9e3779b97f4a7c15ULL);
  auto adam = nn::AdamState::for_params(std::as_const(model).tensors(), config.lr);
  EarlyStopping stopper(config.patience);
  ModelParams best = model;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t s = 0; s < config.steps_per_epoch; ++s) {
      const Batch batch = assemble_batch(train, sampler.next());
      const auto r = train_step(model, batch, config.loss, adam, rng, config.clip_norm);
      if (r.skipped) {
        ++result.skipped_batches;
        continue;
      }
      loss_sum += r.value;
      ++steps;
    }
    const double val_loss = evaluate_loss(model, val, config.loss, config.batch_size);
    if (!std::isfinite(val_loss)) throw Error(ErrorKind::Numerical, "non-finite validation loss");
    const double train_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    result.history.push_back({epoch, train_loss, val_loss});
    log::info("epoch " + std::to_string(epoch) + " train " + std::to_string(train_loss) + " val " +
              std::to_string(val_loss));
    if (stopper.observe(epoch, val_loss)) best = model;
    if (stopper.stop()) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  result.model = std::move(best);
  return result;
}

// -- inference ---------------------------------------------------------------

std::vector<double> predict(const ModelParams& model, std::span<const double> power_window,
                            const Matrix& feature_window) {
  const auto& a = model.arch;
  if (power_window.size() != a.lookback)
    throw Error(ErrorKind::Dimension, "power window length " + std::to_string(power_window.size()) + ", expected " +
                                          std::to_string(a.lookback));
  require_shape(feature_window, a.lookback, a.feat_dim, "feature window");
  Batch batch;
  batch.x_power.assign(a.lookback, Matrix(1, 1));
  batch.x_feat.assign(a.lookback, Matrix(1, a.feat_dim));
  for (std::size_t t = 0; t < a.lookback; ++t) {
    batch.x_power[t](0, 0) = model.power_z.apply(power_window[t]);
    for (std::size_t c = 0; c < a.feat_dim; ++c) batch.x_feat[t](0, c) = model.feature_z.apply(feature_window(t, c), c);
  }
  nn::Rng unused(0);
  const Matrix z = forward(model, batch, nn::Mode::Infer, unused);
  std::vector<double> out(z.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = model.power_z.invert(z(0, k));
  return out;
}

prep::WindowDataset model_dataset(const ModelParams& model, const grid::PowerSeries& power,
                                  const grid::FeatureFrame& features) {
  return prep::normalize(power, features, model.power_z, model.feature_z, model.arch.lookback, model.arch.output_dim);
}

Matrix predict_origins(const ModelParams& model, const prep::WindowDataset& data,
                       std::span<const std::size_t> origin_indices, std::size_t batch_size) {
  const std::size_t horizon = model.arch.output_dim;
  Matrix out(origin_indices.size(), horizon);
  nn::Rng unused(0);
  for (std::size_t start = 0; start < origin_indices.size(); start += batch_size) {
    const std::size_t end = std::min(origin_indices.size(), start + batch_size);
    const std::size_t bsz = end - start;
    const std::size_t f = data.features.cols();
    Batch batch;
    batch.x_power.assign(data.lookback, Matrix(bsz, 1));
    batch.x_feat.assign(data.lookback, Matrix(bsz, f));
    for (std::size_t b = 0; b < bsz; ++b) {
      const std::size_t o = origin_indices[start + b];
      if (o + 1 < data.lookback || o >= data.power.size())
        throw Error(ErrorKind::Range, "origin index without a full lookback");
      const std::size_t first = o + 1 - data.lookback;
      for (std::size_t t = 0; t < data.lookback; ++t) {
        batch.x_power[t](b, 0) = data.power[first + t];
        const double* src = data.features.data() + (first + t) * f;
        std::copy(src, src + f, batch.x_feat[t].data() + b * f);
      }
    }
    const Matrix z = forward(model, batch, nn::Mode::Infer, unused);
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t k = 0; k < horizon; ++k) out(start + b, k) = model.power_z.invert(z(b, k));
  }
  return out;
}

forecast::ForecastSet rolling_forecast(const ModelParams& model, const grid::PowerSeries& power,
                                       const grid::FeatureFrame& features, std::span<const Timestamp> origins,
                                       std::string model_id) {
  const auto data = model_dataset(model, power, features);
  forecast::ForecastSet set;
  set.model = std::move(model_id);
  std::vector<std::size_t> idx;
  std::vector<Timestamp> kept;
  for (Timestamp t : origins) {
    const auto offset = t - power.start;
    const bool on_grid = offset.count() >= 0 && offset % kStep == std::chrono::seconds{0};
    const auto i = on_grid ? static_cast<std::size_t>(offset / kStep) : 0;
    if (!on_grid || i + 1 < model.arch.lookback || i + model.arch.output_dim >= power.size()) {
      ++set.skipped;
      continue;
    }
    idx.push_back(i);
    kept.push_back(t);
  }
  if (set.skipped) log::warn(std::to_string(set.skipped) + " forecast origins skipped (insufficient data)");
  const Matrix values = predict_origins(model, data, idx);
  set.records.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto row = values.row(r);
    set.records.push_back({kept[r], std::vector<double>(row.begin(), row.end())});
  }
  return set;
}

}  // namespace vpf::model
