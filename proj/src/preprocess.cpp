#include "vpf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vpf/error.hpp"
#include "vpf/log.hpp"

namespace vpf::prep {

ZScoreParams fit_zscore(const Matrix& data, std::span<const std::uint8_t> use_row) {
  if (!use_row.empty() && use_row.size() != data.rows())
    throw Error(ErrorKind::Dimension, "fit_zscore: row mask length mismatch");
  const std::size_t f = data.cols();
  ZScoreParams p;
  p.mean.assign(f, 0.0);
  p.std.assign(f, 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (!use_row.empty() && !use_row[r]) continue;
    ++n;
    for (std::size_t c = 0; c < f; ++c) p.mean[c] += data(r, c);
  }
  if (n == 0) throw Error(ErrorKind::Data, "fit_zscore: no usable rows");
  for (auto& m : p.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (!use_row.empty() && !use_row[r]) continue;
    for (std::size_t c = 0; c < f; ++c) {
      const double d = data(r, c) - p.mean[c];
      p.std[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < f; ++c) {
    p.std[c] = std::sqrt(p.std[c] / static_cast<double>(n));
    if (!(p.std[c] > 0.0)) {
      log::warn("zero standard deviation in feature " + std::to_string(c) + "; using 1");
      p.std[c] = 1.0;
    }
  }
  return p;
}

ZScoreParams fit_zscore(const grid::PowerSeries& power) {
  power.validate();
  Matrix m(power.size(), 1);
  std::vector<std::uint8_t> use(power.size());
  for (std::size_t i = 0; i < power.size(); ++i) {
    m(i, 0) = power.values[i];
    use[i] = power.reliable(i) ? 1 : 0;
  }
  return fit_zscore(m, use);
}

Matrix apply_zscore(const Matrix& x, const ZScoreParams& params) {
  if (x.cols() != params.features()) throw Error(ErrorKind::Dimension, "apply_zscore: feature count mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = params.apply(x(r, c), c);
  return out;
}

Matrix invert_zscore(const Matrix& z, const ZScoreParams& params) {
  if (z.cols() != params.features()) throw Error(ErrorKind::Dimension, "invert_zscore: feature count mismatch");
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) out(r, c) = params.invert(z(r, c), c);
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::Size, "quantile of empty series");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

QuantileScaler fit_quantile_scaler(std::span<const double> series, double level_low, double level_high) {
  if (series.size() < 100) throw Error(ErrorKind::Size, "quantile scaler needs at least 100 points");
  if (!(level_low > 0.0 && level_low < level_high && level_high < 1.0))
    throw Error(ErrorKind::Config, "quantile levels must satisfy 0 < low < high < 1");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  QuantileScaler s;
  s.level_low = level_low;
  s.level_high = level_high;
  s.q_low = quantile_sorted(sorted, level_low);
  s.q_high = quantile_sorted(sorted, level_high);
  if (!(s.q_high > s.q_low)) throw Error(ErrorKind::DegenerateScale, "upper and lower quantiles coincide");
  return s;
}

SplitIndices split_indices(const grid::PowerSeries& power, const SplitSpec& spec) {
  if (!(spec.train_end < spec.val_end)) throw Error(ErrorKind::Config, "split boundaries must be strictly ordered");
  if (spec.train_end <= power.start || spec.val_end >= power.end())
    throw Error(ErrorKind::Range, "split boundaries " + format_timestamp(spec.train_end) + ", " +
                                      format_timestamp(spec.val_end) + " must lie inside the data");
  SplitIndices idx;
  idx.train_end = power.index_of(spec.train_end);
  idx.val_end = power.index_of(spec.val_end);
  idx.total = power.size();
  return idx;
}

Split split_by_dates(const grid::PowerSeries& power, const grid::FeatureFrame& features, const SplitSpec& spec) {
  if (features.start != power.start || features.size() != power.size())
    throw Error(ErrorKind::Alignment, "power and feature axes differ");
  Split s;
  s.index = split_indices(power, spec);
  s.train = {power.slice(0, s.index.train_end), features.slice(0, s.index.train_end)};
  s.val = {power.slice(s.index.train_end, s.index.val_end), features.slice(s.index.train_end, s.index.val_end)};
  s.test = {power.slice(s.index.val_end, s.index.total), features.slice(s.index.val_end, s.index.total)};
  return s;
}

WindowSample WindowDataset::sample(std::size_t i) const {
  const std::size_t o = origins.at(i);
  const std::size_t first = o + 1 - lookback;
  WindowSample s;
  s.origin = time_at(o);
  s.x_power.assign(power.begin() + static_cast<std::ptrdiff_t>(first), power.begin() + static_cast<std::ptrdiff_t>(o + 1));
  s.x_feat.resize(lookback, features.cols());
  std::copy(features.data() + first * features.cols(), features.data() + (o + 1) * features.cols(), s.x_feat.data());
  s.y.resize(horizon);
  s.y_mask.resize(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    s.y[k] = power[o + 1 + k];
    s.y_mask[k] = status[o + 1 + k] == grid::Status::Reliable ? 1.0 : 0.0;
  }
  return s;
}

std::size_t WindowDataset::reliable_targets() const {
  std::size_t n = 0;
  for (std::size_t o : origins)
    for (std::size_t k = 1; k <= horizon; ++k) n += status[o + k] == grid::Status::Reliable;
  return n;
}

WindowDataset normalize(const grid::PowerSeries& power, const grid::FeatureFrame& features,
                        const ZScoreParams& power_z, const ZScoreParams& feature_z, std::size_t lookback,
                        std::size_t horizon) {
  power.validate();
  if (features.start != power.start || features.size() != power.size())
    throw Error(ErrorKind::Alignment, "power and feature axes differ");
  if (power_z.features() != 1 || feature_z.features() != features.values.cols())
    throw Error(ErrorKind::Dimension, "normalisation parameters do not match the inputs");
  WindowDataset ds;
  ds.start = power.start;
  ds.lookback = lookback;
  ds.horizon = horizon;
  ds.status = power.status;
  ds.power.resize(power.size());
  for (std::size_t i = 0; i < power.size(); ++i) ds.power[i] = power_z.apply(power.values[i]);
  ds.features = apply_zscore(features.values, feature_z);
  return ds;
}

std::vector<std::size_t> window_origins(std::size_t n, std::size_t lookback, std::size_t horizon, std::size_t stride,
                                        std::size_t first, std::size_t last) {
  if (stride == 0) throw Error(ErrorKind::Config, "window stride must be positive");
  if (lookback == 0 || horizon == 0) throw Error(ErrorKind::Config, "lookback and horizon must be positive");
  std::vector<std::size_t> out;
  if (n < lookback + horizon) return out;
  const std::size_t lo = std::max(first, lookback - 1);
  const std::size_t hi = std::min(last, n - horizon - 1);
  for (std::size_t o = lo; o <= hi; o += stride) out.push_back(o);
  return out;
}

std::vector<WindowSample> make_windows(const grid::PowerSeries& power, const grid::FeatureFrame& features,
                                       std::size_t lookback, std::size_t horizon, std::size_t stride) {
  if (power.size() < lookback + horizon)
    throw Error(ErrorKind::Size, "series of length " + std::to_string(power.size()) + " is shorter than lookback + horizon");
  if (features.start != power.start || features.size() != power.size())
    throw Error(ErrorKind::Alignment, "power and feature axes differ");
  WindowDataset ds;
  ds.start = power.start;
  ds.power = power.values;
  ds.features = features.values;
  ds.status = power.status;
  ds.lookback = lookback;
  ds.horizon = horizon;
  ds.origins = window_origins(power.size(), lookback, horizon, stride);
  std::vector<WindowSample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.sample(i));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::Size, "no samples to batch");
  if (batch_size == 0) throw Error(ErrorKind::Config, "batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return batches;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(n), rng_(seed) {
  if (n == 0) throw Error(ErrorKind::Size, "no samples to batch");
  if (batch_size == 0) throw Error(ErrorKind::Config, "batch size must be positive");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::span<const std::size_t> BatchSampler::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const std::size_t len = std::min(batch_size_, order_.size() - cursor_);
  std::span<const std::size_t> out(order_.data() + cursor_, len);
  cursor_ += len;
  return out;
}

}  // namespace vpf::prep
