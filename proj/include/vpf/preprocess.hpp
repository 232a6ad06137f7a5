#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vpf/grid_data.hpp"
#include "vpf/matrix.hpp"

namespace vpf::prep {

inline constexpr std::size_t kLookback = 96;
inline constexpr std::size_t kHorizon = 192;

/// Per-feature standardisation fitted on the training split.
struct ZScoreParams {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t features() const noexcept { return mean.size(); }
  double apply(double x, std::size_t feature = 0) const { return (x - mean[feature]) / std[feature]; }
  double invert(double z, std::size_t feature = 0) const { return z * std[feature] + mean[feature]; }
  bool operator==(const ZScoreParams&) const = default;
};

/// Fits mean and population standard deviation per column of `data`, using
/// only rows whose `use_row` flag is set (all rows when empty). A zero
/// standard deviation is replaced by 1 with a warning.
ZScoreParams fit_zscore(const Matrix& data, std::span<const std::uint8_t> use_row = {});
ZScoreParams fit_zscore(const grid::PowerSeries& power);  // reliable values only

Matrix apply_zscore(const Matrix& x, const ZScoreParams& params);
Matrix invert_zscore(const Matrix& z, const ZScoreParams& params);

/// Robust min-max scaling: (x - q_low) / (q_high - q_low), no clipping.
struct QuantileScaler {
  double q_low = 0.0;
  double q_high = 1.0;
  double level_low = 0.003;
  double level_high = 0.997;

  double apply(double x) const { return (x - q_low) / (q_high - q_low); }
  double invert(double s) const { return s * (q_high - q_low) + q_low; }
  bool operator==(const QuantileScaler&) const = default;
};

/// Sorted-order quantile with linear interpolation between the closest ranks
/// (rank h = (n - 1) p). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws Size for fewer than 100 points, Config for bad levels and
/// DegenerateScale when both quantiles coincide.
QuantileScaler fit_quantile_scaler(std::span<const double> series, double level_low = 0.003,
                                   double level_high = 0.997);

struct SplitSpec {
  Timestamp train_end{};
  Timestamp val_end{};
};

/// Index boundaries of a date split: train [0, train_end), val [train_end,
/// val_end), test [val_end, total).
struct SplitIndices {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
};

struct Segment {
  grid::PowerSeries power;
  grid::FeatureFrame features;
};

struct Split {
  SplitIndices index;
  Segment train, val, test;
};

/// Throws Range when a boundary lies outside the series, Config when they are
/// not strictly ordered, Alignment when the two series' axes differ.
SplitIndices split_indices(const grid::PowerSeries& power, const SplitSpec& spec);
Split split_by_dates(const grid::PowerSeries& power, const grid::FeatureFrame& features, const SplitSpec& spec);

/// One supervised example: lookback ending at the forecast origin and the H
/// following targets. Built on demand from a WindowDataset.
struct WindowSample {
  Timestamp origin{};
  std::vector<double> x_power;  // lookback
  Matrix x_feat;                // lookback x features
  std::vector<double> y;        // horizon
  std::vector<double> y_mask;   // 1 where the target is reliable
};

/// Normalised series plus the list of forecast-origin indices that form the
/// samples. The origin is the index of the last lookback step; targets are
/// origin+1 .. origin+horizon.
struct WindowDataset {
  Timestamp start{};
  std::vector<double> power;     // z-scored
  Matrix features;               // z-scored, rows = steps
  std::vector<grid::Status> status;
  std::size_t lookback = kLookback;
  std::size_t horizon = kHorizon;
  std::vector<std::size_t> origins;

  std::size_t size() const noexcept { return origins.size(); }
  Timestamp time_at(std::size_t i) const { return start + kStep * static_cast<long long>(i); }
  WindowSample sample(std::size_t i) const;
  /// Number of reliable (unmasked) target values across all samples.
  std::size_t reliable_targets() const;
};

/// Applies the fitted z-scores to full series; origins left empty.
WindowDataset normalize(const grid::PowerSeries& power, const grid::FeatureFrame& features,
                        const ZScoreParams& power_z, const ZScoreParams& feature_z,
                        std::size_t lookback = kLookback, std::size_t horizon = kHorizon);

/// Every origin in [first, last] (inclusive) stepping by `stride` that has a
/// full lookback and horizon inside the series.
std::vector<std::size_t> window_origins(std::size_t n, std::size_t lookback, std::size_t horizon,
                                        std::size_t stride = 1, std::size_t first = 0,
                                        std::size_t last = static_cast<std::size_t>(-1));

/// Materialised windows over the whole series: N - L - H + 1 samples at
/// stride 1. Throws Size when the series is shorter than L + H.
std::vector<WindowSample> make_windows(const grid::PowerSeries& power, const grid::FeatureFrame& features,
                                       std::size_t lookback = kLookback, std::size_t horizon = kHorizon,
                                       std::size_t stride = 1);

/// Index batches covering one pass over `n` samples in seeded shuffled
/// order. The final partial batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

/// Endless batch stream: reshuffles at every pass over the samples.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::span<const std::size_t> next();

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace vpf::prep
