#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpf/forecast.hpp"
#include "vpf/grid_data.hpp"
#include "vpf/neuralnet.hpp"
#include "vpf/preprocess.hpp"

/// Two-branch LSTM forecaster: measured power and exogenous features each run
/// through their own LSTM, the LeakyReLU-activated final states are
/// concatenated and mapped by two ReLU+dropout dense layers to a linear
/// multi-step output.
namespace vpf::model {

struct ArchitectureSpec {
  std::size_t lstm_units = 100;
  std::size_t dense1 = 500;
  std::size_t dense2 = 500;
  std::size_t output_dim = prep::kHorizon;
  std::size_t feat_dim = grid::FeatureFrame::kColumns;
  std::size_t lookback = prep::kLookback;
  double dropout = 0.5;
  double recurrent_dropout = 0.5;
  double leaky_alpha = nn::kLeakyAlpha;

  static ArchitectureSpec paper();
  /// Same wiring with (32, 128, 128) units for CPU-scale runs.
  static ArchitectureSpec desk();
  static ArchitectureSpec from_preset(std::string_view name);

  void validate() const;
  bool operator==(const ArchitectureSpec&) const = default;
};

struct ModelParams {
  ArchitectureSpec arch;
  nn::LstmParams power_lstm;
  nn::LstmParams feature_lstm;
  nn::DenseParams dense1;
  nn::DenseParams dense2;
  nn::DenseParams output;
  prep::ZScoreParams power_z{{0.0}, {1.0}};
  prep::ZScoreParams feature_z;

  static constexpr std::size_t kTensorCount = 12;
  static const std::array<const char*, kTensorCount>& tensor_names();
  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;
  std::size_t parameter_count() const;
  /// Throws Dimension if any tensor disagrees with `arch`.
  void validate() const;
};

/// Closed-form parameter count of an architecture.
std::size_t parameter_count(const ArchitectureSpec& spec);

/// Deterministic initialisation; z-score parameters are identity until fitted.
ModelParams build_model(const ArchitectureSpec& spec, std::uint64_t seed);

/// Fits the power (reliable values) and feature z-scores on training data.
void fit_normalization(ModelParams& model, const grid::PowerSeries& train_power,
                       const grid::FeatureFrame& train_features);

/// Network inputs for B samples: T step matrices per branch plus targets.
struct Batch {
  std::vector<Matrix> x_power;  // T x (B x 1)
  std::vector<Matrix> x_feat;   // T x (B x F)
  Matrix y;                     // B x H
  Matrix mask;                  // B x H

  std::size_t size() const { return y.rows(); }
};

Batch assemble_batch(const prep::WindowDataset& data, std::span<const std::size_t> sample_ids);

struct ForwardCache {
  nn::LstmSequenceCache power_seq, feature_seq;
  Matrix power_h, feature_h;  // final hidden states before LeakyReLU
  Matrix concat;
  Matrix z1, drop1_mask, a1;  // a1 = dropout(relu(z1))
  Matrix z2, drop2_mask, a2;
};

/// Normalised forecast (B x output_dim). Pass `cache` in training mode to
/// enable backward(). The rng is only consumed in training mode.
Matrix forward(const ModelParams& model, const Batch& batch, nn::Mode mode, nn::Rng& rng,
               ForwardCache* cache = nullptr);

std::vector<Matrix> zero_grads(const ModelParams& model);

/// Backpropagates d loss / d prediction through the dense stack and both LSTMs,
/// accumulating into `grads` (ordered like ModelParams::tensors()).
void backward(const ModelParams& model, const ForwardCache& cache, const Matrix& dpred, std::vector<Matrix>& grads);

// -- training ----------------------------------------------------------------

struct TrainingConfig {
  std::size_t epochs = 40;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 192;
  double lr = 0.001;
  nn::LossKind loss = nn::LossKind::MAE;
  std::size_t patience = 5;
  double clip_norm = 0.0;  // 0 disables
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Tracks the best validation loss; stop() turns true once `patience`
/// consecutive epochs failed to improve on it (at least one such epoch).
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when this epoch is the new best.
  bool observe(std::size_t epoch, double val_loss);
  bool stop() const { return wait_ > 0 && wait_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t wait_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
};

struct TrainingResult {
  ModelParams model;  // weights of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t skipped_batches = 0;
  bool stopped_early = false;
};

/// One optimiser step on `batch`. Returns the loss; a fully masked batch is
/// reported as skipped and leaves parameters untouched.
nn::LossResult train_step(ModelParams& model, const Batch& batch, nn::LossKind loss, nn::AdamState& adam,
                          nn::Rng& rng, double clip_norm = 0.0);

/// Masked loss over all samples in inference mode (global mean over reliable targets).
double evaluate_loss(const ModelParams& model, const prep::WindowDataset& data, nn::LossKind loss,
                     std::size_t batch_size = 192);

/// Initial fit with early stopping on validation loss. Throws Data when the
/// training targets are all unreliable, Numerical on a non-finite loss.
TrainingResult train_initial(ModelParams model, const prep::WindowDataset& train, const prep::WindowDataset& val,
                             const TrainingConfig& config);

// -- inference ---------------------------------------------------------------

/// Forecast in MW from raw (un-normalised) inputs: lookback power values and a
/// lookback x F feature window. Throws Dimension for wrong window lengths.
std::vector<double> predict(const ModelParams& model, std::span<const double> power_window,
                            const Matrix& feature_window);

/// Forecasts in MW for the given origin indices of a dataset normalised with
/// the model's own z-scores; one row per origin.
Matrix predict_origins(const ModelParams& model, const prep::WindowDataset& data,
                       std::span<const std::size_t> origin_indices, std::size_t batch_size = 192);

/// Dataset over the full series normalised with the model's z-scores.
prep::WindowDataset model_dataset(const ModelParams& model, const grid::PowerSeries& power,
                                  const grid::FeatureFrame& features);

/// One forecast per origin timestamp. Origins without a full lookback or
/// without a full horizon of ground truth inside the series are skipped and
/// counted.
forecast::ForecastSet rolling_forecast(const ModelParams& model, const grid::PowerSeries& power,
                                       const grid::FeatureFrame& features, std::span<const Timestamp> origins,
                                       std::string model_id = "lstm");

// -- persistence -------------------------------------------------------------

struct Checkpoint {
  ModelParams model;
  std::optional<nn::AdamState> optimizer;
  std::optional<prep::QuantileScaler> eval_scaler;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Preprocessing sidecar: z-score parameters and optional quantile scaler.
void save_preprocess_sidecar(const std::filesystem::path& path, const ModelParams& model,
                             const std::optional<prep::QuantileScaler>& scaler);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace vpf::model
