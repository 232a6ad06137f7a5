#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vpf/forecast.hpp"
#include "vpf/grid_data.hpp"
#include "vpf/preprocess.hpp"

/// Per-horizon error metrics and cross-model comparison.
namespace vpf::eval {

inline constexpr std::array<int, 7> kCanonicalHorizonsH{1, 4, 8, 16, 24, 32, 48};

/// Forecast step (1-based) of a lead time in hours.
constexpr std::size_t horizon_step(int hours) { return static_cast<std::size_t>(hours) * 4; }

/// (forecast, truth) values at one horizon step, reliable truth only.
struct Pairs {
  std::vector<double> forecast;
  std::vector<double> truth;
};

Pairs collect_pairs(const forecast::ForecastSet& set, const grid::PowerSeries& truth, std::size_t step);

/// RMSE after scaling both sides with the quantile scaler. Throws Data when
/// no reliable pair exists.
double nrmse(const forecast::ForecastSet& set, const grid::PowerSeries& truth, const prep::QuantileScaler& scaler,
             std::size_t step);
double nrmse(const Pairs& pairs, const prep::QuantileScaler& scaler);

/// Sample Pearson correlation. Throws UndefinedCorrelation for fewer than two
/// pairs or zero variance on either side.
double pearson(std::span<const double> x, std::span<const double> y);
double pearson(const forecast::ForecastSet& set, const grid::PowerSeries& truth, std::size_t step);

struct HorizonReport {
  std::string model;
  std::string transformer;
  int horizon_h = 0;
  double nrmse = 0.0;
  double pearson = 0.0;  // NaN when undefined
  std::size_t n = 0;
};

std::vector<HorizonReport> evaluate(const forecast::ForecastSet& set, const grid::PowerSeries& truth,
                                    const prep::QuantileScaler& scaler, const std::string& transformer,
                                    std::span<const int> horizons_h = kCanonicalHorizonsH);

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

/// Quartiles with the same linear interpolation as the quantile scaler.
BoxStats box_stats(std::vector<double> values);

struct ComparisonRow {
  std::string model;
  int horizon_h = 0;
  BoxStats nrmse;
};

struct Comparison {
  std::vector<HorizonReport> table;  // input rows, in input order
  std::vector<ComparisonRow> boxes;  // per (model, horizon) across transformers, model order of first appearance
  /// Per horizon, the model with the lowest mean nRMSE.
  std::vector<std::pair<int, std::string>> winners;
};

/// Throws Alignment when models were not evaluated on the same
/// (transformer, horizon) keys with the same number of pairs.
Comparison compare_models(std::span<const HorizonReport> reports);

struct ImprovementRecord {
  std::string transformer;
  int horizon_h = 0;
  double frozen = 0.0;
  double updated = 0.0;
  double delta = 0.0;  // frozen - updated; positive means the update helps
  double ratio = 0.0;  // delta / frozen
};

struct ImprovementSummary {
  std::vector<ImprovementRecord> records;
  double mean_delta = 0.0;
};

/// Matches rows by (transformer, horizon). Throws Alignment on key mismatch.
ImprovementSummary improvement(std::span<const HorizonReport> frozen, std::span<const HorizonReport> updated);

// Report CSV: model,transformer,horizon_h,nrmse,pearson,n
inline constexpr std::string_view kReportHeader = "model,transformer,horizon_h,nrmse,pearson,n";

void write_reports(std::ostream& out, std::span<const HorizonReport> rows);
void save_reports(const std::filesystem::path& path, std::span<const HorizonReport> rows);
std::vector<HorizonReport> load_reports(const std::filesystem::path& path);
void save_boxplot(const std::filesystem::path& path, const Comparison& cmp);
void save_improvement(const std::filesystem::path& path, const ImprovementSummary& imp);
/// Human-readable table of mean nRMSE per model and horizon plus the winners.
void print_summary(std::ostream& out, const Comparison& cmp);

}  // namespace vpf::eval
