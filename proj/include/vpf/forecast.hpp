#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpf/grid_data.hpp"
#include "vpf/time.hpp"

/// Forecast records shared by the LSTM, the update engine and the baselines,
/// and the on-disk archive format.
namespace vpf::forecast {

/// values[k-1] is the forecast for origin + k * 15 min.
struct ForecastRecord {
  Timestamp origin{};
  std::vector<double> values;

  Timestamp target_time(std::size_t step) const { return origin + kStep * static_cast<long long>(step); }
};

struct ForecastSet {
  std::string model;
  std::vector<ForecastRecord> records;
  std::size_t skipped = 0;

  std::size_t horizon() const { return records.empty() ? 0 : records.front().values.size(); }
  /// Records whose origin lies in [from, to).
  ForecastSet between(Timestamp from, Timestamp to) const;
};

/// Inputs behind one forecast, for the causality audit: the newest
/// measurement fed to the model and the newest measurement used by any update
/// applied before it.
struct AuditEntry {
  Timestamp origin{};
  Timestamp input_end{};
  std::optional<Timestamp> update_data_end;
};

// Archive CSV: origin,horizon_step,predicted_mw,actual_mw,status
inline constexpr std::string_view kArchiveHeader = "origin,horizon_step,predicted_mw,actual_mw,status";
// Audit CSV: origin,input_end,update_data_end (empty when no update applied)
inline constexpr std::string_view kAuditHeader = "origin,input_end,update_data_end";

/// Writes one row per (origin, step). Targets past the end of `truth` are
/// written with an empty actual value and status 1.
void write_archive(std::ostream& out, const ForecastSet& set, const grid::PowerSeries& truth);
void save_archive(const std::filesystem::path& path, const ForecastSet& set, const grid::PowerSeries& truth);

struct ArchiveRow {
  Timestamp origin{};
  std::size_t step = 0;
  double predicted = 0.0;
  std::optional<double> actual;
  grid::Status status = grid::Status::Unreliable;
};

std::vector<ArchiveRow> read_archive_rows(std::istream& in);

/// Reassembles a forecast set from archive rows; each origin must carry the
/// contiguous steps 1..H. Throws Schema otherwise.
ForecastSet read_archive(std::istream& in, std::string model_id);
ForecastSet load_archive(const std::filesystem::path& path, std::string model_id);

void write_audit(std::ostream& out, std::span<const AuditEntry> entries);
void save_audit(const std::filesystem::path& path, std::span<const AuditEntry> entries);
std::vector<AuditEntry> load_audit(const std::filesystem::path& path);

struct VerifyReport {
  std::size_t origins = 0;
  std::size_t rows = 0;
  std::size_t violations = 0;
  std::vector<std::string> messages;  // first violations, capped

  bool ok() const { return violations == 0; }
};

/// Look-ahead audit of an archive: every target lies after its origin, steps
/// are contiguous, inputs end at or before the origin, every update applied
/// before a forecast used only data strictly before its origin, and (when
/// `truth` is given) actual values match the measurements at the target time.
VerifyReport verify_archive(const std::filesystem::path& archive, const std::filesystem::path& audit,
                            const grid::PowerSeries* truth = nullptr);

}  // namespace vpf::forecast
