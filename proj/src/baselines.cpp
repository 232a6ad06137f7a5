#include "vpf/baselines.hpp"

#include <string>

#include "vpf/error.hpp"
#include "vpf/log.hpp"

namespace vpf::baselines {

namespace {

constexpr std::size_t kDay = kStepsPerDay;

// Index of `origin` in the series, or Range error.
std::size_t origin_index(const grid::PowerSeries& s, Timestamp origin) {
  return s.index_of(origin);
}

// Most recent reliable value at or before index i.
std::optional<double> last_reliable(const grid::PowerSeries& s, std::size_t i) {
  for (std::size_t j = i + 1; j-- > 0;)
    if (s.reliable(j)) return s.values[j];
  return std::nullopt;
}

}  // namespace

const char* model_id(PersistenceKind kind) {
  return kind == PersistenceKind::LastMeasurement ? "persistence_last" : "persistence_24h";
}

std::vector<double> persistence_last(const grid::PowerSeries& history, Timestamp origin, std::size_t horizon) {
  const std::size_t o = origin_index(history, origin);
  const auto v = last_reliable(history, o);
  if (!v) throw Error(ErrorKind::Data, "no reliable measurement at or before " + format_timestamp(origin));
  return std::vector<double>(horizon, *v);
}

std::vector<double> persistence_last_day(const grid::PowerSeries& history, Timestamp origin, std::size_t horizon) {
  const std::size_t o = origin_index(history, origin);
  if (o + 1 < kDay)
    throw Error(ErrorKind::Data, "persistence_24h needs 96 steps of history before " + format_timestamp(origin));
  std::vector<double> day(kDay);
  std::optional<double> fallback;
  for (std::size_t k = 1; k <= kDay; ++k) {
    // measurement at origin + k steps - 24 h
    std::size_t i = o + k - kDay;
    while (!history.reliable(i) && i >= kDay) i -= kDay;
    if (history.reliable(i)) {
      day[k - 1] = history.values[i];
      continue;
    }
    if (!fallback) fallback = last_reliable(history, o);
    if (!fallback) throw Error(ErrorKind::Data, "no reliable measurement at or before " + format_timestamp(origin));
    day[k - 1] = *fallback;
  }
  std::vector<double> out(horizon);
  for (std::size_t k = 0; k < horizon; ++k) out[k] = day[k % kDay];
  return out;
}

forecast::ForecastSet persistence_forecast(PersistenceKind kind, const grid::PowerSeries& history,
                                           std::span<const Timestamp> origins, std::size_t horizon) {
  forecast::ForecastSet set;
  set.model = model_id(kind);
  for (Timestamp t : origins) {
    if (t < history.start || t >= history.end()) {
      ++set.skipped;
      continue;
    }
    set.records.push_back({t, kind == PersistenceKind::LastMeasurement ? persistence_last(history, t, horizon)
                                                                       : persistence_last_day(history, t, horizon)});
  }
  if (set.skipped) log::warn(std::to_string(set.skipped) + " persistence origins outside the series skipped");
  return set;
}

}  // namespace vpf::baselines
