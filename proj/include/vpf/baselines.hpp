#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vpf/forecast.hpp"
#include "vpf/grid_data.hpp"

/// Persistence reference forecasts built from the measured series alone.
namespace vpf::baselines {

enum class PersistenceKind { LastMeasurement, LastDay };

const char* model_id(PersistenceKind kind);  // "persistence_last" / "persistence_24h"

/// All H values equal the most recent reliable measurement at or before
/// `origin`. Throws Data when there is none.
std::vector<double> persistence_last(const grid::PowerSeries& history, Timestamp origin,
                                     std::size_t horizon = 192);

/// Step k repeats the measurement 24 h before origin + k*15 min, so the
/// second day repeats the first. Unreliable values are replaced by the
/// reliable value at the same time of day on an earlier day (or, failing
/// that, the last reliable value). Throws Data with fewer than 96 steps of
/// history up to the origin.
std::vector<double> persistence_last_day(const grid::PowerSeries& history, Timestamp origin,
                                         std::size_t horizon = 192);

/// One forecast per origin; origins outside the series are skipped and counted.
forecast::ForecastSet persistence_forecast(PersistenceKind kind, const grid::PowerSeries& history,
                                           std::span<const Timestamp> origins, std::size_t horizon = 192);

}  // namespace vpf::baselines
