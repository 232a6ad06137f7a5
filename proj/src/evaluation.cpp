#include "vpf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "vpf/csv.hpp"
#include "vpf/error.hpp"
#include "vpf/log.hpp"

namespace vpf::eval {

Pairs collect_pairs(const forecast::ForecastSet& set, const grid::PowerSeries& truth, std::size_t step) {
  Pairs p;
  for (const auto& r : set.records) {
    if (step == 0 || step > r.values.size())
      throw Error(ErrorKind::Range, "horizon step " + std::to_string(step) + " outside forecast length " +
                                        std::to_string(r.values.size()));
    const Timestamp t = r.target_time(step);
    if (t < truth.start || t >= truth.end()) continue;
    const std::size_t i = truth.index_of(t);
    if (!truth.reliable(i)) continue;
    p.forecast.push_back(r.values[step - 1]);
    p.truth.push_back(truth.values[i]);
  }
  return p;
}

double nrmse(const Pairs& pairs, const prep::QuantileScaler& scaler) {
  if (pairs.truth.empty()) throw Error(ErrorKind::Data, "no reliable (forecast, truth) pairs");
  double s = 0.0;
  for (std::size_t i = 0; i < pairs.truth.size(); ++i) {
    const double d = scaler.apply(pairs.forecast[i]) - scaler.apply(pairs.truth[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pairs.truth.size()));
}

double nrmse(const forecast::ForecastSet& set, const grid::PowerSeries& truth, const prep::QuantileScaler& scaler,
             std::size_t step) {
  return nrmse(collect_pairs(set, truth, step), scaler);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Dimension, "pearson: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::UndefinedCorrelation, "pearson needs at least two pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::UndefinedCorrelation, "pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const forecast::ForecastSet& set, const grid::PowerSeries& truth, std::size_t step) {
  const auto p = collect_pairs(set, truth, step);
  return pearson(p.forecast, p.truth);
}

std::vector<HorizonReport> evaluate(const forecast::ForecastSet& set, const grid::PowerSeries& truth,
                                    const prep::QuantileScaler& scaler, const std::string& transformer,
                                    std::span<const int> horizons_h) {
  std::vector<HorizonReport> out;
  for (int h : horizons_h) {
    const auto pairs = collect_pairs(set, truth, horizon_step(h));
    HorizonReport r{set.model, transformer, h, nrmse(pairs, scaler), std::numeric_limits<double>::quiet_NaN(),
                    pairs.truth.size()};
    try {
      r.pearson = pearson(pairs.forecast, pairs.truth);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedCorrelation) throw;
      log::warn(set.model + " " + transformer + " " + std::to_string(h) + "h: " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::Size, "box statistics of an empty set");
  std::sort(values.begin(), values.end());
  return {values.front(), prep::quantile_sorted(values, 0.25), prep::quantile_sorted(values, 0.5),
          prep::quantile_sorted(values, 0.75), values.back(), values.size()};
}

Comparison compare_models(std::span<const HorizonReport> reports) {
  Comparison cmp;
  cmp.table.assign(reports.begin(), reports.end());
  std::vector<std::string> models;
  std::vector<int> horizons;
  std::map<std::pair<std::string, int>, std::vector<double>> values;
  // (transformer, horizon) -> model -> n
  std::map<std::pair<std::string, int>, std::map<std::string, std::size_t>> keys;
  for (const auto& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(horizons.begin(), horizons.end(), r.horizon_h) == horizons.end()) horizons.push_back(r.horizon_h);
    if (!keys[{r.transformer, r.horizon_h}].emplace(r.model, r.n).second)
      throw Error(ErrorKind::Alignment, "duplicate report row for " + r.model + "/" + r.transformer + "/" +
                                            std::to_string(r.horizon_h) + "h");
    values[{r.model, r.horizon_h}].push_back(r.nrmse);
  }
  for (const auto& [key, per_model] : keys) {
    if (per_model.size() != models.size())
      throw Error(ErrorKind::Alignment, "transformer " + key.first + " at " + std::to_string(key.second) +
                                            "h lacks rows for some models");
    const std::size_t n0 = per_model.begin()->second;
    for (const auto& [m, n] : per_model)
      if (n != n0)
        throw Error(ErrorKind::Alignment, "models evaluated on different windows for " + key.first + " at " +
                                              std::to_string(key.second) + "h (" + std::to_string(n) + " vs " +
                                              std::to_string(n0) + " pairs)");
  }
  for (const auto& m : models)
    for (int h : horizons) {
      auto it = values.find({m, h});
      if (it == values.end()) continue;
      cmp.boxes.push_back({m, h, box_stats(it->second)});
    }
  for (int h : horizons) {
    std::string best;
    double best_mean = std::numeric_limits<double>::infinity();
    for (const auto& m : models) {
      const auto& v = values[{m, h}];
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      if (mean < best_mean) {
        best_mean = mean;
        best = m;
      }
    }
    cmp.winners.emplace_back(h, best);
  }
  return cmp;
}

ImprovementSummary improvement(std::span<const HorizonReport> frozen, std::span<const HorizonReport> updated) {
  std::map<std::pair<std::string, int>, double> upd;
  for (const auto& r : updated) upd[{r.transformer, r.horizon_h}] = r.nrmse;
  if (upd.size() != frozen.size()) throw Error(ErrorKind::Alignment, "frozen and updated reports have different keys");
  ImprovementSummary s;
  for (const auto& f : frozen) {
    auto it = upd.find({f.transformer, f.horizon_h});
    if (it == upd.end())
      throw Error(ErrorKind::Alignment,
                  "no updated row for " + f.transformer + " at " + std::to_string(f.horizon_h) + "h");
    const double delta = f.nrmse - it->second;
    s.records.push_back({f.transformer, f.horizon_h, f.nrmse, it->second, delta, f.nrmse > 0 ? delta / f.nrmse : 0.0});
    s.mean_delta += delta;
  }
  if (!s.records.empty()) s.mean_delta /= static_cast<double>(s.records.size());
  return s;
}

void write_reports(std::ostream& out, std::span<const HorizonReport> rows) {
  out << kReportHeader << '\n';
  for (const auto& r : rows)
    out << r.model << ',' << r.transformer << ',' << r.horizon_h << ',' << csv::format_double(r.nrmse) << ','
        << (std::isnan(r.pearson) ? std::string{} : csv::format_double(r.pearson)) << ',' << r.n << '\n';
}

namespace {
std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return f;
}
}  // namespace

void save_reports(const std::filesystem::path& path, std::span<const HorizonReport> rows) {
  auto f = open_out(path);
  write_reports(f, rows);
}

std::vector<HorizonReport> load_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  const auto lines = csv::read_lines(in);
  if (lines.empty() || lines[0] != kReportHeader)
    throw Error(ErrorKind::Schema, path.string() + ": expected header '" + std::string(kReportHeader) + "'");
  std::vector<HorizonReport> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = csv::split(lines[ln]);
    if (f.size() != 6) throw ParseError(ln + 1, "expected 6 columns");
    HorizonReport r;
    r.model = f[0];
    r.transformer = f[1];
    long long h = 0, n = 0;
    if (!csv::parse_int(f[2], h)) throw ParseError(ln + 1, "bad horizon_h");
    if (!csv::parse_double(f[3], r.nrmse)) throw ParseError(ln + 1, "bad nrmse");
    r.pearson = std::numeric_limits<double>::quiet_NaN();
    if (!f[4].empty() && !csv::parse_double(f[4], r.pearson)) throw ParseError(ln + 1, "bad pearson");
    if (!csv::parse_int(f[5], n) || n < 0) throw ParseError(ln + 1, "bad n");
    r.horizon_h = static_cast<int>(h);
    r.n = static_cast<std::size_t>(n);
    out.push_back(std::move(r));
  }
  return out;
}

void save_boxplot(const std::filesystem::path& path, const Comparison& cmp) {
  auto f = open_out(path);
  f << "model,horizon_h,min,q1,median,q3,max,count\n";
  for (const auto& b : cmp.boxes)
    f << b.model << ',' << b.horizon_h << ',' << csv::format_double(b.nrmse.min) << ','
      << csv::format_double(b.nrmse.q1) << ',' << csv::format_double(b.nrmse.median) << ','
      << csv::format_double(b.nrmse.q3) << ',' << csv::format_double(b.nrmse.max) << ',' << b.nrmse.count << '\n';
}

void save_improvement(const std::filesystem::path& path, const ImprovementSummary& imp) {
  auto f = open_out(path);
  f << "transformer,horizon_h,frozen_nrmse,updated_nrmse,delta,ratio\n";
  for (const auto& r : imp.records)
    f << r.transformer << ',' << r.horizon_h << ',' << csv::format_double(r.frozen) << ','
      << csv::format_double(r.updated) << ',' << csv::format_double(r.delta) << ',' << csv::format_double(r.ratio)
      << '\n';
}

void print_summary(std::ostream& out, const Comparison& cmp) {
  std::vector<std::string> models;
  std::vector<int> horizons;
  std::map<std::pair<std::string, int>, double> mean;
  for (const auto& b : cmp.boxes) {
    if (std::find(models.begin(), models.end(), b.model) == models.end()) models.push_back(b.model);
    if (std::find(horizons.begin(), horizons.end(), b.horizon_h) == horizons.end()) horizons.push_back(b.horizon_h);
  }
  std::map<std::pair<std::string, int>, std::pair<double, std::size_t>> acc;
  for (const auto& r : cmp.table) {
    auto& a = acc[{r.model, r.horizon_h}];
    a.first += r.nrmse;
    ++a.second;
  }
  out << "mean nRMSE\n" << std::left << std::setw(18) << "model";
  for (int h : horizons) out << std::right << std::setw(9) << (std::to_string(h) + "h");
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& m : models) {
    out << std::left << std::setw(18) << m;
    for (int h : horizons) {
      const auto& a = acc[{m, h}];
      out << std::right << std::setw(9) << (a.second ? a.first / static_cast<double>(a.second) : 0.0);
    }
    out << '\n';
  }
  out << "best model per horizon:";
  for (const auto& [h, m] : cmp.winners) out << ' ' << h << "h=" << m;
  out << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace vpf::eval
