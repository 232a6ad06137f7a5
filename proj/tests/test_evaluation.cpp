#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "vpf/error.hpp"
#include "vpf/evaluation.hpp"

using namespace vpf;
using namespace vpf::eval;

namespace {

grid::PowerSeries random_truth(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(5, 3);
  grid::PowerSeries s;
  s.start = make_time(2018, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.values.push_back(g(rng));
    s.status.push_back(i % 17 == 3 ? grid::Status::Unreliable : grid::Status::Reliable);
  }
  return s;
}

forecast::ForecastSet noisy_forecasts(const grid::PowerSeries& truth, std::size_t stride, std::mt19937_64& rng,
                                      double noise = 1.0, std::size_t horizon = 192) {
  std::normal_distribution<double> g(0, noise);
  forecast::ForecastSet set;
  set.model = "m";
  for (std::size_t o = 95; o + horizon < truth.size() + 40; o += stride) {
    forecast::ForecastRecord r{truth.time_at(o), std::vector<double>(horizon)};
    for (std::size_t k = 1; k <= horizon; ++k)
      r.values[k - 1] = (o + k < truth.size() ? truth.values[o + k] : 0.0) + g(rng);
    set.records.push_back(std::move(r));
  }
  return set;
}

}  // namespace

TEST_CASE("nrmse examples") {
  std::mt19937_64 rng(1);
  const auto truth = random_truth(1000, rng);
  const auto exact = noisy_forecasts(truth, 24, rng, 0.0);
  const prep::QuantileScaler sc{-1.0, 9.0};
  CHECK(nrmse(exact, truth, sc, 4) == 0.0);
  auto shifted = exact;
  for (auto& r : shifted.records)
    for (auto& v : r.values) v += 1.0;  // 0.1 after scaling by a range of 10
  CHECK(nrmse(shifted, truth, sc, 16) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("nrmse matches a two-pass oracle and counts pairs independently") {
  std::mt19937_64 rng(2);
  const auto truth = random_truth(2000, rng);
  const auto set = noisy_forecasts(truth, 7, rng);
  const auto sc = prep::fit_quantile_scaler(truth.values);
  for (int h : kCanonicalHorizonsH) {
    const std::size_t k = horizon_step(h);
    // pass 1: scale every usable pair; pass 2: mean square and root
    std::vector<double> scaled_err;
    for (const auto& r : set.records) {
      const auto t = r.origin + kStep * static_cast<long long>(k);
      const auto idx = (t - truth.start) / kStep;
      if (idx < 0 || static_cast<std::size_t>(idx) >= truth.size()) continue;
      if (truth.status[static_cast<std::size_t>(idx)] != grid::Status::Reliable) continue;
      const double f = (r.values[k - 1] - sc.q_low) / (sc.q_high - sc.q_low);
      const double y = (truth.values[static_cast<std::size_t>(idx)] - sc.q_low) / (sc.q_high - sc.q_low);
      scaled_err.push_back(f - y);
    }
    double ms = 0;
    for (double e : scaled_err) ms += e * e;
    const double expect = std::sqrt(ms / static_cast<double>(scaled_err.size()));
    CHECK(std::abs(nrmse(set, truth, sc, k) - expect) < 1e-12);
    const auto rows = evaluate(set, truth, sc, "t1", std::vector<int>{h});
    CHECK(rows[0].n == scaled_err.size());
  }
}

TEST_CASE("horizon evaluation uses exactly the matching forecast element") {
  std::mt19937_64 rng(3);
  const auto truth = random_truth(1500, rng);
  const auto set = noisy_forecasts(truth, 5, rng, 0.0);
  const auto sc = prep::fit_quantile_scaler(truth.values);
  auto shifted = set;
  for (auto& r : shifted.records) r.origin += kStep;  // truth effectively shifted one step
  for (int h : kCanonicalHorizonsH) {
    CHECK(nrmse(set, truth, sc, horizon_step(h)) == 0.0);
    CHECK(nrmse(shifted, truth, sc, horizon_step(h)) > 0.0);
  }
}

TEST_CASE("nrmse is consistent under a common shift when the scaler is refit") {
  std::mt19937_64 rng(4);
  auto truth = random_truth(1200, rng);
  auto set = noisy_forecasts(truth, 11, rng);
  const double a = nrmse(set, truth, prep::fit_quantile_scaler(truth.values), 32);
  for (auto& v : truth.values) v += 250.0;
  for (auto& r : set.records)
    for (auto& v : r.values) v += 250.0;
  const double b = nrmse(set, truth, prep::fit_quantile_scaler(truth.values), 32);
  CHECK(b == doctest::Approx(a).epsilon(1e-9));
}

TEST_CASE("nrmse without usable pairs is a data error") {
  std::mt19937_64 rng(5);
  auto truth = random_truth(500, rng);
  const auto set = noisy_forecasts(truth, 50, rng);
  for (auto& s : truth.status) s = grid::Status::Unreliable;
  try {
    nrmse(set, truth, {0, 1}, 4);
    FAIL("expected data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("pearson") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<double> x(500), y(500), z(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = -x[i];
    z[i] = 3.5 * x[i] - 12.0;
  }
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pearson(x, z) - 1.0) < 1e-12);
  std::vector<double> w(500);
  for (auto& v : w) v = g(rng);
  const double r = pearson(x, w);
  std::vector<double> x2(x), w2(w);
  for (auto& v : x2) v = 0.25 * v + 7;
  for (auto& v : w2) v = 40 * v - 3;
  CHECK(std::abs(pearson(x2, w2) - r) < 1e-12);
  std::vector<double> c(500, 1.0);
  try {
    pearson(x, c);
    FAIL("expected undefined correlation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedCorrelation);
  }
}

TEST_CASE("box statistics and model comparison") {
  const auto one = box_stats({0.3});
  CHECK(one.min == 0.3);
  CHECK(one.median == 0.3);
  CHECK(one.max == 0.3);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.6);
  std::vector<HorizonReport> rows;
  std::vector<double> lstm_1h;
  for (int t = 0; t < 7; ++t)
    for (const char* m : {"lstm", "persistence_24h"})
      for (int h : kCanonicalHorizonsH) {
        rows.push_back({m, "T" + std::to_string(t), h, u(rng), 0.5, 100});
        if (std::string(m) == "lstm" && h == 1) lstm_1h.push_back(rows.back().nrmse);
      }
  const auto cmp = compare_models(rows);
  CHECK(cmp.boxes.size() == 14);
  CHECK(cmp.table.size() == rows.size());
  std::sort(lstm_1h.begin(), lstm_1h.end());
  CHECK(cmp.boxes[0].model == "lstm");
  CHECK(cmp.boxes[0].horizon_h == 1);
  CHECK(cmp.boxes[0].nrmse.median == lstm_1h[3]);
  CHECK(cmp.boxes[0].nrmse.min == lstm_1h[0]);
  CHECK(cmp.boxes[0].nrmse.max == lstm_1h[6]);
  CHECK(cmp.winners.size() == 7);

  // appending a model leaves existing rows and boxes untouched
  auto more = rows;
  for (int t = 0; t < 7; ++t)
    for (int h : kCanonicalHorizonsH) more.push_back({"persistence_last", "T" + std::to_string(t), h, 0.9, 0.1, 100});
  const auto cmp2 = compare_models(more);
  for (std::size_t i = 0; i < cmp.boxes.size(); ++i) {
    CHECK(cmp2.boxes[i].model == cmp.boxes[i].model);
    CHECK(cmp2.boxes[i].nrmse.median == cmp.boxes[i].nrmse.median);
  }

  auto bad = rows;
  bad[0].n = 99;
  CHECK_THROWS_AS(compare_models(bad), Error);
  bad = rows;
  bad.pop_back();
  CHECK_THROWS_AS(compare_models(bad), Error);
}

TEST_CASE("improvement") {
  std::vector<HorizonReport> frozen{{"lstm", "T1", 1, 0.38, 0.9, 10}, {"lstm", "T1", 4, 0.40, 0.9, 10}};
  std::vector<HorizonReport> updated{{"lstm_updated", "T1", 4, 0.41, 0.9, 10},
                                     {"lstm_updated", "T1", 1, 0.30, 0.9, 10}};
  const auto imp = improvement(frozen, updated);
  REQUIRE(imp.records.size() == 2);
  CHECK(imp.records[0].delta == doctest::Approx(0.08));
  CHECK(imp.records[0].ratio == doctest::Approx(0.08 / 0.38));
  CHECK(imp.records[1].delta == doctest::Approx(-0.01));
  CHECK(imp.mean_delta == doctest::Approx(0.035));
  const auto same = improvement(frozen, frozen);
  for (const auto& r : same.records) CHECK(r.delta == 0.0);
  updated[0].horizon_h = 8;
  CHECK_THROWS_AS(improvement(frozen, updated), Error);
}
