#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "teamshock/random.hpp"
#include "teamshock/timeseries.hpp"

using namespace teamshock;

namespace {

Timestamp at(int y, unsigned m, unsigned d, int hour = 12) {
  return days_from_civil(y, m, d) * kSecondsPerDay + hour * 3600;
}

double value(const std::vector<MonthlySeries>& all, Metric m, std::size_t i) {
  for (const auto& s : all)
    if (s.metric == m) return s.values[i];
  return stats::kNaN;
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double max_reconstruction_error(const std::vector<double>& x, const Decomposition& d) {
  double e = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    e = std::max(e, std::fabs(x[i] - (d.trend[i] + d.seasonal[i] + d.remainder[i])));
  return e;
}

std::vector<double> seasonal_trend(int n, double level, double slope, double amp) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t)
    x[static_cast<std::size_t>(t)] = level + slope * t + amp * std::sin(2 * std::numbers::pi * t / 12.0);
  return x;
}

}  // namespace

TEST(AggregateMonthly, SingleRepoPushes) {
  Corpus c;
  c.add("r", "a", EventType::push, at(2019, 1, 3));
  c.add("r", "a", EventType::push, at(2019, 1, 20));
  const auto all = aggregate_monthly_all(c, {2019, 1}, {2019, 2});
  EXPECT_EQ(value(all, Metric::active_repos, 0), 1.0);
  EXPECT_EQ(value(all, Metric::pushes_per_repo, 0), 2.0);
  EXPECT_EQ(value(all, Metric::active_repos, 1), 0.0);
  EXPECT_EQ(value(all, Metric::pushes_per_repo, 1), 0.0);
}

TEST(AggregateMonthly, WatchOnlyIsInactive) {
  Corpus c;
  c.add("r", "a", EventType::watch, at(2019, 1, 3));
  c.add("r", "b", EventType::fork, at(2019, 1, 4));
  EXPECT_EQ(aggregate_monthly(c, Metric::active_repos, {2019, 1}, {2019, 1}).values[0], 0.0);
}

TEST(AggregateMonthly, MeansOverActiveRepos) {
  Corpus c;
  for (int i = 0; i < 2; ++i) c.add("x", "a", EventType::push, at(2019, 3, 1 + i));
  for (int i = 0; i < 4; ++i) c.add("y", i % 2 ? "a" : "b", EventType::push, at(2019, 3, 1 + i));
  c.add("y", "c", EventType::pull_request_open, at(2019, 3, 9));
  const auto all = aggregate_monthly_all(c, {2019, 3}, {2019, 3});
  EXPECT_EQ(value(all, Metric::pushes_per_repo, 0), 3.0);
  EXPECT_EQ(value(all, Metric::pushes_total, 0), 6.0);
  EXPECT_EQ(value(all, Metric::opened_pull_requests, 0), 1.0);
  // x: {a}, y: {a, b, c}
  EXPECT_EQ(value(all, Metric::active_members_per_repo, 0), 2.0);
}

TEST(AggregateMonthly, EmptyRangeThrows) {
  Corpus c;
  EXPECT_THROW(aggregate_monthly_all(c, {2019, 2}, {2019, 1}), std::invalid_argument);
}

TEST(AggregateMonthly, PermutationInvariant) {
  Rng rng = make_rng(5, "aggregate-perm");
  struct E {
    std::string repo, actor;
    EventType type;
    Timestamp ts;
  };
  const EventType types[] = {EventType::push, EventType::watch, EventType::issue, EventType::pull_request_open,
                             EventType::fork, EventType::issue_comment};
  std::vector<E> events;
  for (int i = 0; i < 3000; ++i)
    events.push_back({"r" + std::to_string(uniform_index(rng, 40)), "a" + std::to_string(uniform_index(rng, 25)),
                      types[uniform_index(rng, 6)],
                      at(2018, 1, 1) + static_cast<Timestamp>(uniform_index(rng, 730ull * 86400))});
  std::vector<std::vector<MonthlySeries>> results;
  for (int k = 0; k < 3; ++k) {
    shuffle(events.begin(), events.end(), rng);
    Corpus c;
    for (const auto& e : events) c.add(e.repo, e.actor, e.type, e.ts);
    results.push_back(aggregate_monthly_all(c, {2018, 1}, {2019, 12}));
  }
  for (std::size_t m = 0; m < kAllMetrics.size(); ++m)
    for (int k = 1; k < 3; ++k) EXPECT_EQ(results[0][m].values, results[static_cast<std::size_t>(k)][m].values);
}

TEST(Stl, RejectsShortOrNonFinite) {
  EXPECT_THROW(stl_decompose(std::vector<double>(23, 1.0)), std::invalid_argument);
  std::vector<double> x(24, 1.0);
  x[5] = stats::kNaN;
  EXPECT_THROW(stl_decompose(x), std::invalid_argument);
}

TEST(Stl, ConstantSeries) {
  const std::vector<double> x(48, 7.5);
  const auto d = stl_decompose(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(d.trend[i], 7.5, 1e-6);
    EXPECT_NEAR(d.seasonal[i], 0.0, 1e-6);
    EXPECT_NEAR(d.remainder[i], 0.0, 1e-6);
  }
}

TEST(Stl, RecoversSineAndRamp) {
  const int n = 72;
  const auto x = seasonal_trend(n, 50, 0.4, 5);
  std::vector<double> ramp(n), sine(n);
  for (int t = 0; t < n; ++t) {
    ramp[static_cast<std::size_t>(t)] = 50 + 0.4 * t;
    sine[static_cast<std::size_t>(t)] = 5 * std::sin(2 * std::numbers::pi * t / 12.0);
  }
  const auto d = stl_decompose(x);
  EXPECT_LE(rms(d.seasonal, sine), 0.05 * std::sqrt(12.5));
  double ramp_rms = 0;
  for (double v : ramp) ramp_rms += v * v;
  ramp_rms = std::sqrt(ramp_rms / n);
  EXPECT_LE(rms(d.trend, ramp), 0.05 * ramp_rms);
}

TEST(Stl, RemainderAbsorbsOutlier) {
  Rng rng = make_rng(6, "stl-outlier");
  auto x = seasonal_trend(60, 100, 0.5, 8);
  for (auto& v : x) v += normal(rng, 0.0, 0.5);
  const auto base = stl_decompose(x);
  const std::size_t k = 31;
  const double magnitude = 40;
  x[k] += magnitude;
  const auto d = stl_decompose(x);
  EXPECT_GE(d.remainder[k] - base.remainder[k], 0.8 * magnitude);
  EXPECT_LT(d.robustness_weights[k], 0.5);
}

TEST(Stl, AdditivityAndPeriodicSeasonal) {
  Rng rng = make_rng(7, "stl-additive");
  for (int k = 0; k < 200; ++k) {
    const int n = 24 + static_cast<int>(uniform_index(rng, 60));
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = normal(rng, 0.0, 1e3) * (bernoulli(rng, 0.1) ? 10 : 1);
    StlOptions opt;
    opt.robust_iterations = static_cast<int>(uniform_index(rng, 3));
    const auto d = stl_decompose(x, opt);
    ASSERT_LE(max_reconstruction_error(x, d), 1e-9);
    for (int i = 12; i < n; ++i)
      ASSERT_EQ(d.seasonal[static_cast<std::size_t>(i)], d.seasonal[static_cast<std::size_t>(i - 12)]);
  }
}

TEST(Ets, ExactLinearTrend) {
  std::vector<double> y(60);
  for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = i + 1;
  const auto f = ets_forecast(y, 12);
  for (int h = 0; h < 12; ++h) EXPECT_NEAR(f.point[static_cast<std::size_t>(h)], 61 + h, 1e-3);
}

TEST(Ets, ConstantSeriesIsFlatWithZeroVariance) {
  const auto f = ets_forecast(std::vector<double>(30, 4.25), 6);
  for (int h = 0; h < 6; ++h) {
    EXPECT_EQ(f.point[static_cast<std::size_t>(h)], 4.25);
    EXPECT_EQ(f.sigma2[static_cast<std::size_t>(h)], 0.0);
  }
}

TEST(Ets, Preconditions) {
  EXPECT_THROW(ets_forecast(std::vector<double>(9, 1.0), 3), std::invalid_argument);
  EXPECT_THROW(ets_forecast(std::vector<double>(20, 1.0), 0), std::invalid_argument);
}

TEST(Ets, BeatsNaiveOnNoisyLinear) {
  Rng rng = make_rng(8, "ets-naive");
  for (int k = 0; k < 20; ++k) {
    std::vector<double> y(48);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 10 + 0.7 * static_cast<double>(i) + normal(rng, 0.0, 2.0);
    const auto fit = fit_holt(y);
    double naive = 0;
    for (std::size_t i = 1; i < y.size(); ++i) naive += (y[i] - y[i - 1]) * (y[i] - y[i - 1]);
    EXPECT_LE(fit.sse, naive);
    // Recompute the fitted SSE from the reported parameters.
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int i = 0; i < 10; ++i) {
      st += i + 1;
      sy += y[static_cast<std::size_t>(i)];
      stt += (i + 1.0) * (i + 1);
      sty += (i + 1) * y[static_cast<std::size_t>(i)];
    }
    const double b = (10 * sty - st * sy) / (10 * stt - st * st), l = (sy - b * st) / 10;
    double lv = l, bv = b, sse = 0;
    for (double v : y) {
      const double e = v - lv - bv;
      sse += e * e;
      lv += bv + fit.alpha * e;
      bv += fit.beta * e;
    }
    EXPECT_NEAR(sse, fit.sse, 1e-9 * sse);
    EXPECT_NEAR(lv, fit.level, 1e-9 * std::fabs(lv));
  }
}

TEST(Ets, VarianceFollowsHorizonFormula) {
  Rng rng = make_rng(9, "ets-variance");
  std::vector<double> y(40);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 3 * static_cast<double>(i) + normal(rng, 0.0, 4.0);
  const auto f = ets_forecast(y, 12);
  const auto& p = f.fit;
  for (int h = 1; h <= 12; ++h) {
    double acc = 1;
    for (int j = 1; j < h; ++j) acc += (p.alpha + j * p.beta) * (p.alpha + j * p.beta);
    EXPECT_NEAR(f.sigma2[static_cast<std::size_t>(h - 1)], p.sigma2 * acc, 1e-12 * p.sigma2 * acc);
    if (h > 1) { EXPECT_GE(f.sigma2[static_cast<std::size_t>(h - 1)], f.sigma2[static_cast<std::size_t>(h - 2)]); }
  }
}

TEST(Forecast, NoiselessSeasonalTrendMape) {
  const auto full = seasonal_trend(72, 200, 1.5, 20);
  MonthlySeries s{Metric::active_repos, {2015, 1}, std::vector<double>(full.begin(), full.begin() + 60)};
  const auto f = forecast_with_intervals(s);
  EXPECT_EQ(f.start, (YearMonth{2020, 1}));
  double mape = 0;
  for (int h = 0; h < 12; ++h)
    mape += std::fabs(f.point[static_cast<std::size_t>(h)] - full[static_cast<std::size_t>(60 + h)]) /
            full[static_cast<std::size_t>(60 + h)];
  EXPECT_LT(mape / 12, 0.01);
}

TEST(Forecast, BandsNestedAndSymmetric) {
  Rng rng = make_rng(10, "forecast-bands");
  for (int k = 0; k < 50; ++k) {
    auto x = seasonal_trend(60, 100, 0.3, 10);
    for (auto& v : x) v += normal(rng, 0.0, 3.0);
    const auto f = forecast_with_intervals({Metric::pushes_total, {2015, 1}, x});
    const auto& b80 = f.band(0.80);
    const auto& b95 = f.band(0.95);
    for (std::size_t h = 0; h < 12; ++h) {
      ASSERT_LT(b95.lower[h], b80.lower[h]);
      ASSERT_LT(b80.lower[h], f.point[h]);
      ASSERT_LT(f.point[h], b80.upper[h]);
      ASSERT_LT(b80.upper[h], b95.upper[h]);
      ASSERT_NEAR(f.point[h] - b80.lower[h], b80.upper[h] - f.point[h], 1e-9 * std::fabs(f.point[h]));
      ASSERT_NEAR(f.point[h] - b95.lower[h], b95.upper[h] - f.point[h], 1e-9 * std::fabs(f.point[h]));
    }
  }
  const auto f = forecast_with_intervals({Metric::pushes_total, {2015, 1}, seasonal_trend(60, 1, 0, 0)});
  EXPECT_THROW(f.band(0.5), std::out_of_range);
}

TEST(Forecast, BandWidthFromAdjustedVariance) {
  Rng rng = make_rng(12, "forecast-width");
  auto x = seasonal_trend(60, 100, 0.3, 10);
  for (auto& v : x) v += normal(rng, 0.0, 3.0);
  const auto f = forecast_with_intervals({Metric::pushes_total, {2015, 1}, x});
  const auto dec = stl_decompose(x);
  std::vector<double> adj(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) adj[i] = x[i] - dec.seasonal[i];
  const auto e = ets_forecast(adj, 12);
  const double inflate = 58.0 / 47.0, seasonal = e.fit.sigma2 * inflate * 12.0 / 60.0;
  for (std::size_t h = 0; h < 12; ++h) {
    const double half = 1.959963984540054 * std::sqrt(e.sigma2[h] * inflate + seasonal);
    EXPECT_NEAR(f.band(0.95).upper[h] - f.point[h], half, 1e-9 * half);
  }
}

TEST(Forecast, ConstantSeriesExactlyFlat) {
  const auto f = forecast_with_intervals({Metric::active_repos, {2015, 1}, std::vector<double>(48, 42.5)});
  for (std::size_t h = 0; h < 12; ++h) {
    EXPECT_EQ(f.point[h], 42.5);
    EXPECT_EQ(f.band(0.95).lower[h], 42.5);
    EXPECT_EQ(f.band(0.95).upper[h], 42.5);
  }
}

TEST(GapReport, IdentityAndBoundary) {
  Rng rng = make_rng(11, "gap");
  auto x = seasonal_trend(60, 100, 0.3, 10);
  for (auto& v : x) v += normal(rng, 0.0, 3.0);
  const auto f = forecast_with_intervals({Metric::active_repos, {2015, 1}, x});
  const auto same = overall_effect(f.point, f);
  for (const auto& r : same) {
    EXPECT_EQ(r.gap, 0.0);
    EXPECT_EQ(r.flag(), "inside");
  }
  std::vector<double> above = f.band(0.95).upper;
  for (auto& v : above) v += 1e-6;
  for (const auto& r : overall_effect(above, f)) {
    EXPECT_TRUE(r.outside95);
    EXPECT_TRUE(r.outside80);
    EXPECT_EQ(r.flag(), "outside95");
  }
  std::vector<double> mid(12);
  for (std::size_t h = 0; h < 12; ++h) mid[h] = (f.band(0.80).upper[h] + f.band(0.95).upper[h]) / 2;
  for (const auto& r : overall_effect(mid, f)) EXPECT_EQ(r.flag(), "outside80");
  EXPECT_THROW(overall_effect(std::vector<double>(11, 0.0), f), std::invalid_argument);
}

TEST(GapReport, LevelShiftFlagged) {
  Rng rng = make_rng(12, "level-shift");
  auto x = seasonal_trend(72, 1000, 2, 50);
  for (auto& v : x) v *= 1 + normal(rng, 0.0, 0.01);
  const auto f = forecast_with_intervals({Metric::active_repos, {2015, 1}, std::vector<double>(x.begin(), x.begin() + 60)});
  std::vector<double> observed(x.begin() + 60, x.end());
  for (std::size_t h = 2; h < 12; ++h) observed[h] *= 0.8;
  const auto rows = overall_effect(observed, f);
  for (std::size_t h = 2; h < 12; ++h) EXPECT_LE(rows[h].gap, 0.0);
  for (std::size_t h = 3; h < 12; ++h) EXPECT_TRUE(rows[h].outside95) << h;
}

TEST(GapReport, CsvLayout) {
  const auto f = forecast_with_intervals({Metric::active_repos, {2015, 1}, seasonal_trend(36, 5, 0.1, 1)});
  std::ostringstream out;
  write_gap_csv(out, overall_effect(f.point, f));
  std::istringstream in(out.str());
  const auto t = csv::read(in, "gap.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"month", "observed", "point", "lo80", "hi80", "lo95", "hi95", "gap",
                                                "flag"}));
  ASSERT_EQ(t.rows.size(), 12u);
  EXPECT_EQ(t.rows[0][0], "2018-01");
}
