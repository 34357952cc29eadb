#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "teamshock/calendar.hpp"
#include "teamshock/corpus.hpp"
#include "teamshock/csv.hpp"
#include "teamshock/stats.hpp"

namespace teamshock {

enum class Metric : std::uint8_t {
  active_repos,
  opened_pull_requests,
  pushes_per_repo,
  active_members_per_repo,
  pushes_total,
};

inline constexpr std::array<Metric, 5> kAllMetrics{Metric::active_repos, Metric::opened_pull_requests,
                                                   Metric::pushes_per_repo, Metric::active_members_per_repo,
                                                   Metric::pushes_total};

inline std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::active_repos: return "active_repos";
    case Metric::opened_pull_requests: return "opened_pull_requests";
    case Metric::pushes_per_repo: return "pushes_per_repo";
    case Metric::active_members_per_repo: return "active_members_per_repo";
    case Metric::pushes_total: return "pushes_total";
  }
  return "?";
}

inline Metric metric_from_string(std::string_view s) {
  for (auto m : kAllMetrics)
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

struct MonthlySeries {
  Metric metric = Metric::active_repos;
  YearMonth start;
  std::vector<double> values;

  YearMonth month_at(std::size_t i) const { return start + static_cast<int>(i); }
};

/// Monthly platform metrics over [first, last]. A repository is active in a
/// month when it has at least one contribution event; attention and excluded
/// events never activate it. Per-repo metrics are means over active repos.
inline std::vector<MonthlySeries> aggregate_monthly_all(const Corpus& corpus, YearMonth first,
                                                        YearMonth last) {
  if (last < first) throw std::invalid_argument("aggregate_monthly: empty month range");
  const int n = last - first + 1;
  // (month, repo, actor) keys of contribution events; sorted so the result
  // does not depend on input order.
  std::vector<std::tuple<int, RepoIndex, ActorIndex>> keys;
  std::vector<double> pushes(static_cast<std::size_t>(n), 0.0), prs(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : corpus.events()) {
    if (e.activity_class() != ActivityClass::contribution) continue;
    const int m = month_of(e.ts) - first;
    if (m < 0 || m >= n) continue;
    keys.emplace_back(m, e.repo, e.actor);
    if (e.type == EventType::push) pushes[static_cast<std::size_t>(m)] += 1;
    if (e.type == EventType::pull_request_open) prs[static_cast<std::size_t>(m)] += 1;
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<double> repos(static_cast<std::size_t>(n), 0.0), members(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto m = static_cast<std::size_t>(std::get<0>(keys[i]));
    members[m] += 1;
    if (i == 0 || std::get<0>(keys[i - 1]) != std::get<0>(keys[i]) ||
        std::get<1>(keys[i - 1]) != std::get<1>(keys[i]))
      repos[m] += 1;
  }
  std::vector<MonthlySeries> out;
  for (auto metric : kAllMetrics) {
    MonthlySeries s{metric, first, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
    for (std::size_t m = 0; m < static_cast<std::size_t>(n); ++m) {
      const double active = repos[m];
      switch (metric) {
        case Metric::active_repos: s.values[m] = active; break;
        case Metric::opened_pull_requests: s.values[m] = prs[m]; break;
        case Metric::pushes_total: s.values[m] = pushes[m]; break;
        case Metric::pushes_per_repo: s.values[m] = active > 0 ? pushes[m] / active : 0.0; break;
        case Metric::active_members_per_repo: s.values[m] = active > 0 ? members[m] / active : 0.0; break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline MonthlySeries aggregate_monthly(const Corpus& corpus, Metric metric, YearMonth first, YearMonth last) {
  for (auto& s : aggregate_monthly_all(corpus, first, last))
    if (s.metric == metric) return std::move(s);
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// STL: seasonal-trend decomposition by loess.

struct StlOptions {
  int period = 12;
  int trend_window = 23;
  int low_pass_window = 0;  // 0: smallest odd integer >= period
  int inner_iterations = 2;
  int robust_iterations = 1;
};

struct Decomposition {
  std::vector<double> trend;
  std::vector<double> seasonal;
  std::vector<double> remainder;
  std::vector<double> robustness_weights;
};

namespace detail {

/// Degree-1 loess estimate at 1-based position `xs` from points [nleft, nright]
/// (1-based, inclusive). Returns false when all weights vanish.
inline bool loess_point(std::span<const double> y, int window, double xs, int nleft, int nright,
                        const std::vector<double>* rw, double& ys, std::vector<double>& w) {
  const int n = static_cast<int>(y.size());
  const double range = static_cast<double>(n) - 1.0;
  double h = std::max(xs - nleft, nright - xs);
  if (window > n) h += std::floor(static_cast<double>(window - n) / 2.0);
  const double h9 = 0.999 * h, h1 = 0.001 * h;
  double a = 0.0;
  for (int j = nleft; j <= nright; ++j) {
    double wj = 0.0;
    const double r = std::fabs(j - xs);
    if (r <= h9) {
      if (r <= h1) {
        wj = 1.0;
      } else {
        const double q = r / h;
        wj = std::pow(1.0 - q * q * q, 3);
      }
      if (rw) wj *= (*rw)[static_cast<std::size_t>(j - 1)];
      a += wj;
    }
    w[static_cast<std::size_t>(j - 1)] = wj;
  }
  if (a <= 0.0) return false;
  for (int j = nleft; j <= nright; ++j) w[static_cast<std::size_t>(j - 1)] /= a;
  if (h > 0.0) {
    double center = 0.0;
    for (int j = nleft; j <= nright; ++j) center += w[static_cast<std::size_t>(j - 1)] * j;
    double b = xs - center;
    double c = 0.0;
    for (int j = nleft; j <= nright; ++j)
      c += w[static_cast<std::size_t>(j - 1)] * (j - center) * (j - center);
    if (std::sqrt(c) > 0.001 * range) {
      b /= c;
      for (int j = nleft; j <= nright; ++j)
        w[static_cast<std::size_t>(j - 1)] *= b * (j - center) + 1.0;
    }
  }
  ys = 0.0;
  for (int j = nleft; j <= nright; ++j) ys += w[static_cast<std::size_t>(j - 1)] * y[static_cast<std::size_t>(j - 1)];
  return true;
}

/// Loess smooth of the whole series, evaluated at every point.
inline std::vector<double> loess_smooth(std::span<const double> y, int window, const std::vector<double>* rw) {
  const int n = static_cast<int>(y.size());
  std::vector<double> out(y.begin(), y.end());
  if (n < 2) return out;
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  int nleft = 1, nright = std::min(window, n);
  const int half = (window + 1) / 2;
  for (int i = 1; i <= n; ++i) {
    if (window < n && i > half && nright != n) {
      ++nleft;
      ++nright;
    }
    double ys;
    if (loess_point(y, window, i, window >= n ? 1 : nleft, window >= n ? n : nright, rw, ys, w))
      out[static_cast<std::size_t>(i - 1)] = ys;
  }
  return out;
}

inline std::vector<double> moving_average(std::span<const double> x, int len) {
  const std::size_t n = x.size();
  const auto L = static_cast<std::size_t>(len);
  std::vector<double> out(n - L + 1);
  double s = 0.0;
  for (std::size_t i = 0; i < L; ++i) s += x[i];
  out[0] = s / static_cast<double>(L);
  for (std::size_t i = L; i < n; ++i) {
    s += x[i] - x[i - L];
    out[i - L + 1] = s / static_cast<double>(L);
  }
  return out;
}

inline int next_odd(int v) { return v % 2 == 0 ? v + 1 : v; }

}  // namespace detail

/// Additive STL with a periodic seasonal component (each cycle position is a
/// robustness-weighted mean of its sub-series) and degree-1 loess trend.
inline Decomposition stl_decompose(std::span<const double> x, const StlOptions& opt = {}) {
  const int n = static_cast<int>(x.size());
  const int np = opt.period;
  if (np < 2) throw std::invalid_argument("stl: period must be >= 2");
  if (n < 2 * np) throw std::invalid_argument("stl: series needs at least two full periods");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("stl: non-finite value");
  const int nt = detail::next_odd(std::max(3, opt.trend_window));
  const int nl = detail::next_odd(opt.low_pass_window > 0 ? opt.low_pass_window : np);

  std::vector<double> trend(static_cast<std::size_t>(n), 0.0), season(static_cast<std::size_t>(n), 0.0);
  std::vector<double> rw(static_cast<std::size_t>(n), 1.0);
  bool use_weights = false;

  for (int outer = 0; outer <= opt.robust_iterations; ++outer) {
    for (int inner = 0; inner < opt.inner_iterations; ++inner) {
      // Cycle-subseries means of the detrended series, extended one period on each side.
      std::vector<double> cyc(static_cast<std::size_t>(np), 0.0);
      for (int k = 0; k < np; ++k) {
        double sw = 0.0, s = 0.0;
        std::vector<double> sub;
        for (int i = k; i < n; i += np) {
          const double v = x[static_cast<std::size_t>(i)] - trend[static_cast<std::size_t>(i)];
          const double wt = use_weights ? rw[static_cast<std::size_t>(i)] : 1.0;
          s += wt * v;
          sw += wt;
          sub.push_back(v);
        }
        // A cycle position whose weights all vanish falls back to its median.
        cyc[static_cast<std::size_t>(k)] = sw > 0.0 ? s / sw : stats::median(std::move(sub));
      }
      std::vector<double> c(static_cast<std::size_t>(n + 2 * np));
      for (int i = 0; i < n + 2 * np; ++i) c[static_cast<std::size_t>(i)] = cyc[static_cast<std::size_t>(((i - np) % np + np) % np)];
      // Low-pass filter of the cycle means.
      auto lp = detail::moving_average(c, np);
      lp = detail::moving_average(lp, np);
      lp = detail::moving_average(lp, 3);
      lp = detail::loess_smooth(lp, nl, nullptr);
      for (int i = 0; i < n; ++i)
        season[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(np + i)] - lp[static_cast<std::size_t>(i)];
      std::vector<double> deseason(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        deseason[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - season[static_cast<std::size_t>(i)];
      trend = detail::loess_smooth(deseason, nt, use_weights ? &rw : nullptr);
    }
    if (outer == opt.robust_iterations) break;
    // Bisquare robustness weights from the remainder.
    std::vector<double> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      r[static_cast<std::size_t>(i)] = std::fabs(x[static_cast<std::size_t>(i)] - trend[static_cast<std::size_t>(i)] - season[static_cast<std::size_t>(i)]);
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    const double cmad = 6.0 * (sorted[static_cast<std::size_t>(n / 2 - (n % 2 == 0 ? 1 : 0))] + sorted[static_cast<std::size_t>(n / 2)]) / 2.0;
    const double c9 = 0.999 * cmad, c1 = 0.001 * cmad;
    for (int i = 0; i < n; ++i) {
      const double ri = r[static_cast<std::size_t>(i)];
      double wi;
      if (ri <= c1) wi = 1.0;
      else if (ri <= c9) wi = std::pow(1.0 - (ri / cmad) * (ri / cmad), 2);
      else wi = 0.0;
      rw[static_cast<std::size_t>(i)] = wi;
    }
    use_weights = true;
  }

  // Periodic seasonal: average each cycle position.
  for (int k = 0; k < np; ++k) {
    double s = 0.0;
    int cnt = 0;
    for (int i = k; i < n; i += np) {
      s += season[static_cast<std::size_t>(i)];
      ++cnt;
    }
    for (int i = k; i < n; i += np) season[static_cast<std::size_t>(i)] = s / cnt;
  }
  Decomposition d;
  d.trend = std::move(trend);
  d.seasonal = std::move(season);
  d.remainder.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) d.remainder[i] = x[i] - (d.trend[i] + d.seasonal[i]);
  d.robustness_weights = use_weights ? std::move(rw) : std::vector<double>(static_cast<std::size_t>(n), 1.0);
  return d;
}

// ---------------------------------------------------------------------------
// Holt linear-trend exponential smoothing (additive errors).

struct HoltFit {
  double alpha = 0.0;
  double beta = 0.0;  // trend gain in error-correction form (alpha * beta*)
  double level = 0.0;
  double slope = 0.0;
  double sse = 0.0;
  double sigma2 = 0.0;
  std::size_t n = 0;
};

struct EtsForecast {
  std::vector<double> point;
  std::vector<double> sigma2;
  HoltFit fit;
};

namespace detail {

/// One pass of the Holt recursions; returns the one-step SSE and final state.
inline double holt_pass(std::span<const double> y, double alpha, double beta, double l0, double b0,
                        double& level, double& slope) {
  double l = l0, b = b0, sse = 0.0;
  for (double v : y) {
    const double e = v - (l + b);
    sse += e * e;
    l = l + b + alpha * e;
    b = b + beta * e;
  }
  level = l;
  slope = b;
  return sse;
}

}  // namespace detail

/// Grid for Holt parameters: alpha in {0.01, ..., 0.99, 1.00} and
/// beta* in {0, 0.01, ..., 1.00}, with beta = alpha * beta*. The first grid
/// point attaining the minimal one-step SSE wins.
inline HoltFit fit_holt(std::span<const double> y) {
  if (y.size() < 10) throw std::invalid_argument("ets: series needs at least 10 observations");
  // Initial state from a least-squares line through the first ten points,
  // expressed at t = 0 so the first one-step forecast is l0 + b0.
  const std::size_t m = 10;
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = static_cast<double>(i + 1);
    st += t;
    sy += y[i];
    stt += t * t;
    sty += t * y[i];
  }
  const double b0 = (m * sty - st * sy) / (m * stt - st * st);
  const double l0 = (sy - b0 * st) / m;

  HoltFit best;
  best.sse = stats::kInf;
  for (int ia = 1; ia <= 100; ++ia) {
    const double alpha = ia / 100.0;
    for (int ib = 0; ib <= 100; ++ib) {
      const double beta = alpha * (ib / 100.0);
      double l, b;
      const double sse = detail::holt_pass(y, alpha, beta, l0, b0, l, b);
      if (sse < best.sse) {
        best = {alpha, beta, l, b, sse, 0.0, y.size()};
      }
    }
  }
  best.sigma2 = best.sse / static_cast<double>(y.size() - 2);
  return best;
}

/// Holt forecast with per-horizon variance
///   v_h = sigma2 * (1 + sum_{j=1}^{h-1} (alpha + j*beta)^2).
/// An all-equal series forecasts that constant with zero variance.
inline EtsForecast ets_forecast(std::span<const double> y, int horizon) {
  if (horizon < 1) throw std::invalid_argument("ets: horizon must be >= 1");
  if (y.size() < 10) throw std::invalid_argument("ets: series needs at least 10 observations");
  EtsForecast out;
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  const double scale = std::max(1.0, std::max(std::fabs(*mn), std::fabs(*mx)));
  if (*mx - *mn <= 1e-12 * scale) {
    out.fit = {1.0, 0.0, y.back(), 0.0, 0.0, 0.0, y.size()};
    out.point.assign(static_cast<std::size_t>(horizon), y.back());
    out.sigma2.assign(static_cast<std::size_t>(horizon), 0.0);
    return out;
  }
  out.fit = fit_holt(y);
  const auto& f = out.fit;
  double acc = 0.0;
  for (int h = 1; h <= horizon; ++h) {
    out.point.push_back(f.level + h * f.slope);
    if (h > 1) {
      const double c = f.alpha + (h - 1) * f.beta;
      acc += c * c;
    }
    out.sigma2.push_back(f.sigma2 * (1.0 + acc));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Band {
  double level;  // e.g. 0.80
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Forecast {
  YearMonth start;  // first forecast month
  int horizon = 0;
  std::vector<double> point;
  std::vector<Band> bands;  // ascending level

  const Band& band(double level) const {
    for (const auto& b : bands)
      if (std::fabs(b.level - level) < 1e-9) return b;
    throw std::out_of_range("forecast: no band at requested level");
  }
};

struct ForecastOptions {
  int horizon = 12;
  std::vector<double> levels{0.80, 0.95};
  StlOptions stl;
};

/// STL -> Holt on the seasonally adjusted series -> re-add the final fitted
/// seasonal cycle. Gaussian bands from the Holt per-step variance, with the
/// residual variance counted on the degrees of freedom left after the
/// seasonal fit plus the variance of the seasonal estimate itself.
/// A constant series forecasts that constant with zero-width bands.
inline Forecast forecast_with_intervals(const MonthlySeries& series, const ForecastOptions& opt = {}) {
  const auto& x = series.values;
  const auto dec = stl_decompose(x, opt.stl);
  const std::size_t n = x.size();
  const auto np = static_cast<std::size_t>(opt.stl.period);
  const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  std::vector<double> adjusted(n);
  for (std::size_t i = 0; i < n; ++i) adjusted[i] = constant ? x[i] : x[i] - dec.seasonal[i];
  const auto ets = ets_forecast(adjusted, opt.horizon);
  const double nd = static_cast<double>(n), pd = static_cast<double>(np);
  const double inflate = nd - 2.0 > pd - 1.0 ? (nd - 2.0) / (nd - 2.0 - (pd - 1.0)) : 1.0;
  const double seasonal_var = ets.fit.sigma2 * inflate * pd / nd;

  Forecast f;
  f.start = series.start + static_cast<int>(n);
  f.horizon = opt.horizon;
  for (int h = 0; h < opt.horizon; ++h) {
    const double s = constant ? 0.0 : dec.seasonal[n - np + static_cast<std::size_t>(h) % np];
    f.point.push_back(ets.point[static_cast<std::size_t>(h)] + s);
  }
  auto levels = opt.levels;
  std::sort(levels.begin(), levels.end());
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("forecast: levels must be in (0,1)");
    const double z = stats::normal_quantile(0.5 + level / 2.0);
    Band b{level, {}, {}};
    for (int h = 0; h < opt.horizon; ++h) {
      const double half = z * std::sqrt(ets.sigma2[static_cast<std::size_t>(h)] * inflate + seasonal_var);
      b.lower.push_back(f.point[static_cast<std::size_t>(h)] - half);
      b.upper.push_back(f.point[static_cast<std::size_t>(h)] + half);
    }
    f.bands.push_back(std::move(b));
  }
  return f;
}

struct GapRow {
  YearMonth month;
  double observed;
  double point;
  double lo80, hi80, lo95, hi95;
  double gap;
  bool outside80;
  bool outside95;

  std::string_view flag() const noexcept {
    return outside95 ? "outside95" : (outside80 ? "outside80" : "inside");
  }
};

/// Observed minus forecast per month, flagged against the 80% and 95% bands.
inline std::vector<GapRow> overall_effect(std::span<const double> observed, const Forecast& forecast) {
  if (observed.size() != forecast.point.size())
    throw std::invalid_argument("overall_effect: observed length " + std::to_string(observed.size()) +
                                " does not match forecast horizon " + std::to_string(forecast.point.size()));
  const auto& b80 = forecast.band(0.80);
  const auto& b95 = forecast.band(0.95);
  std::vector<GapRow> rows;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double y = observed[i];
    rows.push_back({forecast.start + static_cast<int>(i), y, forecast.point[i], b80.lower[i], b80.upper[i],
                    b95.lower[i], b95.upper[i], y - forecast.point[i], y < b80.lower[i] || y > b80.upper[i],
                    y < b95.lower[i] || y > b95.upper[i]});
  }
  return rows;
}

inline void write_gap_csv(std::ostream& out, const std::vector<GapRow>& rows) {
  out << "month,observed,point,lo80,hi80,lo95,hi95,gap,flag\n";
  for (const auto& r : rows)
    csv::write_row(out, r.month.str(), r.observed, r.point, r.lo80, r.hi80, r.lo95, r.hi95, r.gap,
                   std::string(r.flag()));
}

inline void write_series_csv(std::ostream& out, const std::vector<MonthlySeries>& series) {
  out << "month";
  for (const auto& s : series) out << ',' << to_string(s.metric);
  out << '\n';
  if (series.empty()) return;
  for (std::size_t i = 0; i < series.front().values.size(); ++i) {
    out << series.front().month_at(i).str();
    for (const auto& s : series) out << ',' << csv::num(s.values[i]);
    out << '\n';
  }
}

}  // namespace teamshock
