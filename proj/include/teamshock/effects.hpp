#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamshock/csv.hpp"
#include "teamshock/stats.hpp"

namespace teamshock {

struct ITERecord {
  std::string repo_id;
  int month = 0;
  std::string outcome;
  double observed = 0.0;
  double predicted = 0.0;
  double ite = 0.0;
};

inline std::vector<double> compute_ite(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("compute_ite: length mismatch");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] - y_hat[i];
    if (!std::isfinite(out[i])) throw std::invalid_argument("compute_ite: non-finite effect");
  }
  return out;
}

/// Joins observed and predicted outcomes on repo id. Output follows the
/// order of `observed_ids`.
inline std::vector<ITERecord> compute_ite(std::span<const std::string> observed_ids, std::span<const double> y,
                                          std::span<const std::string> predicted_ids, std::span<const double> y_hat,
                                          int month, const std::string& outcome) {
  if (observed_ids.size() != y.size() || predicted_ids.size() != y_hat.size())
    throw std::invalid_argument("compute_ite: ids and values differ in length");
  std::map<std::string, double> pred;
  for (std::size_t i = 0; i < predicted_ids.size(); ++i)
    if (!pred.emplace(predicted_ids[i], y_hat[i]).second)
      throw std::invalid_argument("compute_ite: duplicate predicted id " + predicted_ids[i]);
  std::vector<std::string> unmatched;
  std::vector<ITERecord> out;
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < observed_ids.size(); ++i) {
    if (++seen[observed_ids[i]] > 1) throw std::invalid_argument("compute_ite: duplicate observed id " + observed_ids[i]);
    auto it = pred.find(observed_ids[i]);
    if (it == pred.end()) {
      unmatched.push_back(observed_ids[i]);
      continue;
    }
    const double ite = y[i] - it->second;
    if (!std::isfinite(ite)) throw std::invalid_argument("compute_ite: non-finite effect for " + observed_ids[i]);
    out.push_back({observed_ids[i], month, outcome, y[i], it->second, ite});
  }
  for (const auto& [id, v] : pred)
    if (!seen.count(id)) unmatched.push_back(id);
  if (!unmatched.empty()) {
    std::sort(unmatched.begin(), unmatched.end());
    std::string msg = "compute_ite: unmatched repo ids:";
    for (std::size_t i = 0; i < unmatched.size() && i < 20; ++i) msg += " " + unmatched[i];
    if (unmatched.size() > 20) msg += " ... (" + std::to_string(unmatched.size()) + " total)";
    throw std::invalid_argument(msg);
  }
  return out;
}

inline void write_ite_csv(std::ostream& out, std::span<const ITERecord> rows) {
  csv::write_row(out, "repo_id", "month", "outcome", "Y", "Y_hat", "ite");
  for (const auto& r : rows) csv::write_row(out, r.repo_id, r.month, r.outcome, r.observed, r.predicted, r.ite);
}

struct ConformalInterval {
  double d = 0.0;
  double alpha = 0.05;
  std::size_t n = 0;
  std::size_t k = 0;

  bool unbounded() const noexcept { return std::isinf(d); }
};

/// Split-conformal half-width: the k-th smallest absolute residual with
/// k = ceil((n + 1)(1 - alpha)); infinite when k exceeds n.
inline ConformalInterval conformal_interval(std::span<const double> residuals, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("conformal: alpha must be in (0, 1)");
  if (residuals.empty()) throw std::invalid_argument("conformal: no residuals");
  ConformalInterval c;
  c.alpha = alpha;
  c.n = residuals.size();
  // Guard the ceiling against representation error, e.g. 20 * 0.95.
  const double raw = static_cast<double>(c.n + 1) * (1.0 - alpha);
  double k = std::ceil(raw);
  if (k - raw > 1.0 - 1e-9) k -= 1.0;
  c.k = static_cast<std::size_t>(k);
  if (c.k > c.n) {
    c.d = std::numeric_limits<double>::infinity();
    return c;
  }
  std::vector<double> a(residuals.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(residuals[i]);
  std::stable_sort(a.begin(), a.end());
  c.d = a[std::max<std::size_t>(c.k, 1) - 1];
  return c;
}

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

/// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Dual theta-function series, fast for small arguments.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 64; ++k) {
      const double term = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * c);
      s += term;
      if (term < 1e-17 * s) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Samples with n_a * n_b up to this size get the exact p-value.
inline constexpr double kKsExactLimit = 1e8;

/// P(D >= d) for continuous data, by counting monotone lattice paths from
/// (0, 0) to (m, n) that stay strictly inside the band |i/m - j/n| < d.
inline double ks_exact_p(std::size_t m, std::size_t n, double d) {
  if (m > n) std::swap(m, n);
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  // Largest attainable statistic below d, padded off the lattice.
  const double q = (0.5 + std::floor(d * md * nd - 1e-7)) / (md * nd);
  std::vector<double> u(n + 1);
  for (std::size_t j = 0; j <= n; ++j) u[j] = static_cast<double>(j) / nd > q ? 0.0 : 1.0;
  for (std::size_t i = 1; i <= m; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(i + n);
    u[0] = static_cast<double>(i) / md > q ? 0.0 : w * u[0];
    for (std::size_t j = 1; j <= n; ++j)
      u[j] = std::fabs(static_cast<double>(i) / md - static_cast<double>(j) / nd) > q ? 0.0 : w * u[j] + u[j - 1];
  }
  return std::clamp(1.0 - u[n], 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov test. D is exact under ties (pooled sweep).
/// The p-value is exact for continuous data up to kKsExactLimit and otherwise
/// the asymptotic Kolmogorov tail at sqrt(n_a n_b / (n_a + n_b)) D.
inline KSResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: both samples must be nonempty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KSResult r;
  r.statistic = d;
  r.n_a = x.size();
  r.n_b = y.size();
  const double ne = na * nb / (na + nb);
  if (d == 0.0) r.p_value = 1.0;
  else if (na * nb <= kKsExactLimit) r.p_value = ks_exact_p(x.size(), y.size(), d);
  else r.p_value = kolmogorov_survival(std::sqrt(ne) * d);
  return r;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

inline Histogram histogram(std::span<const double> x, double lo, double hi, std::size_t bins) {
  Histogram h;
  if (bins == 0 || !(hi > lo)) {
    h.edges = {lo, hi};
    h.counts = {x.size()};
    return h;
  }
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : x) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

/// Test residuals beside target effects for one (outcome, month).
struct DistributionReport {
  std::string outcome;
  int month = 0;
  stats::Summary residuals;
  stats::Summary effects;
  Histogram residual_hist;
  Histogram effect_hist;
  KSResult ks;
  std::vector<double> residual_values;
  std::vector<double> effect_values;
};

inline DistributionReport residual_distribution_report(std::span<const double> test_y, std::span<const double> test_y_hat,
                                                       std::span<const double> target_ite, int month,
                                                       const std::string& outcome = "", std::size_t bins = 30) {
  if (test_y.empty() || target_ite.empty()) throw std::invalid_argument("distribution report: empty input");
  DistributionReport r;
  r.outcome = outcome;
  r.month = month;
  r.residual_values = compute_ite(test_y, test_y_hat);
  r.effect_values.assign(target_ite.begin(), target_ite.end());
  r.residuals = stats::summarize(r.residual_values);
  r.effects = stats::summarize(r.effect_values);
  const double lo = std::min(r.residuals.min, r.effects.min), hi = std::max(r.residuals.max, r.effects.max);
  r.residual_hist = histogram(r.residual_values, lo, hi, bins);
  r.effect_hist = histogram(r.effect_values, lo, hi, bins);
  r.ks = ks_two_sample(r.residual_values, r.effect_values);
  return r;
}

namespace detail {

inline nlohmann::ordered_json summary_json(const stats::Summary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  return {{"n", s.n},        {"mean", num(s.mean)},     {"sd", num(s.sd)},     {"se", num(s.se)},
          {"min", num(s.min)}, {"q1", num(s.q1)},        {"median", num(s.median)},
          {"q3", num(s.q3)},   {"max", num(s.max)}};
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const DistributionReport& r) {
  nlohmann::ordered_json j;
  j["outcome"] = r.outcome;
  j["month"] = r.month;
  j["test_residuals"] = detail::summary_json(r.residuals);
  j["target_ite"] = detail::summary_json(r.effects);
  j["histogram"] = {{"edges", r.residual_hist.edges},
                    {"test_residuals", r.residual_hist.counts},
                    {"target_ite", r.effect_hist.counts}};
  j["ks"] = {{"statistic", r.ks.statistic}, {"p_value", r.ks.p_value}, {"n_test", r.ks.n_a}, {"n_target", r.ks.n_b}};
  return j;
}

inline nlohmann::ordered_json to_json(const ConformalInterval& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["n"] = c.n;
  j["k"] = c.k;
  j["d"] = c.unbounded() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(c.d);
  return j;
}

/// Box-plot rows (one per month and group) for the distribution figure.
inline void write_box_csv(std::ostream& out, std::span<const DistributionReport> reports) {
  csv::write_row(out, "outcome", "month", "group", "n", "min", "q1", "median", "q3", "max", "mean");
  for (const auto& r : reports) {
    for (int g = 0; g < 2; ++g) {
      const auto& s = g == 0 ? r.residuals : r.effects;
      csv::write_row(out, r.outcome, r.month, g == 0 ? "test_residual" : "target_ite", s.n, s.min, s.q1, s.median, s.q3,
                     s.max, s.mean);
    }
  }
}

}  // namespace teamshock
