#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace teamshock::stats {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double mean(std::span<const double> x) {
  if (x.empty()) return kNaN;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Bessel-corrected standard deviation; 0 for a singleton.
inline double sample_sd(std::span<const double> x) {
  if (x.empty()) return kNaN;
  if (x.size() == 1) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
/// `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, p);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

/// Shannon entropy (natural log) of a count vector. Zero entries are ignored.
inline double shannon_entropy(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0 || !std::isfinite(c)) throw std::invalid_argument("entropy: counts must be finite and non-negative");
    total += c;
  }
  if (!(total > 0.0)) throw std::invalid_argument("entropy: at least one count must be positive");
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return std::max(h, 0.0);
}

/// Sample sd over mean. Empty result when n < 2 or mean <= 0.
inline std::optional<double> coefficient_of_variation(std::span<const double> x) {
  if (x.size() < 2) return std::nullopt;
  const double m = mean(x);
  if (!(m > 0.0)) return std::nullopt;
  return sample_sd(x) / m;
}

/// Mid-ranks (1-based); ties share the average of the ranks they span.
inline std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Pearson correlation; NaN when either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return kNaN;
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return kNaN;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<double>{}, x);
}

/// Five-number style summary used by the distribution reports.
struct Summary {
  std::size_t n = 0;
  double mean = kNaN;
  double sd = kNaN;
  double se = kNaN;
  double min = kNaN;
  double q1 = kNaN;
  double median = kNaN;
  double q3 = kNaN;
  double max = kNaN;
};

inline Summary summarize(std::vector<double> x) {
  Summary s;
  s.n = x.size();
  if (x.empty()) return s;
  std::sort(x.begin(), x.end());
  s.mean = mean(x);
  s.sd = sample_sd(x);
  s.se = s.sd / std::sqrt(static_cast<double>(x.size()));
  s.min = x.front();
  s.max = x.back();
  s.q1 = quantile_sorted(x, 0.25);
  s.median = quantile_sorted(x, 0.5);
  s.q3 = quantile_sorted(x, 0.75);
  return s;
}

}  // namespace teamshock::stats
