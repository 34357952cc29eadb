#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "teamshock/matrix.hpp"
#include "teamshock/random.hpp"
#include "teamshock/stats.hpp"

namespace teamshock {

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // p*p row-major; NaN where a column is constant
  std::vector<bool> constant;

  std::size_t size() const noexcept { return names.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

inline CorrelationMatrix spearman_matrix(const Matrix& X, std::vector<std::string> names = {}) {
  if (X.rows < 3) throw std::invalid_argument("spearman: need at least 3 rows");
  if (names.empty())
    for (std::size_t j = 0; j < X.cols; ++j) names.push_back("x" + std::to_string(j));
  if (names.size() != X.cols) throw std::invalid_argument("spearman: names do not match columns");
  const std::size_t p = X.cols;
  std::vector<std::vector<double>> ranks(p);
  CorrelationMatrix c;
  c.names = std::move(names);
  c.constant.assign(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = X.column(j);
    ranks[j] = stats::midranks(col);
    c.constant[j] = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
  }
  c.values.assign(p * p, stats::kNaN);
  for (std::size_t i = 0; i < p; ++i) {
    if (!c.constant[i]) c.values[i * p + i] = 1.0;
    for (std::size_t j = i + 1; j < p; ++j) {
      if (c.constant[i] || c.constant[j]) continue;
      c.values[i * p + j] = c.values[j * p + i] = stats::pearson(ranks[i], ranks[j]);
    }
  }
  return c;
}

enum class RepresentativeRule { central, first };

inline RepresentativeRule representative_rule_from_string(std::string_view s) {
  if (s == "central") return RepresentativeRule::central;
  if (s == "first") return RepresentativeRule::first;
  throw std::invalid_argument("unknown representative rule '" + std::string(s) + "'");
}

struct ClusterSelection {
  double threshold = 0.7;
  std::vector<std::vector<std::size_t>> clusters;  // ascending members, ordered by first member
  std::vector<std::size_t> representatives;  // one per cluster, same order
};

/// Complete-linkage agglomeration on 1 - |rho|, merging only while every
/// cross pair has |rho| > threshold. Missing correlations never merge.
inline ClusterSelection cluster_features(const CorrelationMatrix& corr, double threshold = 0.7,
                                         RepresentativeRule rule = RepresentativeRule::central) {
  const std::size_t p = corr.size();
  auto sim = [&](std::size_t i, std::size_t j) {
    const double v = corr(i, j);
    return std::isnan(v) ? 0.0 : std::abs(v);
  };
  std::vector<std::vector<std::size_t>> cl(p);
  for (std::size_t i = 0; i < p; ++i) cl[i] = {i};
  for (;;) {
    double best = -1.0;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < cl.size(); ++a)
      for (std::size_t b = a + 1; b < cl.size(); ++b) {
        double link = std::numeric_limits<double>::infinity();
        for (auto i : cl[a])
          for (auto j : cl[b]) link = std::min(link, sim(i, j));
        if (link > threshold && link > best) {
          best = link;
          ba = a;
          bb = b;
        }
      }
    if (best < 0.0) break;
    cl[ba].insert(cl[ba].end(), cl[bb].begin(), cl[bb].end());
    std::sort(cl[ba].begin(), cl[ba].end());
    cl.erase(cl.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::sort(cl.begin(), cl.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  ClusterSelection s;
  s.threshold = threshold;
  for (const auto& c : cl) {
    std::size_t rep = c.front();
    if (rule == RepresentativeRule::central && c.size() > 1) {
      double best = -1.0;
      for (auto i : c) {
        double m = 0.0;
        for (auto j : c)
          if (j != i) m += sim(i, j);
        m /= static_cast<double>(c.size() - 1);
        if (m > best) {
          best = m;
          rep = i;
        }
      }
    }
    s.representatives.push_back(rep);
  }
  s.clusters = std::move(cl);
  return s;
}

namespace detail {

inline Eigen::MatrixXd to_eigen(const Matrix& X) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(X.rows), static_cast<Eigen::Index>(X.cols));
  for (std::size_t i = 0; i < X.rows; ++i)
    for (std::size_t j = 0; j < X.cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X(i, j);
  return m;
}

inline Eigen::VectorXd to_eigen(std::span<const double> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

}  // namespace detail

class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : std::runtime_error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// Column-pivoted QR of a design with intercept, reusable across right-hand sides.
class LeastSquares {
 public:
  LeastSquares(const Matrix& X, std::vector<std::string> names = {}) : qr_(detail::to_eigen(X)), n_(X.rows), p_(X.cols) {
    if (names.empty())
      for (std::size_t j = 0; j < X.cols; ++j) names.push_back("x" + std::to_string(j));
    names_ = std::move(names);
    if (qr_.rank() < static_cast<Eigen::Index>(p_)) {
      std::vector<std::string> dep;
      const auto& perm = qr_.colsPermutation().indices();
      for (Eigen::Index k = qr_.rank(); k < static_cast<Eigen::Index>(p_); ++k)
        dep.push_back(names_[static_cast<std::size_t>(perm(k))]);
      std::sort(dep.begin(), dep.end());
      std::string msg = "ols: design is rank deficient; dependent columns:";
      for (const auto& d : dep) msg += " " + d;
      throw RankDeficientError(msg, dep);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const { return qr_.solve(y); }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr() const noexcept { return qr_; }
  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return p_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// (X'X)^-1 from the triangular factor.
  Eigen::MatrixXd xtx_inverse() const {
    const Eigen::Index p = static_cast<Eigen::Index>(p_);
    Eigen::MatrixXd R = qr_.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd inner = Rinv * Rinv.transpose();
    const auto& P = qr_.colsPermutation();
    return P * inner * P.transpose();
  }

 private:
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  std::size_t n_, p_;
  std::vector<std::string> names_;
};

struct OLSFit {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  double r2 = stats::kNaN;
  std::vector<double> residuals;
};

/// Least squares on a design that already contains its intercept column.
inline OLSFit ols(const Matrix& X, std::span<const double> y, std::vector<std::string> names = {}) {
  if (X.rows != y.size()) throw std::invalid_argument("ols: X rows and y length differ");
  if (X.rows <= X.cols) throw std::invalid_argument("ols: need more rows than columns");
  const LeastSquares ls(X, std::move(names));
  const auto yv = detail::to_eigen(y);
  const Eigen::VectorXd b = ls.solve(yv);
  const Eigen::VectorXd r = yv - detail::to_eigen(X) * b;
  OLSFit f;
  f.names = ls.names();
  f.coefficients.assign(b.data(), b.data() + b.size());
  f.residuals.assign(r.data(), r.data() + r.size());
  const double sse = r.squaredNorm();
  const double ybar = yv.mean();
  const double sst = (yv.array() - ybar).square().sum();
  if (sst > 0.0) f.r2 = 1.0 - sse / sst;
  const double sigma2 = sse / static_cast<double>(X.rows - X.cols);
  const Eigen::MatrixXd inv = ls.xtx_inverse();
  for (Eigen::Index j = 0; j < b.size(); ++j) f.std_errors.push_back(std::sqrt(sigma2 * inv(j, j)));
  return f;
}

/// Prepends a column of ones.
inline Matrix with_intercept(const Matrix& X) {
  Matrix out(X.rows, X.cols + 1);
  for (std::size_t i = 0; i < X.rows; ++i) {
    out(i, 0) = 1.0;
    for (std::size_t j = 0; j < X.cols; ++j) out(i, j + 1) = X(i, j);
  }
  return out;
}

/// VIF_j = 1 / (1 - R^2_j), regressing column j on the others plus an intercept.
/// Infinite when column j is (numerically) a combination of the others.
inline std::vector<double> vif(const Matrix& X) {
  if (X.rows <= X.cols) throw std::invalid_argument("vif: need more rows than columns");
  std::vector<double> out(X.cols);
  for (std::size_t j = 0; j < X.cols; ++j) {
    Matrix A(X.rows, X.cols);  // intercept + other columns
    std::vector<double> t(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      A(i, 0) = 1.0;
      std::size_t c = 1;
      for (std::size_t k = 0; k < X.cols; ++k)
        if (k != j) A(i, c++) = X(i, k);
      t[i] = X(i, j);
    }
    const auto tv = detail::to_eigen(t);
    const double sst = (tv.array() - tv.mean()).square().sum();
    if (!(sst > 0.0)) {
      out[j] = std::numeric_limits<double>::infinity();
      continue;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(detail::to_eigen(A));
    const Eigen::VectorXd b = qr.solve(tv);
    const double sse = (tv - detail::to_eigen(A) * b).squaredNorm();
    const double r2 = 1.0 - sse / sst;
    out[j] = sse <= 1e-12 * sst ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - r2);
  }
  return out;
}

struct BootstrapOptions {
  int iterations = 1000;
  double level = 0.95;
  bool shared_noise = false;  // one draw per iteration instead of one per row
};

struct CoefficientSummary {
  std::string name;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool significant = false;
};

struct BootstrapReport {
  std::vector<CoefficientSummary> coefficients;
  int iterations = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  double d = 0.0;
  std::size_t pool_size = 0;
  std::size_t n = 0;
  std::vector<std::vector<double>> draws;  // per coefficient, one value per iteration

  /// Percentile interval at another level from the stored draws.
  std::pair<double, double> interval(std::size_t coef, double level_) const {
    std::vector<double> v = draws[coef];
    std::sort(v.begin(), v.end());
    const double a = (1.0 - level_) / 2.0;
    return {stats::quantile_sorted(v, a), stats::quantile_sorted(v, 1.0 - a)};
  }
};

/// Residual-infused bootstrap: each iteration regresses Y - (Y_hat + eps) on X,
/// eps drawn from the reference residual pool by rejection to [-d, d].
inline BootstrapReport bootstrap_regress(const Matrix& X, std::span<const double> y, std::span<const double> y_hat,
                                         std::span<const double> residual_pool, double d, const BootstrapOptions& opt,
                                         std::uint64_t seed, std::vector<std::string> names = {}) {
  if (X.rows != y.size() || y.size() != y_hat.size()) throw std::invalid_argument("bootstrap: length mismatch");
  if (X.rows <= X.cols) throw std::invalid_argument("bootstrap: need more rows than columns");
  if (opt.iterations < 1) throw std::invalid_argument("bootstrap: iterations must be >= 1");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw std::invalid_argument("bootstrap: level must be in (0, 1)");
  if (!(d >= 0.0)) throw std::invalid_argument("bootstrap: d must be non-negative");
  const auto kept = std::count_if(residual_pool.begin(), residual_pool.end(), [&](double r) { return std::abs(r) <= d; });
  if (kept == 0) throw std::invalid_argument("bootstrap: no residual lies within [-d, d]");
  const LeastSquares ls(X, std::move(names));
  const std::size_t n = X.rows, p = X.cols;
  BootstrapReport rep;
  rep.iterations = opt.iterations;
  rep.level = opt.level;
  rep.seed = seed;
  rep.d = d;
  rep.pool_size = static_cast<std::size_t>(kept);
  rep.n = n;
  rep.draws.assign(p, std::vector<double>(static_cast<std::size_t>(opt.iterations)));
  Eigen::VectorXd dep(static_cast<Eigen::Index>(n));
  for (int it = 0; it < opt.iterations; ++it) {
    Rng rng = make_rng(seed, "bootstrap", static_cast<std::uint64_t>(it));
    auto draw = [&] {
      for (;;) {
        const double r = residual_pool[uniform_index(rng, residual_pool.size())];
        if (std::abs(r) <= d) return r;
      }
    };
    const double shared = opt.shared_noise ? draw() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eps = opt.shared_noise ? shared : draw();
      dep(static_cast<Eigen::Index>(i)) = y[i] - (y_hat[i] + eps);
    }
    const Eigen::VectorXd b = ls.solve(dep);
    for (std::size_t j = 0; j < p; ++j) rep.draws[j][static_cast<std::size_t>(it)] = b(static_cast<Eigen::Index>(j));
  }
  const double a = (1.0 - opt.level) / 2.0;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> v = rep.draws[j];
    std::sort(v.begin(), v.end());
    CoefficientSummary c;
    c.name = ls.names()[j];
    c.median = stats::quantile_sorted(v, 0.5);
    c.lower = stats::quantile_sorted(v, a);
    c.upper = stats::quantile_sorted(v, 1.0 - a);
    c.significant = c.lower > 0.0 || c.upper < 0.0;
    rep.coefficients.push_back(c);
  }
  return rep;
}

struct ConsistencyRow {
  std::string feature;
  std::vector<std::optional<double>> medians;  // one per month column
  std::vector<bool> significant;
  std::string flag;
};

struct ConsistencyTable {
  std::string outcome;
  std::vector<int> months;
  std::vector<ConsistencyRow> rows;
};

/// Sign-consistency of coefficient medians across months:
/// stable+ / stable- when significant with one sign in every available month,
/// sign-change when significant with both signs, partial+ / partial- when
/// significant with one sign in some months, none otherwise.
inline std::string consistency_flag(const ConsistencyRow& r) {
  int avail = 0, pos = 0, neg = 0;
  for (std::size_t m = 0; m < r.medians.size(); ++m) {
    if (!r.medians[m]) continue;
    ++avail;
    if (r.significant[m]) (*r.medians[m] > 0 ? pos : neg) += 1;
  }
  if (pos > 0 && neg > 0) return "sign-change";
  if (avail > 0 && pos == avail) return "stable+";
  if (avail > 0 && neg == avail) return "stable-";
  if (pos > 0) return "partial+";
  if (neg > 0) return "partial-";
  return "none";
}

inline ConsistencyTable multi_month_report(const std::map<int, BootstrapReport>& by_month, std::vector<int> months,
                                           const std::string& outcome = "") {
  ConsistencyTable t;
  t.outcome = outcome;
  t.months = std::move(months);
  std::vector<std::string> features;
  for (const auto& [m, rep] : by_month)
    for (const auto& c : rep.coefficients)
      if (std::find(features.begin(), features.end(), c.name) == features.end()) features.push_back(c.name);
  for (const auto& f : features) {
    ConsistencyRow row;
    row.feature = f;
    for (int m : t.months) {
      std::optional<double> med;
      bool sig = false;
      if (auto it = by_month.find(m); it != by_month.end())
        for (const auto& c : it->second.coefficients)
          if (c.name == f) {
            med = c.median;
            sig = c.significant;
          }
      row.medians.push_back(med);
      row.significant.push_back(sig);
    }
    row.flag = consistency_flag(row);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace teamshock
