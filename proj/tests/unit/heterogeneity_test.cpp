#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "teamshock/heterogeneity.hpp"

using namespace teamshock;

namespace {

using Ld = long double;

std::vector<Ld> midranks_oracle(const std::vector<double>& x) {
  std::vector<Ld> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = static_cast<Ld>(less) + (static_cast<Ld>(equal) + 1) / 2;
  }
  return r;
}

double pearson_oracle(const std::vector<Ld>& a, const std::vector<Ld>& b) {
  Ld ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  Ld sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

// Solves (X'X) b = X'y by Gaussian elimination with partial pivoting in long double.
std::vector<double> normal_equations(const Matrix& X, const std::vector<double>& y) {
  const std::size_t p = X.cols;
  std::vector<std::vector<Ld>> A(p, std::vector<Ld>(p + 1, 0));
  for (std::size_t i = 0; i < X.rows; ++i)
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) A[a][b] += static_cast<Ld>(X(i, a)) * X(i, b);
      A[a][p] += static_cast<Ld>(X(i, a)) * y[i];
    }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const Ld f = A[r][c] / A[c][c];
      for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
    }
  }
  std::vector<double> b(p);
  for (std::size_t c = 0; c < p; ++c) b[c] = static_cast<double>(A[c][p] / A[c][c]);
  return b;
}

Matrix random_design(Rng& rng, std::size_t n, std::size_t p) {
  Matrix X(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) X(i, j) = normal(rng) + (j ? 0.3 * X(i, j - 1) : 0.0);
  return X;
}

// Latent-factor registry: cluster c contributes sizes[c] noisy copies of one factor.
Matrix clustered(Rng& rng, std::size_t n, const std::vector<int>& sizes, double noise) {
  std::size_t p = 0;
  for (int s : sizes) p += static_cast<std::size_t>(s);
  Matrix X(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    for (int s : sizes) {
      const double f = normal(rng);
      for (int k = 0; k < s; ++k) X(i, j++) = f + normal(rng, 0.0, noise);
    }
  }
  return X;
}

}  // namespace

TEST(Spearman, MonotonePairs) {
  Matrix X(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    X(i, 0) = static_cast<double>(i);
    X(i, 1) = std::exp(static_cast<double>(i));
    X(i, 2) = -static_cast<double>(i);
  }
  const auto c = spearman_matrix(X);
  EXPECT_NEAR(c(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(c(0, 2), -1.0, 1e-15);
  EXPECT_EQ(c(1, 1), 1.0);
}

TEST(Spearman, TiesMatchMidRankOracle) {
  Rng rng = make_rng(1, "spearman");
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + uniform_index(rng, 50);
    Matrix X(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = static_cast<double>(uniform_index(rng, 5));
      X(i, 1) = static_cast<double>(uniform_index(rng, 3)) + X(i, 0);
      X(i, 2) = normal(rng);
    }
    const auto c = spearman_matrix(X);
    for (std::size_t a = 0; a < 3; ++a) {
      if (c.constant[a]) continue;
      for (std::size_t b = 0; b < 3; ++b) {
        if (c.constant[b]) continue;
        ASSERT_NEAR(c(a, b), pearson_oracle(midranks_oracle(X.column(a)), midranks_oracle(X.column(b))), 1e-12);
        ASSERT_EQ(c(a, b), c(b, a));
        ASSERT_LE(std::fabs(c(a, b)), 1.0 + 1e-15);
      }
    }
  }
}

TEST(Spearman, ConstantColumnIsMissing) {
  Matrix X(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    X(i, 0) = 2.0;
    X(i, 1) = static_cast<double>(i);
  }
  const auto c = spearman_matrix(X);
  EXPECT_TRUE(c.constant[0]);
  EXPECT_TRUE(std::isnan(c(0, 1)));
  EXPECT_TRUE(std::isnan(c(0, 0)));
  EXPECT_THROW(spearman_matrix(Matrix(2, 2)), std::invalid_argument);
}

TEST(Cluster, SingleStrongPair) {
  Rng rng = make_rng(2, "cluster-pair");
  Matrix X(500, 4);
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t j = 0; j < 4; ++j) X(i, j) = normal(rng);
    X(i, 2) = X(i, 1) + normal(rng, 0.0, 0.3);
  }
  const auto s = cluster_features(spearman_matrix(X));
  ASSERT_EQ(s.clusters.size(), 3u);
  EXPECT_EQ(s.clusters[1], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(s.representatives.size(), 3u);
  EXPECT_EQ(s.representatives[0], 0u);
  EXPECT_EQ(s.representatives[2], 3u);
}

TEST(Cluster, NoMergingBelowThreshold) {
  Rng rng = make_rng(3, "cluster-none");
  const auto X = random_design(rng, 400, 8);
  const auto s = cluster_features(spearman_matrix(X));
  EXPECT_EQ(s.clusters.size(), 8u);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(s.representatives[j], j);
}

TEST(Cluster, RecoversLatentClusterCount) {
  Rng rng = make_rng(4, "cluster-latent");
  // 45 features in 26 latent groups.
  std::vector<int> sizes(26, 1);
  const int extra[] = {5, 3, 3, 3, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  for (std::size_t k = 0; k < std::size(extra); ++k) sizes[k] = extra[k];
  const auto X = clustered(rng, 1000, sizes, 0.35);
  ASSERT_EQ(X.cols, 45u);
  const auto s = cluster_features(spearman_matrix(X));
  EXPECT_EQ(s.representatives.size(), 26u);
  std::size_t start = 0;
  for (std::size_t c = 0; c < 26; ++c) {
    std::vector<std::size_t> expected(static_cast<std::size_t>(sizes[c]));
    for (std::size_t k = 0; k < expected.size(); ++k) expected[k] = start + k;
    EXPECT_EQ(s.clusters[c], expected);
    start += expected.size();
  }
}

TEST(Cluster, CompleteLinkageGuarantee) {
  Rng rng = make_rng(5, "cluster-guarantee");
  for (int t = 0; t < 30; ++t) {
    std::vector<int> sizes;
    for (int k = 0; k < 8; ++k) sizes.push_back(1 + static_cast<int>(uniform_index(rng, 4)));
    const auto X = clustered(rng, 200, sizes, 0.3 + 0.6 * uniform01(rng));
    const auto c = spearman_matrix(X);
    const auto s = cluster_features(c, 0.7, t % 2 ? RepresentativeRule::first : RepresentativeRule::central);
    std::vector<int> owner(X.cols, -1);
    for (std::size_t k = 0; k < s.clusters.size(); ++k) {
      const auto& cl = s.clusters[k];
      ASSERT_NE(std::find(cl.begin(), cl.end(), s.representatives[k]), cl.end());
      if (t % 2) { ASSERT_EQ(s.representatives[k], cl.front()); }
      for (auto i : cl) {
        ASSERT_EQ(owner[i], -1);
        owner[i] = static_cast<int>(k);
        for (auto j : cl)
          if (i != j) { ASSERT_GT(std::fabs(c(i, j)), 0.7); }
      }
    }
    ASSERT_TRUE(std::none_of(owner.begin(), owner.end(), [](int o) { return o < 0; }));
    // No two clusters could still be merged.
    for (std::size_t a = 0; a < s.clusters.size(); ++a)
      for (std::size_t b = a + 1; b < s.clusters.size(); ++b) {
        double link = 1.0;
        for (auto i : s.clusters[a])
          for (auto j : s.clusters[b]) link = std::min(link, std::fabs(c(i, j)));
        ASSERT_LE(link, 0.7);
      }
  }
}

TEST(Cluster, CentralRepresentative) {
  CorrelationMatrix c;
  c.names = {"a", "b", "c"};
  c.constant.assign(3, false);
  c.values = {1, 0.75, 0.95, 0.75, 1, 0.8, 0.95, 0.8, 1};
  const auto s = cluster_features(c);
  ASSERT_EQ(s.clusters.size(), 1u);
  EXPECT_EQ(s.representatives[0], 2u);
  EXPECT_EQ(cluster_features(c, 0.7, RepresentativeRule::first).representatives[0], 0u);
  EXPECT_EQ(representative_rule_from_string("central"), RepresentativeRule::central);
  EXPECT_THROW(representative_rule_from_string("max"), std::invalid_argument);
}

TEST(Vif, OrthogonalColumnsGiveOne) {
  Matrix X(8, 3);
  const double h[8][3] = {{1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1}, {-1, 1, 1}, {-1, 1, -1}, {-1, -1, 1}, {-1, -1, -1}};
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = h[i][j];
  for (double v : vif(X)) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Vif, DuplicateColumnIsInfinite) {
  Rng rng = make_rng(6, "vif-dup");
  auto X = random_design(rng, 50, 3);
  for (std::size_t i = 0; i < 50; ++i) X(i, 2) = X(i, 0);
  const auto v = vif(X);
  EXPECT_TRUE(std::isinf(v[0]));
  EXPECT_TRUE(std::isinf(v[2]));
  EXPECT_TRUE(std::isfinite(v[1]));
}

TEST(Vif, MatchesAuxiliaryRegressionOracle) {
  Rng rng = make_rng(7, "vif-oracle");
  for (int t = 0; t < 20; ++t) {
    const std::size_t p = 2 + uniform_index(rng, 6);
    const auto X = random_design(rng, 60 + uniform_index(rng, 100), p);
    const auto v = vif(X);
    for (std::size_t j = 0; j < p; ++j) {
      Matrix A(X.rows, p);
      std::vector<double> t_col(X.rows);
      for (std::size_t i = 0; i < X.rows; ++i) {
        A(i, 0) = 1;
        std::size_t c = 1;
        for (std::size_t k = 0; k < p; ++k)
          if (k != j) A(i, c++) = X(i, k);
        t_col[i] = X(i, j);
      }
      const auto b = normal_equations(A, t_col);
      Ld mean = 0, sse = 0, sst = 0;
      for (double x : t_col) mean += x;
      mean /= t_col.size();
      for (std::size_t i = 0; i < X.rows; ++i) {
        Ld fit = 0;
        for (std::size_t k = 0; k < p; ++k) fit += static_cast<Ld>(b[k]) * A(i, k);
        sse += (t_col[i] - fit) * (t_col[i] - fit);
        sst += (t_col[i] - mean) * (t_col[i] - mean);
      }
      ASSERT_NEAR(v[j], static_cast<double>(sst / sse), 1e-6);
    }
  }
}

TEST(Ols, ExactFitAndInterceptLaw) {
  Rng rng = make_rng(8, "ols-exact");
  const auto X = with_intercept(random_design(rng, 40, 3));
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 1.5 + 2 * X(i, 1) - 0.5 * X(i, 2) + 0.25 * X(i, 3);
  const auto f = ols(X, y);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  for (double r : f.residuals) EXPECT_NEAR(r, 0.0, 1e-10);
  EXPECT_NEAR(f.coefficients[1], 2.0, 1e-10);

  Matrix ones(5, 1, 1.0);
  const auto m = ols(ones, std::vector<double>{1, 2, 3, 4, 10});
  EXPECT_NEAR(m.coefficients[0], 4.0, 1e-12);
}

TEST(Ols, MatchesNormalEquationsAndOrthogonality) {
  Rng rng = make_rng(9, "ols-oracle");
  for (int t = 0; t < 50; ++t) {
    const std::size_t p = 1 + uniform_index(rng, 8);
    const auto X = with_intercept(random_design(rng, 30 + uniform_index(rng, 200), p));
    std::vector<double> y(X.rows);
    for (auto& v : y) v = normal(rng, 1.0, 2.0);
    const auto f = ols(X, y);
    const auto b = normal_equations(X, y);
    for (std::size_t j = 0; j < X.cols; ++j) ASSERT_NEAR(f.coefficients[j], b[j], 1e-8);
    for (std::size_t j = 0; j < X.cols; ++j) {
      double dot = 0;
      for (std::size_t i = 0; i < X.rows; ++i) dot += X(i, j) * f.residuals[i];
      ASSERT_NEAR(dot, 0.0, 1e-8);
    }
    // Refitting on the fitted values reproduces the coefficients.
    std::vector<double> fitted(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) fitted[i] = y[i] - f.residuals[i];
    const auto g = ols(X, fitted);
    for (std::size_t j = 0; j < X.cols; ++j) ASSERT_NEAR(g.coefficients[j], f.coefficients[j], 1e-8);
  }
}

TEST(Ols, StandardErrorsMatchClassicalFormula) {
  Rng rng = make_rng(10, "ols-se");
  const auto X = with_intercept(random_design(rng, 80, 2));
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = X(i, 1) + normal(rng);
  const auto f = ols(X, y);
  // Slope SE in the single-regressor special case is checked on a reduced design.
  Matrix S(80, 2);
  for (std::size_t i = 0; i < 80; ++i) {
    S(i, 0) = 1;
    S(i, 1) = X(i, 1);
  }
  const auto g = ols(S, y);
  Ld mx = 0;
  for (std::size_t i = 0; i < 80; ++i) mx += S(i, 1);
  mx /= 80;
  Ld sxx = 0, sse = 0;
  for (std::size_t i = 0; i < 80; ++i) {
    sxx += (S(i, 1) - mx) * (S(i, 1) - mx);
    sse += static_cast<Ld>(g.residuals[i]) * g.residuals[i];
  }
  EXPECT_NEAR(g.std_errors[1], static_cast<double>(std::sqrt(sse / 78 / sxx)), 1e-10);
  EXPECT_EQ(f.std_errors.size(), 3u);
}

TEST(Ols, RankDeficiencyNamesColumns) {
  Rng rng = make_rng(11, "ols-rank");
  auto X = with_intercept(random_design(rng, 30, 3));
  for (std::size_t i = 0; i < 30; ++i) X(i, 3) = 2 * X(i, 1) - X(i, 2);
  try {
    ols(X, std::vector<double>(30, 1.0), {"intercept", "a", "b", "c"});
    FAIL();
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.columns().size(), 1u);
    EXPECT_NE(std::string(e.what()).find("dependent columns"), std::string::npos);
  }
  EXPECT_THROW(ols(Matrix(3, 3, 1.0), std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(Bootstrap, ZeroWidthCollapsesToSingleOls) {
  Rng rng = make_rng(12, "boot-zero");
  const auto X = with_intercept(random_design(rng, 100, 3));
  std::vector<double> y(100), yh(100);
  for (std::size_t i = 0; i < 100; ++i) {
    yh[i] = normal(rng);
    y[i] = yh[i] + 0.3 * X(i, 2) + normal(rng, 0.0, 0.5);
  }
  const std::vector<double> pool{0.4, 0.0, -0.2, 0.0, 1.1};
  const auto rep = bootstrap_regress(X, y, yh, pool, 0.0, {200}, 5);
  std::vector<double> diff(100);
  for (std::size_t i = 0; i < 100; ++i) diff[i] = y[i] - yh[i];
  const auto f = ols(X, diff);
  for (std::size_t j = 0; j < X.cols; ++j) {
    EXPECT_EQ(rep.coefficients[j].lower, rep.coefficients[j].upper);
    EXPECT_NEAR(rep.coefficients[j].median, f.coefficients[j], 1e-12);
    for (double v : rep.draws[j]) EXPECT_EQ(v, rep.draws[j][0]);
  }
  EXPECT_EQ(rep.pool_size, 2u);
}

TEST(Bootstrap, ErrorsAndDeterminism) {
  Rng rng = make_rng(13, "boot-det");
  const auto X = with_intercept(random_design(rng, 150, 4));
  std::vector<double> y(150), yh(150), pool(300);
  for (std::size_t i = 0; i < 150; ++i) {
    yh[i] = normal(rng);
    y[i] = yh[i] - 0.2 + 0.1 * X(i, 1) + normal(rng, 0.0, 0.4);
  }
  for (auto& r : pool) r = normal(rng, 0.0, 0.4);
  EXPECT_THROW(bootstrap_regress(X, y, yh, std::vector<double>{1.0, -2.0}, 0.5, {10}, 1), std::invalid_argument);
  EXPECT_THROW(bootstrap_regress(X, y, yh, pool, -1.0, {10}, 1), std::invalid_argument);
  const auto a = bootstrap_regress(X, y, yh, pool, 0.8, {1000}, 21);
  const auto b = bootstrap_regress(X, y, yh, pool, 0.8, {1000}, 21);
  const auto c = bootstrap_regress(X, y, yh, pool, 0.8, {1000}, 22);
  EXPECT_EQ(a.draws, b.draws);
  for (std::size_t j = 0; j < X.cols; ++j) {
    const auto& s = a.coefficients[j];
    EXPECT_LE(s.lower, s.median);
    EXPECT_LE(s.median, s.upper);
    EXPECT_EQ(s.significant, s.lower > 0 || s.upper < 0);
    const double sd = stats::sample_sd(a.draws[j]);
    EXPECT_LT(std::fabs(s.median - c.coefficients[j].median), 2 * sd) << j;
    const auto [lo95, hi95] = a.interval(j, 0.95);
    const auto [lo99, hi99] = a.interval(j, 0.99);
    EXPECT_DOUBLE_EQ(lo95, s.lower);
    EXPECT_DOUBLE_EQ(hi95, s.upper);
    EXPECT_LE(lo99, lo95);
    EXPECT_GE(hi99, hi95);
  }
  for (const auto& r : a.draws) EXPECT_EQ(r.size(), 1000u);
}

TEST(Bootstrap, SharedNoiseShiftsOnlyIntercept) {
  Rng rng = make_rng(14, "boot-shared");
  const auto X = with_intercept(random_design(rng, 80, 2));
  std::vector<double> y(80), yh(80, 0.0);
  for (auto& v : y) v = normal(rng);
  const std::vector<double> pool{-0.3, 0.1, 0.2};
  BootstrapOptions opt{100, 0.95, true};
  const auto rep = bootstrap_regress(X, y, yh, pool, 1.0, opt, 3);
  for (std::size_t j = 1; j < X.cols; ++j)
    EXPECT_NEAR(rep.coefficients[j].upper - rep.coefficients[j].lower, 0.0, 1e-12);
  EXPECT_GT(rep.coefficients[0].upper - rep.coefficients[0].lower, 0.1);
}

TEST(Consistency, FlagsAndMissingMonths) {
  auto rep = [](double med, bool sig) {
    BootstrapReport r;
    r.coefficients.push_back({"f", med, med - 1, med + 1, sig});
    return r;
  };
  std::map<int, BootstrapReport> all_pos;
  for (int m = 1; m <= 6; ++m) all_pos[m] = rep(0.5, true);
  const auto t = multi_month_report(all_pos, {1, 2, 3, 4, 5, 6}, "productivity");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].flag, "stable+");

  std::map<int, BootstrapReport> flip{{1, rep(0.5, true)}, {2, rep(0.1, false)}, {3, rep(-0.4, true)}};
  EXPECT_EQ(multi_month_report(flip, {1, 2, 3}).rows[0].flag, "sign-change");

  std::map<int, BootstrapReport> gap{{1, rep(-0.5, true)}, {3, rep(-0.2, true)}};
  const auto g = multi_month_report(gap, {1, 2, 3});
  EXPECT_FALSE(g.rows[0].medians[1].has_value());
  EXPECT_EQ(*g.rows[0].medians[2], -0.2);
  EXPECT_EQ(g.rows[0].flag, "stable-");

  std::map<int, BootstrapReport> some{{1, rep(0.5, true)}, {2, rep(0.5, false)}};
  EXPECT_EQ(multi_month_report(some, {1, 2}).rows[0].flag, "partial+");
  std::map<int, BootstrapReport> none{{1, rep(0.5, false)}};
  EXPECT_EQ(multi_month_report(none, {1}).rows[0].flag, "none");
}
