#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "teamshock/matrix.hpp"
#include "teamshock/random.hpp"
#include "teamshock/tree.hpp"

namespace teamshock {

struct GbdtParams {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 5;
  SplitMode mode = SplitMode::exact;
};

struct GbdtModel {
  double initial = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return initial + learning_rate * s;
  }
};

struct GbdtFit {
  GbdtModel model;
  std::vector<double> train_mse;  // entry s = training MSE after s stages
};

inline GbdtFit fit_gbdt_traced(const Matrix& X, std::span<const double> y, const GbdtParams& p) {
  if (p.n_trees < 0) throw std::invalid_argument("gbdt: n_trees must be >= 0");
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) throw std::invalid_argument("gbdt: learning_rate must be in (0, 1]");
  if (X.rows == 0 || y.size() != X.rows) throw std::invalid_argument("gbdt: X rows and y length differ");
  GbdtFit fit;
  auto& m = fit.model;
  m.learning_rate = p.learning_rate;
  m.initial = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const TreeData data(X, p.mode);
  std::vector<std::uint32_t> all(X.rows);
  std::iota(all.begin(), all.end(), 0u);
  std::vector<double> f(X.rows, m.initial), r(X.rows);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
    return s / static_cast<double>(X.rows);
  };
  fit.train_mse.push_back(mse());
  const TreeParams tp{p.max_depth, p.min_samples_leaf, 0, p.mode, 256};
  m.trees.reserve(static_cast<std::size_t>(p.n_trees));
  for (int s = 0; s < p.n_trees; ++s) {
    for (std::size_t i = 0; i < X.rows; ++i) r[i] = y[i] - f[i];
    m.trees.push_back(fit_tree(data, r, all, tp));
    const auto& t = m.trees.back();
    for (std::size_t i = 0; i < X.rows; ++i) f[i] += p.learning_rate * t.predict(X.row(i));
    fit.train_mse.push_back(mse());
  }
  return fit;
}

inline GbdtModel fit_gbdt(const Matrix& X, std::span<const double> y, const GbdtParams& p) {
  return fit_gbdt_traced(X, y, p).model;
}

struct RfParams {
  int n_trees = 200;
  int max_depth = -1;  // negative: unlimited
  int min_samples_leaf = 5;
  int max_features = 0;  // 0 = all features, -1 = floor(sqrt(p))
  bool bootstrap = true;
  SplitMode mode = SplitMode::exact;
};

struct RfModel {
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }
};

inline int resolve_max_features(int requested, std::size_t p) {
  if (requested == -1) return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
  if (requested < -1) throw std::invalid_argument("rf: max_features must be >= -1");
  return requested;
}

inline RfModel fit_rf(const Matrix& X, std::span<const double> y, const RfParams& p, std::uint64_t seed) {
  if (p.n_trees < 1) throw std::invalid_argument("rf: n_trees must be >= 1");
  if (X.rows == 0 || y.size() != X.rows) throw std::invalid_argument("rf: X rows and y length differ");
  const TreeData data(X, p.mode);
  const TreeParams tp{p.max_depth, p.min_samples_leaf, resolve_max_features(p.max_features, X.cols), p.mode, 256};
  RfModel m;
  std::vector<std::uint32_t> sample(X.rows);
  for (int t = 0; t < p.n_trees; ++t) {
    Rng rng = make_rng(seed, "rf-tree", static_cast<std::uint64_t>(t));
    if (p.bootstrap) {
      for (auto& s : sample) s = static_cast<std::uint32_t>(uniform_index(rng, X.rows));
    } else {
      std::iota(sample.begin(), sample.end(), 0u);
    }
    m.trees.push_back(fit_tree(data, y, sample, tp, &rng));
  }
  return m;
}

}  // namespace teamshock
