#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamshock/ensemble.hpp"
#include "teamshock/matrix.hpp"
#include "teamshock/random.hpp"

namespace teamshock {

enum class ModelKind { gbdt, rf };

inline std::string to_string(ModelKind k) { return k == ModelKind::gbdt ? "gbdt" : "rf"; }

inline ModelKind model_kind_from_string(std::string_view s) {
  if (s == "gbdt") return ModelKind::gbdt;
  if (s == "rf") return ModelKind::rf;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::gbdt;
  GbdtParams gbdt;
  RfParams rf;

  std::string label() const {
    if (kind == ModelKind::gbdt)
      return "gbdt(trees=" + std::to_string(gbdt.n_trees) + ",lr=" + csv_free_number(gbdt.learning_rate) +
             ",depth=" + std::to_string(gbdt.max_depth) + ",leaf=" + std::to_string(gbdt.min_samples_leaf) + ")";
    return "rf(trees=" + std::to_string(rf.n_trees) + ",depth=" + std::to_string(rf.max_depth) +
           ",leaf=" + std::to_string(rf.min_samples_leaf) + ",features=" + std::to_string(rf.max_features) + ")";
  }

 private:
  static std::string csv_free_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }
};

/// A fitted counterfactual predictor bound to its input column names.
struct Regressor {
  ModelKind kind = ModelKind::gbdt;
  std::vector<std::string> features;
  GbdtModel gbdt;
  RfModel rf;

  double predict(std::span<const double> x) const {
    if (x.size() != features.size()) throw std::invalid_argument("predict: row width does not match model inputs");
    return kind == ModelKind::gbdt ? gbdt.predict(x) : rf.predict(x);
  }

  std::vector<double> predict(const Matrix& X) const {
    if (X.cols != features.size()) throw std::invalid_argument("predict: column count does not match model inputs");
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
    return out;
  }

  std::vector<double> predict(const Matrix& X, std::span<const std::string> columns) const {
    if (columns.size() != features.size() || !std::equal(columns.begin(), columns.end(), features.begin()))
      throw std::invalid_argument("predict: input columns do not match the model's feature order");
    return predict(X);
  }
};

inline Regressor fit_model(const ModelSpec& spec, const Matrix& X, std::span<const double> y, std::uint64_t seed,
                           std::vector<std::string> features = {}) {
  Regressor r;
  r.kind = spec.kind;
  if (features.empty())
    for (std::size_t j = 0; j < X.cols; ++j) features.push_back("x" + std::to_string(j));
  if (features.size() != X.cols) throw std::invalid_argument("fit_model: feature names do not match columns");
  r.features = std::move(features);
  if (spec.kind == ModelKind::gbdt) r.gbdt = fit_gbdt(X, y, spec.gbdt);
  else r.rf = fit_rf(X, y, spec.rf, seed);
  return r;
}

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; the first round(n * test_fraction) shuffled rows form the test set.
inline TrainTestSplit train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("split: test fraction must be in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, "train-test-split");
  shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  TrainTestSplit s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Fold of each row: seeded shuffle, then position mod k.
inline std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || n < static_cast<std::size_t>(k)) throw std::invalid_argument("kfold: need 2 <= k <= n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, "kfold");
  shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[idx[p]] = static_cast<int>(p % static_cast<std::size_t>(k));
  return fold;
}

inline double mse(std::span<const double> pred, std::span<const double> y) {
  if (pred.size() != y.size() || y.empty()) throw std::invalid_argument("mse: length mismatch or empty");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
  return s / static_cast<double>(y.size());
}

struct TuneResult {
  std::size_t best = 0;
  std::vector<double> cv_mse;  // per grid entry
  std::vector<std::vector<double>> fold_mse;
};

/// Exhaustive grid search by mean validation MSE; earliest entry wins ties.
inline TuneResult kfold_tune(const Matrix& X, std::span<const double> y, std::span<const ModelSpec> grid, int k,
                             std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("kfold_tune: empty grid");
  if (y.size() != X.rows) throw std::invalid_argument("kfold_tune: X rows and y length differ");
  const auto fold = fold_assignment(X.rows, k, seed);
  TuneResult res;
  res.cv_mse.assign(grid.size(), 0.0);
  res.fold_mse.assign(grid.size(), std::vector<double>(static_cast<std::size_t>(k)));
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < X.rows; ++i) (fold[i] == f ? va : tr).push_back(i);
    const Matrix Xtr = X.select_rows(tr), Xva = X.select_rows(va);
    const auto ytr = select(y, tr), yva = select(y, va);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto m = fit_model(grid[g], Xtr, ytr, derive_seed(seed, "kfold-fit", g, static_cast<std::uint64_t>(f)));
      const double e = mse(m.predict(Xva), yva);
      res.fold_mse[g][static_cast<std::size_t>(f)] = e;
      res.cv_mse[g] += e / k;
    }
  }
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (res.cv_mse[g] < res.cv_mse[res.best]) res.best = g;
  return res;
}

struct EvalReport {
  std::string model;
  std::string outcome;
  int month = 0;
  std::optional<double> r2;  // empty when the test targets are constant
  double mse = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;
};

inline EvalReport evaluate(std::span<const double> pred, std::span<const double> y) {
  EvalReport r;
  r.mse = mse(pred, y);
  r.n = y.size();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  if (sst > 0.0) r.r2 = 1.0 - r.mse * static_cast<double>(y.size()) / sst;
  return r;
}

inline EvalReport evaluate(const Regressor& m, const Matrix& X, std::span<const double> y) {
  if (X.rows != y.size()) throw std::invalid_argument("evaluate: X rows and y length differ");
  return evaluate(m.predict(X), y);
}

/// Same repo, same month, previous year.
inline std::optional<double> seasonal_naive_predict(std::optional<double> prior_year_outcome) {
  return prior_year_outcome;
}

/// Baseline evaluation; rows without a prior-year value are excluded and counted.
inline EvalReport evaluate_seasonal_naive(std::span<const std::optional<double>> prior, std::span<const double> y) {
  if (prior.size() != y.size()) throw std::invalid_argument("seasonal naive: length mismatch");
  std::vector<double> p, t;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (auto v = seasonal_naive_predict(prior[i])) {
      p.push_back(*v);
      t.push_back(y[i]);
    } else {
      ++excluded;
    }
  }
  if (t.empty()) throw std::invalid_argument("seasonal naive: no rows with a prior-year value");
  auto r = evaluate(p, t);
  r.model = "seasonal_naive";
  r.excluded = excluded;
  return r;
}

inline std::vector<ModelSpec> default_gbdt_grid() {
  std::vector<ModelSpec> g;
  for (int trees : {100, 300})
    for (double lr : {0.05, 0.1})
      for (int depth : {3, 5, 7})
        for (int leaf : {5, 20}) {
          ModelSpec s;
          s.kind = ModelKind::gbdt;
          s.gbdt = {trees, lr, depth, leaf, SplitMode::exact};
          g.push_back(s);
        }
  return g;
}

inline std::vector<ModelSpec> default_rf_grid() {
  std::vector<ModelSpec> g;
  for (int depth : {-1, 10})
    for (int features : {0, -1}) {
      ModelSpec s;
      s.kind = ModelKind::rf;
      s.rf = {200, depth, 5, features, true, SplitMode::exact};
      g.push_back(s);
    }
  return g;
}

}  // namespace teamshock
