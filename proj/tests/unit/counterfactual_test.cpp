#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "teamshock/model_io.hpp"
#include "teamshock/model_selection.hpp"

using namespace teamshock;

namespace {

struct Data {
  Matrix X;
  std::vector<double> y;
};

// y = 2 x0 - x1^2 + 0.5 [x2 > 0] + noise, x3 irrelevant.
Data synthetic(std::size_t n, std::uint64_t seed, double noise = 0.3) {
  Rng rng = make_rng(seed, "cf-data");
  Data d{Matrix(n, 4), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 4; ++j) d.X(i, j) = normal(rng);
    d.y[i] = 2 * d.X(i, 0) - d.X(i, 1) * d.X(i, 1) + (d.X(i, 2) > 0 ? 0.5 : 0.0) + normal(rng, 0.0, noise);
  }
  return d;
}

double r2_oracle(const std::vector<double>& p, const std::vector<double>& y) {
  long double m = 0;
  for (double v : y) m += v;
  m /= y.size();
  long double sse = 0, sst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - p[i]) * (y[i] - p[i]);
    sst += (y[i] - m) * (y[i] - m);
  }
  return static_cast<double>(1 - sse / sst);
}

}  // namespace

TEST(Tree, ConstantTargetGivesSingleLeaf) {
  const auto d = synthetic(50, 1);
  const std::vector<double> y(50, 3.5);
  const auto t = fit_tree(d.X, y, {-1, 1, 0});
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.depth(), 0);
  EXPECT_EQ(t.predict(d.X.row(7)), 3.5);
}

TEST(Tree, RecoversStepThreshold) {
  Matrix X(40, 1);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    X(i, 0) = static_cast<double>(i);
    y[i] = i < 17 ? -1.0 : 4.0;
  }
  const auto t = fit_tree(X, y, {3, 1, 0});
  ASSERT_EQ(t.nodes().size(), 3u);
  EXPECT_EQ(t.nodes()[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes()[0].threshold, 16.5);
  std::vector<double> p(40);
  for (std::size_t i = 0; i < 40; ++i) p[i] = t.predict(X.row(i));
  EXPECT_EQ(mse(p, y), 0.0);
}

TEST(Tree, MinLeafEqualToNGivesMean) {
  const auto d = synthetic(30, 2);
  const auto t = fit_tree(d.X, d.y, {-1, 30, 0});
  EXPECT_EQ(t.leaf_count(), 1u);
  EXPECT_NEAR(t.predict(d.X.row(0)), std::accumulate(d.y.begin(), d.y.end(), 0.0) / 30, 1e-12);
}

TEST(Tree, StructuralInvariants) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = synthetic(200, 100 + s);
    const int depth = static_cast<int>(s % 6);
    const int leaf = 1 + static_cast<int>(s % 7);
    const auto t = fit_tree(d.X, d.y, {depth, leaf, 0});
    EXPECT_LE(t.depth(), depth);
    const auto& nodes = t.nodes();
    std::vector<int> parents(nodes.size(), 0);
    for (const auto& n : nodes) {
      if (n.feature < 0) {
        EXPECT_TRUE(std::isfinite(n.value));
        continue;
      }
      ASSERT_GT(n.left, 0);
      ASSERT_GT(n.right, 0);
      ++parents[static_cast<std::size_t>(n.left)];
      ++parents[static_cast<std::size_t>(n.right)];
    }
    for (std::size_t k = 1; k < nodes.size(); ++k) EXPECT_EQ(parents[k], 1);
    // Each leaf holds at least min_samples_leaf training rows and predicts their mean.
    std::map<const TreeNode*, std::vector<double>> members;
    for (std::size_t i = 0; i < d.X.rows; ++i) {
      int k = 0;
      while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        k = d.X(i, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right;
      }
      members[&nodes[static_cast<std::size_t>(k)]].push_back(d.y[i]);
    }
    for (const auto& [leaf_node, ys] : members) {
      EXPECT_GE(static_cast<int>(ys.size()), leaf);
      EXPECT_NEAR(leaf_node->value, std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size()), 1e-9);
    }
  }
}

TEST(Tree, TiesPreferLowestFeature) {
  Matrix X(20, 3);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    X(i, 0) = static_cast<double>(i % 5);
    X(i, 1) = static_cast<double>(i);
    X(i, 2) = static_cast<double>(i);
    y[i] = i < 10 ? 0.0 : 1.0;
  }
  const auto t = fit_tree(X, y, {1, 1, 0});
  EXPECT_EQ(t.nodes()[0].feature, 1);
}

TEST(Tree, HistogramModeMatchesExactOnFewDistinctValues) {
  Rng rng = make_rng(3, "hist");
  Matrix X(300, 3);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = static_cast<double>(uniform_index(rng, 12));
    y[i] = X(i, 0) * 0.5 - X(i, 2) + normal(rng, 0.0, 0.1);
  }
  const auto a = fit_tree(X, y, {4, 3, 0, SplitMode::exact});
  const auto b = fit_tree(X, y, {4, 3, 0, SplitMode::histogram});
  for (std::size_t i = 0; i < 300; ++i) EXPECT_NEAR(a.predict(X.row(i)), b.predict(X.row(i)), 1e-9);
}

TEST(Gbdt, SaturatedSingleTreeFitsExactly) {
  Matrix X(6, 1);
  const std::vector<double> y{1, 4, 2, 8, 5, 7};
  for (std::size_t i = 0; i < 6; ++i) X(i, 0) = static_cast<double>(i);
  const auto fit = fit_gbdt_traced(X, y, {1, 1.0, -1, 1});
  EXPECT_NEAR(fit.train_mse.back(), 0.0, 1e-24);
}

TEST(Gbdt, TrainingLossNonIncreasing) {
  const auto d = synthetic(400, 4);
  for (double lr : {0.05, 0.3, 1.0}) {
    const auto fit = fit_gbdt_traced(d.X, d.y, {200, lr, 3, 5});
    ASSERT_EQ(fit.train_mse.size(), 201u);
    for (std::size_t s = 1; s < fit.train_mse.size(); ++s)
      ASSERT_LE(fit.train_mse[s], fit.train_mse[s - 1] * (1 + 1e-12)) << "lr " << lr << " stage " << s;
  }
}

TEST(Gbdt, PredictionIsInitialPlusScaledTreeSum) {
  const auto d = synthetic(150, 5);
  const auto m = fit_gbdt(d.X, d.y, {30, 0.1, 3, 5});
  EXPECT_NEAR(m.initial, std::accumulate(d.y.begin(), d.y.end(), 0.0) / 150, 1e-12);
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0;
    for (const auto& t : m.trees) s += t.predict(d.X.row(i));
    EXPECT_NEAR(m.predict(d.X.row(i)), m.initial + 0.1 * s, 1e-12);
  }
}

TEST(Gbdt, RejectsBadParameters) {
  const auto d = synthetic(20, 6);
  EXPECT_THROW(fit_gbdt(d.X, d.y, {10, 0.0, 3, 1}), std::invalid_argument);
  EXPECT_THROW(fit_gbdt(d.X, d.y, {10, 1.5, 3, 1}), std::invalid_argument);
  EXPECT_THROW(fit_gbdt(d.X, std::vector<double>(19, 0.0), {10, 0.1, 3, 1}), std::invalid_argument);
}

TEST(Rf, SingleTreeWithoutSubsamplingEqualsTree) {
  const auto d = synthetic(120, 7);
  const auto rf = fit_rf(d.X, d.y, {1, 4, 3, 0, false}, 99);
  const auto t = fit_tree(d.X, d.y, {4, 3, 0});
  for (std::size_t i = 0; i < d.X.rows; ++i) EXPECT_EQ(rf.predict(d.X.row(i)), t.predict(d.X.row(i)));
}

TEST(Rf, ConstantTargetAnySeed) {
  const auto d = synthetic(60, 8);
  const std::vector<double> y(60, -2.25);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rf = fit_rf(d.X, y, {20, -1, 1, -1, true}, seed);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(rf.predict(d.X.row(i)), -2.25);
  }
}

TEST(Rf, PredictionWithinTreeRangeAndDeterministic) {
  const auto d = synthetic(200, 9);
  const auto a = fit_rf(d.X, d.y, {25, -1, 2, -1, true}, 5);
  const auto b = fit_rf(d.X, d.y, {25, -1, 2, -1, true}, 5);
  const auto c = fit_rf(d.X, d.y, {25, -1, 2, -1, true}, 6);
  bool differs = false;
  for (std::size_t i = 0; i < d.X.rows; ++i) {
    double lo = 1e300, hi = -1e300;
    for (const auto& t : a.trees) {
      lo = std::min(lo, t.predict(d.X.row(i)));
      hi = std::max(hi, t.predict(d.X.row(i)));
    }
    const double p = a.predict(d.X.row(i));
    EXPECT_GE(p, lo - 1e-12);
    EXPECT_LE(p, hi + 1e-12);
    EXPECT_EQ(p, b.predict(d.X.row(i)));
    differs = differs || p != c.predict(d.X.row(i));
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(resolve_max_features(-1, 39), 6);
}

TEST(ModelSelection, SplitIsDisjointAndExhaustive) {
  const auto s = train_test_split(1001, 0.2, 17);
  EXPECT_EQ(s.test.size(), 200u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 1001u);
  EXPECT_EQ(*all.rbegin(), 1000u);
  EXPECT_EQ(train_test_split(1001, 0.2, 17).test, s.test);
}

TEST(ModelSelection, FoldsPartitionIndices) {
  for (std::size_t n : {5u, 17u, 103u}) {
    const auto f = fold_assignment(n, 5, 3);
    std::vector<std::size_t> sizes(5, 0);
    for (int v : f) {
      ASSERT_GE(v, 0);
      ASSERT_LT(v, 5);
      ++sizes[static_cast<std::size_t>(v)];
    }
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
  }
  EXPECT_THROW(fold_assignment(4, 5, 1), std::invalid_argument);
}

TEST(ModelSelection, TuneSingletonAndDominance) {
  const auto d = synthetic(150, 10);
  ModelSpec weak, strong;
  weak.gbdt = {5, 0.05, 1, 20};
  strong.gbdt = {100, 0.1, 3, 5};
  const std::vector<ModelSpec> one{weak};
  EXPECT_EQ(kfold_tune(d.X, d.y, one, 5, 1).best, 0u);
  const std::vector<ModelSpec> grid{weak, strong};
  const auto r = kfold_tune(d.X, d.y, grid, 5, 1);
  for (int f = 0; f < 5; ++f) ASSERT_LT(r.fold_mse[1][static_cast<std::size_t>(f)], r.fold_mse[0][static_cast<std::size_t>(f)]);
  EXPECT_EQ(r.best, 1u);
  const std::vector<ModelSpec> same{strong, strong};
  EXPECT_EQ(kfold_tune(d.X, d.y, same, 5, 1).best, 0u);
  EXPECT_THROW(kfold_tune(d.X, d.y, std::vector<ModelSpec>{}, 5, 1), std::invalid_argument);
}

TEST(Evaluate, DefinitionsAndOracle) {
  const std::vector<double> y{1, 2, 3, 4};
  const auto perfect = evaluate(y, y);
  EXPECT_EQ(*perfect.r2, 1.0);
  EXPECT_EQ(perfect.mse, 0.0);
  EXPECT_NEAR(*evaluate(std::vector<double>(4, 2.5), y).r2, 0.0, 1e-15);
  const auto flat = evaluate(std::vector<double>{1, 1}, std::vector<double>{2, 2});
  EXPECT_FALSE(flat.r2);
  EXPECT_EQ(flat.mse, 1.0);
  Rng rng = make_rng(11, "eval-oracle");
  for (int k = 0; k < 200; ++k) {
    std::vector<double> p(20), t(20);
    for (std::size_t i = 0; i < 20; ++i) {
      t[i] = normal(rng, 3.0, 2.0);
      p[i] = t[i] + normal(rng, 0.0, 1.5);
    }
    EXPECT_NEAR(*evaluate(p, t).r2, r2_oracle(p, t), 1e-10);
    EXPECT_LE(*evaluate(p, t).r2, 1.0);
  }
}

TEST(SeasonalNaive, IdentityAndExclusion) {
  EXPECT_EQ(*seasonal_naive_predict(3.21), 3.21);
  EXPECT_FALSE(seasonal_naive_predict(std::nullopt));
  const std::vector<std::optional<double>> prior{1.0, std::nullopt, 3.0, std::nullopt};
  const std::vector<double> y{1.5, 9.0, 2.0, 9.0};
  const auto r = evaluate_seasonal_naive(prior, y);
  EXPECT_EQ(r.n, 2u);
  EXPECT_EQ(r.excluded, 2u);
  EXPECT_NEAR(r.mse, (0.25 + 1.0) / 2, 1e-15);
}

TEST(SeasonalNaive, BelowGbdtOnCrossSectionalSignal) {
  // Stable team-level signal plus independent yearly noise.
  const auto d = synthetic(600, 12, 0.0);
  Rng rng = make_rng(12, "naive-noise");
  std::vector<double> y(600);
  std::vector<std::optional<double>> prior(600);
  for (std::size_t i = 0; i < 600; ++i) {
    y[i] = d.y[i] + normal(rng, 0.0, 0.5);
    prior[i] = d.y[i] + normal(rng, 0.0, 0.5);
  }
  const auto s = train_test_split(600, 0.2, 1);
  ModelSpec spec;
  spec.gbdt = {200, 0.1, 3, 5};
  const auto m = fit_model(spec, d.X.select_rows(s.train), select<double>(y, s.train), 1);
  const auto test_y = select<double>(y, s.test);
  const auto g = evaluate(m, d.X.select_rows(s.test), test_y);
  const auto b = evaluate_seasonal_naive(select<std::optional<double>>(prior, s.test), test_y);
  EXPECT_LT(*b.r2, *g.r2);
}

TEST(Predict, LawsOfPrediction) {
  const auto d = synthetic(100, 13);
  ModelSpec spec;
  spec.gbdt = {1, 1.0, -1, 1};
  const auto exact = fit_model(spec, d.X, d.y, 1);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(exact.predict(d.X.row(i)), d.y[i], 1e-12);

  spec.gbdt = {50, 0.1, 3, 5};
  const auto m = fit_model(spec, d.X, d.y, 1, {"a", "b", "c", "d"});
  const auto batch = m.predict(d.X);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(13, "perm");
  shuffle(perm.begin(), perm.end(), rng);
  const auto permuted = m.predict(d.X.select_rows(perm));
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(batch[i], m.predict(d.X.row(i)));
    EXPECT_EQ(permuted[i], batch[perm[i]]);
    EXPECT_TRUE(std::isfinite(batch[i]));
  }
  const std::vector<std::string> cols{"a", "b", "c", "d"}, swapped{"b", "a", "c", "d"};
  EXPECT_EQ(m.predict(d.X, cols), batch);
  EXPECT_THROW(m.predict(d.X, swapped), std::invalid_argument);
  EXPECT_THROW(m.predict(Matrix(2, 3)), std::invalid_argument);
}

TEST(Predict, RfWithinFifteenPercentOfGbdt) {
  // Noise level giving R^2 near 0.7.
  const auto d = synthetic(1500, 14, 1.5);
  const auto s = train_test_split(1500, 0.2, 2);
  const auto Xtr = d.X.select_rows(s.train), Xte = d.X.select_rows(s.test);
  const auto ytr = select<double>(d.y, s.train), yte = select<double>(d.y, s.test);
  ModelSpec g, r;
  g.gbdt = {300, 0.05, 3, 5};
  r.kind = ModelKind::rf;
  r.rf = {200, -1, 5, 0, true};
  const double mg = evaluate(fit_model(g, Xtr, ytr, 3), Xte, yte).mse;
  const double mr = evaluate(fit_model(r, Xtr, ytr, 3), Xte, yte).mse;
  EXPECT_LE(std::fabs(mr - mg), 0.15 * std::max(mr, mg)) << mg << " vs " << mr;
  EXPECT_GT(*evaluate(fit_model(g, Xtr, ytr, 3), Xte, yte).r2, 0.6);
}

TEST(ModelIo, RoundTripBothKinds) {
  const auto d = synthetic(120, 15);
  for (auto kind : {ModelKind::gbdt, ModelKind::rf}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.gbdt = {20, 0.1, 3, 5};
    spec.rf = {10, 6, 3, -1, true};
    ModelFile f{fit_model(spec, d.X, d.y, 4, {"a", "b", "c", "d"}), "productivity", 3, spec.label()};
    std::stringstream buf;
    write_model(buf, f);
    const auto text = buf.str();
    const auto g = read_model(buf);
    EXPECT_EQ(g.outcome, "productivity");
    EXPECT_EQ(g.month, 3);
    EXPECT_EQ(g.spec, spec.label());
    EXPECT_EQ(g.model.features, f.model.features);
    for (std::size_t i = 0; i < d.X.rows; ++i) EXPECT_EQ(g.model.predict(d.X.row(i)), f.model.predict(d.X.row(i)));
    std::stringstream again;
    write_model(again, g);
    EXPECT_EQ(again.str(), text);
  }
}

TEST(ModelIo, RejectsMalformed) {
  for (const char* bad : {"not json", R"({"format":"other"})",
                          R"({"format":"teamshock-model","version":999,"kind":"gbdt"})",
                          R"({"format":"teamshock-model","version":1,"kind":"rf","outcome":"x","month":1,"features":["a"],"trees":[]})",
                          R"({"format":"teamshock-model","version":1,"kind":"rf","outcome":"x","month":1,"features":["a"],"trees":[{"max_depth":1,"min_samples_leaf":1,"nodes":[[3,0.5,1,2,0],[-1,0,-1,-1,1],[-1,0,-1,-1,2]]}]})",
                          R"({"format":"teamshock-model","version":1,"kind":"rf","outcome":"x","month":1,"features":["a"],"trees":[{"max_depth":1,"min_samples_leaf":1,"nodes":[[0,0.5,1,7,0],[-1,0,-1,-1,1]]}]})"}) {
    std::istringstream in(bad);
    EXPECT_THROW(read_model(in), std::runtime_error) << bad;
  }
}
