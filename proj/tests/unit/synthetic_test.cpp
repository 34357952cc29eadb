#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "teamshock/synthetic.hpp"

using namespace teamshock;

namespace {

SyntheticSpec small(double ate_p = -0.3, double ate_m = -0.2) {
  SyntheticSpec s;
  s.n_repos = 80;
  s.transient_per_month = 10;
  s.shock.ate_log_productivity = ate_p;
  s.shock.ate_log_size = ate_m;
  return s;
}

}  // namespace

TEST(Synthetic, Deterministic) {
  const auto a = generate_synthetic(small(), 11), b = generate_synthetic(small(), 11);
  std::ostringstream ea, eb;
  a.corpus.write_ndjson(ea);
  b.corpus.write_ndjson(eb);
  EXPECT_EQ(ea.str(), eb.str());
  std::ostringstream ta, tb;
  write_ground_truth(ta, a.truth);
  write_ground_truth(tb, b.truth);
  EXPECT_EQ(ta.str(), tb.str());
  std::ostringstream ec;
  generate_synthetic(small(), 12).corpus.write_ndjson(ec);
  EXPECT_NE(ea.str(), ec.str());
}

TEST(Synthetic, TruthIsTreatedMinusUntreated) {
  const auto s = generate_synthetic(small(), 3);
  ASSERT_FALSE(s.truth.empty());
  for (const auto& r : s.truth) {
    EXPECT_EQ(r.ite, r.treated - r.untreated);
    EXPECT_GE(r.untreated, 0.0);
    EXPECT_FALSE(r.month < small().shock.start);
    EXPECT_TRUE(r.outcome == "productivity" || r.outcome == "team_size");
    const double counts = std::expm1(r.treated);
    EXPECT_NEAR(counts, std::round(counts), 1e-6);
  }
}

TEST(Synthetic, ZeroShockMeansZeroEffects) {
  const auto s = generate_synthetic(small(0.0, 0.0), 5);
  ASSERT_FALSE(s.truth.empty());
  for (const auto& r : s.truth) EXPECT_EQ(r.ite, 0.0);
}

TEST(Synthetic, MonthlyMeanEffectTracksShock) {
  // Rounding carries between teams, so the per-month sum of effects misses
  // n * ate by at most one rounding step.
  const auto spec = small(-0.3, -0.2);
  const auto s = generate_synthetic(spec, 8);
  std::map<std::pair<std::string, int>, std::pair<double, int>> agg;
  for (const auto& r : s.truth) {
    auto& a = agg[{r.outcome, r.month - spec.shock.start}];
    a.first += r.ite;
    a.second += 1;
  }
  for (const auto& [key, a] : agg) {
    const auto& [outcome, since] = key;
    const bool productivity = outcome == "productivity";
    const int lag = productivity ? spec.shock.productivity_lag : spec.shock.size_lag;
    const double ate = since >= lag ? (productivity ? spec.shock.ate_log_productivity : spec.shock.ate_log_size) : 0.0;
    if (productivity || ate == 0.0) {
      EXPECT_LE(std::abs(a.first - a.second * ate), std::log(2.0)) << outcome << " +" << since;
    }
    EXPECT_GT(a.second, 30);
  }
}

TEST(Synthetic, GroundTruthRoundTrip) {
  const auto s = generate_synthetic(small(), 2);
  std::stringstream io;
  write_ground_truth(io, s.truth);
  const auto back = read_ground_truth(io);
  ASSERT_EQ(back.size(), s.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].repo_id, s.truth[i].repo_id);
    EXPECT_EQ(back[i].month, s.truth[i].month);
    EXPECT_EQ(back[i].outcome, s.truth[i].outcome);
    EXPECT_NEAR(back[i].ite, s.truth[i].ite, 1e-12);
  }
}

TEST(Synthetic, StableReposHaveTruth) {
  const auto s = generate_synthetic(small(), 4);
  std::set<std::string> with_truth;
  for (const auto& r : s.truth) with_truth.insert(r.repo_id);
  EXPECT_FALSE(s.stable_repos.empty());
  std::size_t covered = 0;
  for (const auto& id : s.stable_repos) covered += with_truth.count(id);
  EXPECT_GT(covered, 0u);
}

TEST(Synthetic, SpecValidation) {
  auto bad = small();
  bad.n_repos = 0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = small();
  bad.shock.start = bad.first;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = small();
  bad.drift_phi = 1.0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = small();
  bad.planted["nope"] = 1.0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = small();
  bad.shock.size_lag = -1;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  EXPECT_NO_THROW(validate(small()));
}
