#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "rentpas/evaluation.hpp"
#include "rentpas/features.hpp"
#include "rentpas/synth.hpp"

using namespace rentpas;

namespace {

DesignMatrix synthetic_design(std::uint64_t seed, std::size_t n) {
  const auto fx = synthesize_fixture(seed, n);
  return transform(fit_schema(fx.listings), fx.listings);
}

RegressorSpec gbt(std::map<std::string, double> p) { return {RegressorKind::Gbt, std::move(p)}; }

}  // namespace

TEST(Metrics, PerfectPrediction) {
  const std::vector<double> y{1, 2, 5};
  const auto m = metrics(y, y);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(*m.r2, 1.0);
}

TEST(Metrics, MeanPredictorHasZeroR2) {
  const std::vector<double> y{1, 2, 6}, p{3, 3, 3};
  EXPECT_DOUBLE_EQ(*metrics(y, p).r2, 0.0);
}

TEST(Metrics, HandExample) {
  const std::vector<double> y{1, 2, 3}, p{1, 2, 4};
  const auto m = metrics(y, p);
  EXPECT_DOUBLE_EQ(m.mae, 1.0 / 3);
  EXPECT_DOUBLE_EQ(m.mse, 1.0 / 3);
  EXPECT_DOUBLE_EQ(*m.r2, 0.5);
  EXPECT_EQ(m.n, 3u);
}

TEST(Metrics, Errors) {
  const std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(metrics(a, b), Error);
  const std::vector<double> c{4, 4}, d{4, 5};
  try {
    metrics(c, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVarianceTruth);
  }
  const auto lenient = metrics_lenient(c, d);
  EXPECT_FALSE(lenient.r2.has_value());
  EXPECT_DOUBLE_EQ(lenient.mse, 0.5);
}

TEST(Metrics, IdentitiesOnRandomData) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> y(20), p(20);
    for (auto& v : y) v = g(rng);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = y[i] + 0.3 * g(rng);
    const auto m = metrics(y, p);
    EXPECT_NEAR(m.rmse * m.rmse, m.mse, 1e-9 * m.mse);
    double mean = 0, ss = 0;
    for (double v : y) mean += v;
    mean /= 20;
    for (double v : y) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(*m.r2, 1.0 - m.mse * 20 / ss, 1e-12);
    EXPECT_LE(*m.r2, 1.0);
  }
}

TEST(Split, EightyTwenty) {
  const auto plan = train_test_split(8273, 1);
  EXPECT_EQ(plan.test.size(), 1655u);
  EXPECT_EQ(plan.train.size(), 8273u - 1655u);
  std::set<std::size_t> all(plan.train.begin(), plan.train.end());
  all.insert(plan.test.begin(), plan.test.end());
  EXPECT_EQ(all.size(), 8273u);
  EXPECT_EQ(train_test_split(8273, 1).test, plan.test);
  EXPECT_NE(train_test_split(8273, 2).test, plan.test);
}

TEST(KFold, PaperTrainSize) {
  const auto folds = kfold_split(6618, 10, 42);
  ASSERT_EQ(folds.size(), 10u);
  for (std::size_t f = 0; f < 8; ++f) EXPECT_EQ(folds[f].size(), 662u);
  EXPECT_EQ(folds[8].size(), 661u);
  EXPECT_EQ(folds[9].size(), 661u);
}

TEST(KFold, LeaveOneOutAndDeterminism) {
  const auto folds = kfold_split(10, 10, 5);
  for (const auto& f : folds) EXPECT_EQ(f.size(), 1u);
  EXPECT_EQ(kfold_split(10, 10, 5), folds);
}

TEST(KFold, BadK) {
  EXPECT_THROW(kfold_split(10, 1, 0), Error);
  EXPECT_THROW(kfold_split(3, 4, 0), Error);
}

TEST(KFold, PartitionProperty) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 300)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, n)(rng);
    const auto folds = kfold_split(n, k, rng());
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (auto i : f) ++seen[i];
    }
    EXPECT_LE(hi - lo, 1u);
    for (int s : seen) ASSERT_EQ(s, 1);
  }
}

TEST(CrossValidate, ConstantTargetWarns) {
  Matrix x(20, 1);
  for (std::size_t i = 0; i < 20; ++i) x(i, 0) = static_cast<double>(i);
  const std::vector<double> y(20, 3.0);
  const auto r = cross_validate(gbt({{"rounds", 5}}), x, y, 4, 0);
  EXPECT_FALSE(r.mean.r2.has_value());
  bool degenerate = false, zero_var = false;
  for (const auto& w : r.warnings) {
    degenerate |= w.rfind("DegenerateTarget", 0) == 0;
    zero_var |= w.rfind("ZeroVarianceTruth", 0) == 0;
  }
  EXPECT_TRUE(degenerate);
  EXPECT_TRUE(zero_var);
}

TEST(CrossValidate, FoldSizesSumToRows) {
  std::mt19937_64 rng(2);
  const auto ds = oracle::random_dataset(rng, 57, 3);
  for (std::size_t k : {2u, 10u}) {
    const auto r = cross_validate({RegressorKind::Ridge, {}}, ds.x, ds.y, k, 9);
    std::size_t total = 0;
    for (const auto& f : r.folds) total += f.metrics.n;
    EXPECT_EQ(r.folds.size(), k);
    EXPECT_EQ(total, 57u);
  }
}

TEST(CrossValidate, GbtBeatsRidgeOnSyntheticFixture) {
  const auto dm = synthetic_design(7, 2000);
  const auto g = cross_validate(gbt({{"rounds", 200}, {"max_depth", 4}, {"learning_rate", 0.1}}), dm.values, dm.target, 10, 7);
  const auto r = cross_validate({RegressorKind::Ridge, {{"alpha", 1.0}}}, dm.values, dm.target, 10, 7);
  EXPECT_GT(*g.mean.r2, *r.mean.r2);
}

TEST(GridSearch, SingleAndEmpty) {
  std::mt19937_64 rng(4);
  const auto ds = oracle::random_dataset(rng, 40, 2);
  const std::vector<RegressorSpec> one{{RegressorKind::Ridge, {{"alpha", 2.0}}}};
  EXPECT_EQ(grid_search(one, ds.x, ds.y, 5, 0).best, one[0]);
  EXPECT_THROW(grid_search({}, ds.x, ds.y, 5, 0), Error);
}

TEST(GridSearch, DuplicateSpecsFirstWins) {
  std::mt19937_64 rng(4);
  const auto ds = oracle::random_dataset(rng, 40, 2);
  const RegressorSpec s{RegressorKind::Knn, {{"k", 3}}};
  const auto r = grid_search({s, s, s}, ds.x, ds.y, 5, 1);
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.leaderboard.size(), 3u);
}

TEST(GridSearch, MatchedSpecBeatsDepthZero) {
  const auto dm = synthetic_design(7, 1000);
  const std::vector<RegressorSpec> grid{gbt({{"rounds", 50}, {"max_depth", 0}}),
                                        gbt({{"rounds", 200}, {"max_depth", 4}, {"learning_rate", 0.1}})};
  const auto r = grid_search(grid, dm.values, dm.target, 5, 3);
  EXPECT_EQ(r.best_index, 1u);
  EXPECT_LE(*r.leaderboard[0].cv.mean.r2, 0.0);
}

TEST(GridSearch, Reproducible) {
  std::mt19937_64 rng(8);
  const auto ds = oracle::random_dataset(rng, 60, 3);
  const std::vector<RegressorSpec> grid{gbt({{"rounds", 10}, {"subsample", 0.8}}), gbt({{"rounds", 20}, {"max_depth", 2}})};
  const auto a = grid_search(grid, ds.x, ds.y, 4, 5);
  const auto b = grid_search(grid, ds.x, ds.y, 4, 5);
  EXPECT_EQ(nlohmann::json(a.leaderboard).dump(), nlohmann::json(b.leaderboard).dump());
}

TEST(GridSearch, RankingRules) {
  LeaderboardEntry a{0, {}}, b{1, {}}, c{2, {}};
  a.cv.mean.r2 = 0.8;
  a.cv.mean.rmse = 0.3;
  b.cv.mean.r2 = 0.8;
  b.cv.mean.rmse = 0.2;
  c.cv.mean.r2 = 0.9;
  c.cv.mean.rmse = 0.5;
  const auto r = ranked({a, b, c});
  EXPECT_EQ(r[0].grid_index, 2u);
  EXPECT_EQ(r[1].grid_index, 1u);
  EXPECT_EQ(r[2].grid_index, 0u);
}

TEST(DefaultGrid, Shape) {
  const auto grid = default_gbt_grid();
  EXPECT_EQ(grid.size(), 32u);
  for (const auto& s : grid) EXPECT_NO_THROW(s.validate());
}

TEST(CompareModels, PerfectLinearRidge) {
  Matrix x(200, 2);
  std::vector<double> y(200);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < 200; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
    y[i] = 1.0 + 2.0 * x(i, 0) - 0.5 * x(i, 1);
  }
  const auto split = train_test_split(200, 0);
  const auto rows = compare_models(x, y, split, {{RegressorKind::Ridge, {{"alpha", 0.0}}}, {RegressorKind::Knn, {{"k", 5}}}}, 0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].spec.kind, RegressorKind::Ridge);
  EXPECT_NEAR(*rows[0].holdout.r2, 1.0, 1e-12);
  EXPECT_GE(*rows[0].holdout.r2, *rows[1].holdout.r2);
  const auto table = format_comparison_table(rows);
  EXPECT_NE(table.find("Ridge"), std::string::npos);
  EXPECT_NE(table.find("KNN"), std::string::npos);
}

TEST(EvaluationJson, RoundTrip) {
  std::mt19937_64 rng(6);
  const auto ds = oracle::random_dataset(rng, 30, 2);
  const auto r = cross_validate({RegressorKind::Ridge, {}}, ds.x, ds.y, 3, 0);
  const nlohmann::json j = r;
  const auto back = j.get<MetricsReport>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}
