#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rentpas/explain.hpp"

using namespace rentpas;

namespace {

RegressorSpec gbt(std::map<std::string, double> p) { return {RegressorKind::Gbt, std::move(p)}; }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Hand-built tree: split on `f` at 0.5 with leaves lo/hi and covers cl/cr.
Tree stump(int f, double lo, double hi, double cl, double cr) {
  Tree t;
  t.nodes = {{f, 0.5, 1, 2, 0.0, cl + cr}, {-1, 0, -1, -1, lo, cl}, {-1, 0, -1, -1, hi, cr}};
  return t;
}

}  // namespace

TEST(Shap, ZeroTreeModel) {
  GbtModel m;
  m.base_score = 2.5;
  m.width = 3;
  const std::vector<double> row{1, 2, 3};
  const auto a = shap_values(m, row);
  EXPECT_EQ(a.base, 2.5);
  for (double c : a.contributions) EXPECT_EQ(c, 0.0);
}

TEST(Shap, SingleSplitCoverWeighted) {
  GbtModel m;
  m.width = 3;
  m.learning_rate = 1.0;
  m.trees.push_back(stump(1, -2.0, 4.0, 3.0, 1.0));
  const std::vector<double> row{0, 1, 0};
  const auto a = shap_values(m, row);
  // expectation is (3*-2 + 1*4)/4 = -0.5; the row lands right at 4
  EXPECT_DOUBLE_EQ(a.base, -0.5);
  EXPECT_DOUBLE_EQ(a.contributions[1], 4.5);
  EXPECT_EQ(a.contributions[0], 0.0);
  EXPECT_EQ(a.contributions[2], 0.0);
  const auto bf = oracle::shapley(m, row);
  EXPECT_NEAR(bf[1], a.contributions[1], 1e-12);
}

TEST(Shap, WidthMismatch) {
  GbtModel m;
  m.width = 2;
  const std::vector<double> row{1};
  EXPECT_THROW(shap_values(m, row), Error);
}

TEST(Shap, MatchesBruteForceAndLocalAccuracy) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const auto ds = oracle::random_dataset(rng, 80, 4, t % 2 == 0);
    const auto m = gbt_fit(ds.x, ds.y, gbt({{"rounds", 8}, {"max_depth", 3}, {"learning_rate", 0.3}}), rng());
    for (std::size_t r = 0; r < 10; ++r) {
      const auto row = ds.x.row(r);
      const auto a = shap_values(m, row);
      const auto bf = oracle::shapley(m, row);
      double sum = a.base;
      for (std::size_t f = 0; f < 4; ++f) {
        EXPECT_NEAR(a.contributions[f], bf[f], 1e-9);
        sum += a.contributions[f];
      }
      EXPECT_NEAR(sum, gbt_predict(m, row), 1e-9);
    }
  }
}

TEST(Shap, RepeatedFeatureOnPath) {
  // feature 0 is split twice on the same path
  GbtModel m;
  m.width = 2;
  m.learning_rate = 0.5;
  Tree t;
  t.nodes = {{0, 0.5, 1, 2, 0, 10}, {-1, 0, -1, -1, 1.0, 4}, {0, 1.5, 3, 4, 0, 6},
             {1, 0.5, 5, 6, 0, 2},  {-1, 0, -1, -1, 5.0, 4}, {-1, 0, -1, -1, -1.0, 1},
             {-1, 0, -1, -1, 3.0, 1}};
  m.trees.push_back(t);
  for (const auto& row : std::vector<std::vector<double>>{{0, 0}, {1, 0}, {1, 1}, {2, 1}}) {
    const auto a = shap_values(m, row);
    const auto bf = oracle::shapley(m, row);
    EXPECT_NEAR(a.contributions[0], bf[0], 1e-12);
    EXPECT_NEAR(a.contributions[1], bf[1], 1e-12);
    EXPECT_NEAR(a.base + a.contributions[0] + a.contributions[1], oracle::ensemble(m, row), 1e-12);
  }
}

TEST(Shap, SymmetricMirroredTrees) {
  GbtModel m;
  m.width = 2;
  m.learning_rate = 1.0;
  m.trees.push_back(stump(0, 0.0, 2.0, 5, 5));
  m.trees.push_back(stump(1, 0.0, 2.0, 5, 5));
  const std::vector<double> row{1, 1};
  const auto a = shap_values(m, row);
  EXPECT_DOUBLE_EQ(a.contributions[0], a.contributions[1]);
}

TEST(ShapSummary, RankingAndConstantFeature) {
  std::mt19937_64 rng(5);
  const auto ds = oracle::random_dataset(rng, 200, 3);
  const auto m = gbt_fit(ds.x, ds.y, gbt({{"rounds", 30}}), 0);
  const auto s = shap_summary(m, ds.x, {"a", "b", "c"}, 3);
  ASSERT_EQ(s.features.size(), 3u);
  for (std::size_t i = 1; i < s.features.size(); ++i) EXPECT_GE(s.features[i - 1].mean_abs, s.features[i].mean_abs);
  EXPECT_EQ(s.rows_used, 200u);
  EXPECT_EQ(shap_summary(m, ds.x, {"a", "b", "c"}, 1).features.size(), 1u);

  Matrix c(30, 1);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    c(i, 0) = 1.0;
    y[i] = static_cast<double>(i);
  }
  const auto mc = gbt_fit(c, y, gbt({{"rounds", 5}}), 0);
  const auto sc = shap_summary(mc, c, {"k"}, 5);
  EXPECT_EQ(sc.features[0].mean_abs, 0.0);
  EXPECT_EQ(sc.features[0].mean_signed, 0.0);
  EXPECT_THROW(shap_summary(mc, Matrix(), {}, 1), Error);
}

TEST(ShapSummary, JsonRoundTrip) {
  std::mt19937_64 rng(5);
  const auto ds = oracle::random_dataset(rng, 50, 2);
  const auto m = gbt_fit(ds.x, ds.y, gbt({{"rounds", 5}}), 0);
  const nlohmann::json j = shap_summary(m, ds.x, {"a", "b"}, 2, 20, 7);
  EXPECT_EQ(nlohmann::json(j.get<AttributionSummary>()).dump(), j.dump());
}

TEST(Pca, CollinearUnstandardized) {
  Matrix x(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);
  }
  const auto p = pca_top2(x, {.standardize = false});
  EXPECT_NEAR(p.components[0][0], 1 / std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(p.components[0][1], 2 / std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(p.eigenvalues[1], 0.0, 1e-9);
}

TEST(Pca, CollinearStandardized) {
  Matrix x(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);
  }
  const auto p = pca_top2(x);
  EXPECT_NEAR(p.components[0][0], 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(p.components[0][1], 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(p.eigenvalues[0], 2.0, 1e-9);
}

TEST(Pca, ThreePointClosedForm) {
  Matrix x(3, 2, {0, 0, 1, 0, 0, 1});
  // covariance with n-1 denominator: [[1/3, -1/6], [-1/6, 1/3]]
  const auto e = oracle::eigen2(1.0 / 3, -1.0 / 6, 1.0 / 3);
  const auto p = pca_top2(x, {.standardize = false});
  EXPECT_NEAR(p.eigenvalues[0], e.l1, 1e-8);
  EXPECT_NEAR(p.eigenvalues[1], e.l2, 1e-8);
  EXPECT_NEAR(std::abs(p.components[0][0] * e.v1[0] + p.components[0][1] * e.v1[1]), 1.0, 1e-8);
}

TEST(Pca, RandomTwoFeatureAgreesWithClosedForm) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Matrix x(40, 2);
    const double mix = g(rng);
    for (std::size_t i = 0; i < 40; ++i) {
      x(i, 0) = 2 * g(rng);
      x(i, 1) = mix * x(i, 0) + g(rng);
    }
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      m0 += x(i, 0) / 40;
      m1 += x(i, 1) / 40;
    }
    double a = 0, b = 0, c = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      a += (x(i, 0) - m0) * (x(i, 0) - m0) / 39;
      b += (x(i, 0) - m0) * (x(i, 1) - m1) / 39;
      c += (x(i, 1) - m1) * (x(i, 1) - m1) / 39;
    }
    const auto e = oracle::eigen2(a, b, c);
    const auto p = pca_top2(x, {.standardize = false});
    EXPECT_NEAR(p.eigenvalues[0], e.l1, 1e-8);
    EXPECT_NEAR(p.eigenvalues[1], e.l2, 1e-8);
    auto v1 = e.v1;
    if (std::abs(v1[1]) > std::abs(v1[0]) ? v1[1] < 0 : v1[0] < 0) v1 = {-v1[0], -v1[1]};
    EXPECT_NEAR(p.components[0][0], v1[0], 1e-8);
    EXPECT_NEAR(p.components[0][1], v1[1], 1e-8);
  }
}

TEST(Pca, OrthonormalOrderedAndReconstructs) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (bool standardize : {false, true}) {
    Matrix x(60, 5);
    for (std::size_t i = 0; i < 60; ++i) {
      const double u = g(rng), v = g(rng);
      const double basis[5][2] = {{1, 0}, {0, 1}, {1, 1}, {2, -1}, {0.5, 3}};
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = 10 + basis[j][0] * u + basis[j][1] * v;
    }
    const auto p = pca_top2(x, {.standardize = standardize});
    EXPECT_NEAR(dot(p.components[0], p.components[0]), 1.0, 1e-9);
    EXPECT_NEAR(dot(p.components[1], p.components[1]), 1.0, 1e-9);
    EXPECT_NEAR(dot(p.components[0], p.components[1]), 0.0, 1e-9);
    EXPECT_GE(p.eigenvalues[0], p.eigenvalues[1]);
    EXPECT_GE(p.eigenvalues[1], 0.0);
    for (std::size_t i = 0; i < 60; ++i) {
      const auto back = p.reconstruct({p.coords(i, 0), p.coords(i, 1)});
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(back[j], x(i, j), 1e-6);
    }
  }
}

TEST(Pca, DeterministicAndConstantColumns) {
  Matrix x(4, 3, {1, 5, 0, 2, 5, 1, 3, 5, 0, 4, 5, 1});
  const auto a = pca_top2(x), b = pca_top2(x);
  EXPECT_EQ(a.components, b.components);
  EXPECT_EQ(a.coords, b.coords);
  EXPECT_NEAR(a.components[0][1], 0.0, 1e-12);
}

TEST(Pca, Degenerate) {
  EXPECT_THROW(pca_top2(Matrix(3, 2, {1, 1, 1, 1, 1, 1})), Error);
  EXPECT_THROW(pca_top2(Matrix(1, 2, {1, 2})), Error);
  EXPECT_THROW(pca_top2(Matrix(3, 1, {1, 2, 3})), Error);
}
