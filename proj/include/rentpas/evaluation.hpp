#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/matrix.hpp"
#include "rentpas/regressor.hpp"

namespace rentpas {

// All metrics are computed on log-price.
struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;  // absent when the truth has zero variance
  std::size_t n = 0;
};

inline Metrics metrics_lenient(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(y_true.size()) + " vs " + std::to_string(y_pred.size()));
  if (y_true.empty()) throw Error(ErrorKind::LengthMismatch, "metrics need at least one row");
  const auto n = static_cast<double>(y_true.size());
  double abs_sum = 0.0, sq_sum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    mean += y_true[i];
  }
  mean /= n;
  double ss_tot = 0.0;
  for (double y : y_true) ss_tot += (y - mean) * (y - mean);
  Metrics m;
  m.n = y_true.size();
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  if (ss_tot > 0.0) m.r2 = 1.0 - sq_sum / ss_tot;
  return m;
}

// R^2 = 1 - SSres/SStot with SStot about mean(y_true). Throws ZeroVarianceTruth
// when R^2 is undefined; use metrics_lenient to get the other fields anyway.
inline Metrics metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  auto m = metrics_lenient(y_true, y_pred);
  if (!m.r2) throw Error(ErrorKind::ZeroVarianceTruth, "R^2 undefined for constant truth");
  return m;
}

struct FoldMetrics {
  std::size_t fold = 0;
  Metrics metrics;
  bool degenerate_target = false;
};

struct MetricsReport {
  RegressorSpec spec;
  Metrics mean;  // mean over folds for CV, plain metrics for a holdout
  std::vector<FoldMetrics> folds;
  std::vector<std::string> warnings;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  double fraction = 0.8;
  std::vector<std::size_t> train;  // row positions
  std::vector<std::size_t> test;
};

inline void seeded_shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
}

// Seeded shuffle; the first round(0.2 n) positions form the test set.
inline SplitPlan train_test_split(std::size_t n, std::uint64_t seed, double train_fraction = 0.8) {
  if (n < 2) throw Error(ErrorKind::EmptyDataset, "split needs at least two rows");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  seeded_shuffle(ids, seed);
  const auto n_test = static_cast<std::size_t>(std::llround((1.0 - train_fraction) * static_cast<double>(n)));
  SplitPlan plan;
  plan.seed = seed;
  plan.fraction = train_fraction;
  plan.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  plan.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(plan.test.begin(), plan.test.end());
  std::sort(plan.train.begin(), plan.train.end());
  return plan;
}

// Seeded shuffle then contiguous chunks; the first n % k folds hold one extra id.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw Error(ErrorKind::BadK, "k-fold needs 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  seeded_shuffle(ids, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(ids.begin() + static_cast<std::ptrdiff_t>(pos), ids.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

inline MetricsReport cross_validate(const RegressorSpec& spec, const Matrix& x, std::span<const double> y,
                                    std::size_t k, std::uint64_t seed) {
  spec.validate();
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");
  const auto folds = kfold_split(x.rows(), k, seed);
  MetricsReport report;
  report.spec = spec;
  std::vector<char> held(x.rows());
  double mae = 0, mse = 0, rmse = 0, r2 = 0;
  std::size_t r2_count = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(held.begin(), held.end(), 0);
    for (auto i : folds[f]) held[i] = 1;
    std::vector<std::size_t> train;
    train.reserve(x.rows() - folds[f].size());
    for (std::size_t i = 0; i < x.rows(); ++i)
      if (!held[i]) train.push_back(i);
    const auto xt = x.select_rows(train);
    const auto yt = select<double>(y, train);
    const auto model = fit(spec, xt, yt, seed);
    const auto xv = x.select_rows(folds[f]);
    const auto yv = select<double>(y, folds[f]);
    FoldMetrics fm{f, metrics_lenient(yv, model.predict_all(xv)), model.degenerate_target()};
    if (fm.degenerate_target) report.warnings.push_back("DegenerateTarget in fold " + std::to_string(f));
    if (!fm.metrics.r2) report.warnings.push_back("ZeroVarianceTruth in fold " + std::to_string(f));
    mae += fm.metrics.mae;
    mse += fm.metrics.mse;
    rmse += fm.metrics.rmse;
    if (fm.metrics.r2) {
      r2 += *fm.metrics.r2;
      ++r2_count;
    }
    report.mean.n += fm.metrics.n;
    report.folds.push_back(fm);
  }
  const auto kf = static_cast<double>(folds.size());
  report.mean.mae = mae / kf;
  report.mean.mse = mse / kf;
  report.mean.rmse = rmse / kf;
  if (r2_count) report.mean.r2 = r2 / static_cast<double>(r2_count);
  return report;
}

struct LeaderboardEntry {
  std::size_t grid_index = 0;
  MetricsReport cv;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  RegressorSpec best;
  std::vector<LeaderboardEntry> leaderboard;  // grid order
};

namespace detail {

// true when a ranks strictly ahead of b: higher mean R^2, then lower RMSE, then grid order
inline bool ranks_ahead(const LeaderboardEntry& a, const LeaderboardEntry& b) {
  const double ra = a.cv.mean.r2.value_or(-std::numeric_limits<double>::infinity());
  const double rb = b.cv.mean.r2.value_or(-std::numeric_limits<double>::infinity());
  if (ra != rb) return ra > rb;
  if (a.cv.mean.rmse != b.cv.mean.rmse) return a.cv.mean.rmse < b.cv.mean.rmse;
  return a.grid_index < b.grid_index;
}

}  // namespace detail

inline GridSearchResult grid_search(const std::vector<RegressorSpec>& grid, const Matrix& x, std::span<const double> y,
                                    std::size_t k, std::uint64_t seed) {
  if (grid.empty()) throw Error(ErrorKind::EmptyGrid, "grid_search");
  GridSearchResult out;
  for (std::size_t i = 0; i < grid.size(); ++i) out.leaderboard.push_back({i, cross_validate(grid[i], x, y, k, seed)});
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.leaderboard.size(); ++i)
    if (detail::ranks_ahead(out.leaderboard[i], out.leaderboard[best])) best = i;
  out.best_index = best;
  out.best = grid[best];
  return out;
}

inline std::vector<LeaderboardEntry> ranked(std::vector<LeaderboardEntry> entries) {
  std::sort(entries.begin(), entries.end(), detail::ranks_ahead);
  return entries;
}

// rounds {200, 400} x eta {0.05, 0.1} x depth {4, 6} x lambda {1, 5} x subsample {0.8, 1.0}
inline std::vector<RegressorSpec> default_gbt_grid() {
  std::vector<RegressorSpec> grid;
  for (double rounds : {200.0, 400.0})
    for (double eta : {0.05, 0.1})
      for (double depth : {4.0, 6.0})
        for (double lambda : {1.0, 5.0})
          for (double subsample : {0.8, 1.0})
            grid.push_back({RegressorKind::Gbt,
                            {{"rounds", rounds},
                             {"learning_rate", eta},
                             {"max_depth", depth},
                             {"lambda", lambda},
                             {"subsample", subsample},
                             {"gamma", 0.0},
                             {"min_child_weight", 1.0}}});
  return grid;
}

// Baselines for the comparison table next to the selected GBT.
inline std::vector<RegressorSpec> default_baselines() {
  return {{RegressorKind::DecisionTree, {{"max_depth", 8}, {"min_samples_leaf", 5}}},
          {RegressorKind::Ridge, {{"alpha", 1.0}}},
          {RegressorKind::Knn, {{"k", 10}}}};
}

struct ComparisonRow {
  RegressorSpec spec;
  Metrics holdout;
};

inline Metrics holdout_metrics(const RegressorSpec& spec, const Matrix& x, std::span<const double> y,
                               const SplitPlan& split, std::uint64_t seed) {
  const auto xt = x.select_rows(split.train);
  const auto yt = select<double>(y, split.train);
  const auto model = fit(spec, xt, yt, seed);
  const auto xv = x.select_rows(split.test);
  const auto yv = select<double>(y, split.test);
  return metrics_lenient(yv, model.predict_all(xv));
}

// Each spec fitted on the split's train rows and scored on its test rows,
// sorted by descending R^2.
inline std::vector<ComparisonRow> compare_models(const Matrix& x, std::span<const double> y, const SplitPlan& split,
                                                 const std::vector<RegressorSpec>& specs, std::uint64_t seed) {
  std::vector<ComparisonRow> rows;
  for (const auto& spec : specs) rows.push_back({spec, holdout_metrics(spec, x, y, split, seed)});
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return a.holdout.r2.value_or(-std::numeric_limits<double>::infinity()) >
           b.holdout.r2.value_or(-std::numeric_limits<double>::infinity());
  });
  return rows;
}

inline std::string model_display_name(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::Gbt: return "GBT";
    case RegressorKind::DecisionTree: return "DecisionTree";
    case RegressorKind::Ridge: return "Ridge";
    case RegressorKind::Knn: return "KNN";
  }
  return "?";
}

// Aligned text table: Model, MAE, MSE, R2, RMSE (log-price space).
inline std::string format_comparison_table(const std::vector<ComparisonRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %10s\n", "Model", "MAE", "MSE", "R2", "RMSE");
  out += line;
  for (const auto& r : rows) {
    const auto& m = r.holdout;
    if (m.r2)
      std::snprintf(line, sizeof line, "%-14s %10.6f %10.6f %10.6f %10.6f\n", model_display_name(r.spec.kind).c_str(),
                    m.mae, m.mse, *m.r2, m.rmse);
    else
      std::snprintf(line, sizeof line, "%-14s %10.6f %10.6f %10s %10.6f\n", model_display_name(r.spec.kind).c_str(),
                    m.mae, m.mse, "n/a", m.rmse);
    out += line;
  }
  out += "(metrics on log price)\n";
  return out;
}

inline void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"n", m.n}};
  j["r2"] = m.r2 ? nlohmann::json(*m.r2) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, Metrics& m) {
  m.mae = j.at("mae").get<double>();
  m.mse = j.at("mse").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.n = j.at("n").get<std::size_t>();
  m.r2 = j.at("r2").is_null() ? std::nullopt : std::optional<double>(j.at("r2").get<double>());
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold}, {"metrics", f.metrics}, {"degenerate_target", f.degenerate_target}});
  j = {{"spec", r.spec}, {"mean", r.mean}, {"folds", std::move(folds)}, {"warnings", r.warnings}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.spec = j.at("spec").get<RegressorSpec>();
  r.mean = j.at("mean").get<Metrics>();
  r.folds.clear();
  for (const auto& f : j.at("folds"))
    r.folds.push_back({f.at("fold").get<std::size_t>(), f.at("metrics").get<Metrics>(), f.at("degenerate_target").get<bool>()});
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline void to_json(nlohmann::json& j, const LeaderboardEntry& e) { j = {{"grid_index", e.grid_index}, {"cv", e.cv}}; }

inline void from_json(const nlohmann::json& j, LeaderboardEntry& e) {
  e.grid_index = j.at("grid_index").get<std::size_t>();
  e.cv = j.at("cv").get<MetricsReport>();
}

inline void to_json(nlohmann::json& j, const ComparisonRow& r) {
  j = {{"model", model_display_name(r.spec.kind)}, {"spec", r.spec}, {"holdout", r.holdout}};
}

inline void from_json(const nlohmann::json& j, ComparisonRow& r) {
  r.spec = j.at("spec").get<RegressorSpec>();
  r.holdout = j.at("holdout").get<Metrics>();
}

}  // namespace rentpas
