#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/matrix.hpp"

namespace rentpas {

// Mean target of the k nearest training rows (Euclidean); equal distances
// resolve to the lower row index.
inline double knn_predict(const Matrix& train, std::span<const double> target, std::span<const double> row,
                          std::size_t k) {
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "knn_predict");
  if (target.size() != train.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");
  if (row.size() != train.cols()) throw Error(ErrorKind::WidthMismatch, "knn row width");
  if (k < 1 || k > train.rows()) throw Error(ErrorKind::BadK, "knn requires 1 <= k <= n");

  std::vector<std::pair<double, std::size_t>> dist(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    auto t = train.row(i);
    double d = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) d += (t[j] - row[j]) * (t[j] - row[j]);
    dist[i] = {d, i};
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += target[dist[i].second];
  return sum / static_cast<double>(k);
}

struct KnnModel {
  Matrix train;
  std::vector<double> target;
  std::size_t k = 1;

  double predict(std::span<const double> row) const {
    return knn_predict(train, target, row, std::min(k, train.rows()));
  }

  friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

inline void to_json(nlohmann::json& j, const KnnModel& m) {
  j = {{"k", m.k}, {"rows", m.train.rows()}, {"cols", m.train.cols()}, {"train", m.train.data()}, {"target", m.target}};
}

inline void from_json(const nlohmann::json& j, KnnModel& m) {
  m.k = j.at("k").get<std::size_t>();
  m.train = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                   j.at("train").get<std::vector<double>>());
  m.target = j.at("target").get<std::vector<double>>();
}

}  // namespace rentpas
