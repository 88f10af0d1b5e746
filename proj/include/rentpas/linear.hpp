#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/matrix.hpp"

namespace rentpas {

// Minimizes ||y - X b - c||^2 + alpha ||b||^2 with the intercept c unpenalized.
struct RidgeModel {
  std::vector<double> coef;
  double intercept = 0.0;
  double alpha = 0.0;

  double predict(std::span<const double> row) const {
    if (row.size() != coef.size())
      throw Error(ErrorKind::WidthMismatch,
                  "row has " + std::to_string(row.size()) + " columns, model expects " + std::to_string(coef.size()));
    double s = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * row[j];
    return s;
  }

  friend bool operator==(const RidgeModel&, const RidgeModel&) = default;
};

namespace detail {

inline Eigen::MatrixXd to_eigen(const Matrix& x) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(x.cols()));
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(r, c);
  return out;
}

}  // namespace detail

// Normal equations on centered data: (Xc'Xc + alpha I) b = Xc'yc, c = mean(y) - mean(X) b.
inline RidgeModel ridge_fit(const Matrix& x, std::span<const double> y, double alpha) {
  if (alpha < 0) throw Error(ErrorKind::InvalidSpec, "alpha >= 0");
  if (x.empty()) throw Error(ErrorKind::EmptyDataset, "ridge_fit");
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");

  Eigen::MatrixXd X = detail::to_eigen(x);
  const Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = Y.mean();
  X.rowwise() -= x_mean;
  const Eigen::VectorXd yc = Y.array() - y_mean;

  const auto d = X.cols();
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = X.transpose() * yc;

  Eigen::VectorXd beta;
  if (d == 0) {
    beta = Eigen::VectorXd(0);
  } else if (alpha == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < d)
      throw Error(ErrorKind::SingularSystem,
                  "rank " + std::to_string(qr.rank()) + " < " + std::to_string(d) + " with alpha = 0");
    beta = qr.solve(yc);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "ridge normal equations");
    beta = ldlt.solve(rhs);
  }

  RidgeModel model;
  model.alpha = alpha;
  model.coef.assign(beta.data(), beta.data() + beta.size());
  model.intercept = y_mean - x_mean.dot(beta);
  return model;
}

inline void to_json(nlohmann::json& j, const RidgeModel& m) {
  j = {{"coef", m.coef}, {"intercept", m.intercept}, {"alpha", m.alpha}};
}

inline void from_json(const nlohmann::json& j, RidgeModel& m) {
  m.coef = j.at("coef").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  m.alpha = j.at("alpha").get<double>();
}

}  // namespace rentpas
