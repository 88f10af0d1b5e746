#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/knn.hpp"
#include "rentpas/linear.hpp"
#include "rentpas/spec.hpp"
#include "rentpas/tree.hpp"

namespace rentpas {

struct RidgeRegressor {
  RegressorSpec spec;
  RidgeModel model;
  friend bool operator==(const RidgeRegressor&, const RidgeRegressor&) = default;
};

struct KnnRegressor {
  RegressorSpec spec;
  KnnModel model;
  friend bool operator==(const KnnRegressor&, const KnnRegressor&) = default;
};

// Any fitted model, predicting log-price from a design-matrix row.
class Model {
 public:
  using Variant = std::variant<GbtModel, RidgeRegressor, KnnRegressor>;

  Model() = default;
  explicit Model(Variant v) : v_(std::move(v)) {}

  const RegressorSpec& spec() const {
    return std::visit([](const auto& m) -> const RegressorSpec& { return m.spec; }, v_);
  }
  RegressorKind kind() const { return spec().kind; }

  double predict(std::span<const double> row) const {
    return std::visit(
        [&](const auto& m) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GbtModel>) return m.predict(row);
          else return m.model.predict(row);
        },
        v_);
  }

  std::vector<double> predict_all(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
  }

  // Tree ensembles (GBT and single CART) support attribution.
  const GbtModel* trees() const { return std::get_if<GbtModel>(&v_); }

  bool degenerate_target() const {
    const auto* t = trees();
    return t && t->degenerate_target;
  }

  const Variant& variant() const { return v_; }
  friend bool operator==(const Model&, const Model&) = default;

 private:
  Variant v_;
};

inline Model fit(const RegressorSpec& spec, const Matrix& x, std::span<const double> y, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case RegressorKind::Gbt: return Model(gbt_fit(x, y, spec, seed));
    case RegressorKind::DecisionTree: return Model(tree_fit(x, y, spec));
    case RegressorKind::Ridge: return Model(RidgeRegressor{spec, ridge_fit(x, y, spec.get("alpha"))});
    case RegressorKind::Knn: {
      if (x.empty()) throw Error(ErrorKind::EmptyDataset, "knn fit");
      if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");
      const auto k = static_cast<std::size_t>(spec.get("k"));
      return Model(KnnRegressor{spec, KnnModel{x, {y.begin(), y.end()}, k}});
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown regressor kind");
}

inline void to_json(nlohmann::json& j, const Model& m) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GbtModel>) {
          j = v;
        } else {
          j = {{"spec", v.spec}, {"model", v.model}};
        }
      },
      m.variant());
}

inline void from_json(const nlohmann::json& j, Model& m) {
  const auto spec = j.at("spec").get<RegressorSpec>();
  switch (spec.kind) {
    case RegressorKind::Gbt:
    case RegressorKind::DecisionTree: m = Model(j.get<GbtModel>()); break;
    case RegressorKind::Ridge: m = Model(RidgeRegressor{spec, j.at("model").get<RidgeModel>()}); break;
    case RegressorKind::Knn: m = Model(KnnRegressor{spec, j.at("model").get<KnnModel>()}); break;
  }
}

}  // namespace rentpas
