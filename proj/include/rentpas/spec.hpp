#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"

namespace rentpas {

enum class RegressorKind { Gbt, DecisionTree, Ridge, Knn };

constexpr std::string_view to_string(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::Gbt: return "gbt";
    case RegressorKind::DecisionTree: return "decision_tree";
    case RegressorKind::Ridge: return "ridge";
    case RegressorKind::Knn: return "knn";
  }
  return "unknown";
}

inline RegressorKind regressor_kind_from(std::string_view name) {
  for (auto k : {RegressorKind::Gbt, RegressorKind::DecisionTree, RegressorKind::Ridge, RegressorKind::Knn})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::InvalidSpec, "unknown regressor kind '" + std::string(name) + "'");
}

// A model family plus named hyperparameters. Missing names fall back to the
// defaults below.
struct RegressorSpec {
  RegressorKind kind = RegressorKind::Gbt;
  std::map<std::string, double> params;

  static const std::map<std::string, double>& defaults(RegressorKind kind) {
    static const std::map<std::string, double> gbt{{"rounds", 200}, {"learning_rate", 0.1},
                                                   {"max_depth", 4},  {"lambda", 1.0},
                                                   {"gamma", 0.0},    {"min_child_weight", 1.0},
                                                   {"subsample", 1.0}};
    static const std::map<std::string, double> tree{{"max_depth", 8}, {"min_samples_leaf", 5}};
    static const std::map<std::string, double> ridge{{"alpha", 1.0}};
    static const std::map<std::string, double> knn{{"k", 10}};
    switch (kind) {
      case RegressorKind::Gbt: return gbt;
      case RegressorKind::DecisionTree: return tree;
      case RegressorKind::Ridge: return ridge;
      case RegressorKind::Knn: return knn;
    }
    return gbt;
  }

  double get(const std::string& name) const {
    if (auto it = params.find(name); it != params.end()) return it->second;
    const auto& d = defaults(kind);
    if (auto it = d.find(name); it != d.end()) return it->second;
    throw Error(ErrorKind::InvalidSpec, "unknown hyperparameter '" + name + "' for " + std::string(to_string(kind)));
  }

  // Every hyperparameter, defaults filled in.
  std::map<std::string, double> resolved() const {
    auto out = defaults(kind);
    for (const auto& [k, v] : params) out[k] = v;
    return out;
  }

  void validate() const {
    const auto& d = defaults(kind);
    for (const auto& [name, value] : params) {
      if (!d.count(name))
        throw Error(ErrorKind::InvalidSpec, "unknown hyperparameter '" + name + "' for " + std::string(to_string(kind)));
      if (!std::isfinite(value)) throw Error(ErrorKind::InvalidSpec, name + " must be finite");
    }
    auto require = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorKind::InvalidSpec, what);
    };
    auto is_int = [](double v) { return v == std::floor(v); };
    switch (kind) {
      case RegressorKind::Gbt:
        require(get("rounds") >= 1 && is_int(get("rounds")), "rounds >= 1");
        require(get("learning_rate") > 0 && get("learning_rate") <= 1, "0 < learning_rate <= 1");
        require(get("max_depth") >= 0 && is_int(get("max_depth")), "max_depth >= 0");
        require(get("lambda") >= 0, "lambda >= 0");
        require(get("gamma") >= 0, "gamma >= 0");
        require(get("min_child_weight") >= 0, "min_child_weight >= 0");
        require(get("subsample") > 0 && get("subsample") <= 1, "0 < subsample <= 1");
        break;
      case RegressorKind::DecisionTree:
        require(get("max_depth") >= 0 && is_int(get("max_depth")), "max_depth >= 0");
        require(get("min_samples_leaf") >= 1 && is_int(get("min_samples_leaf")), "min_samples_leaf >= 1");
        break;
      case RegressorKind::Ridge:
        require(get("alpha") >= 0, "alpha >= 0");
        break;
      case RegressorKind::Knn:
        require(get("k") >= 1 && is_int(get("k")), "k >= 1");
        break;
    }
  }

  std::string label() const {
    std::string out(to_string(kind));
    out += "(";
    bool first = true;
    for (const auto& [k, v] : resolved()) {
      if (!first) out += ", ";
      first = false;
      nlohmann::json num = v;
      out += k + "=" + num.dump();
    }
    return out + ")";
  }

  friend bool operator==(const RegressorSpec& a, const RegressorSpec& b) {
    return a.kind == b.kind && a.resolved() == b.resolved();
  }
};

inline void to_json(nlohmann::json& j, const RegressorSpec& s) {
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))}};
  for (const auto& [k, v] : s.resolved()) j["params"][k] = v;
}

inline void from_json(const nlohmann::json& j, RegressorSpec& s) {
  s.kind = regressor_kind_from(j.at("kind").get<std::string>());
  s.params.clear();
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) s.params[k] = v.get<double>();
  // flat form: {"kind": "gbt", "rounds": 50}
  for (const auto& [k, v] : j.items())
    if (k != "kind" && k != "params") s.params[k] = v.get<double>();
  s.validate();
}

}  // namespace rentpas
