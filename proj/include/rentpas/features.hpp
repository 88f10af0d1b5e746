#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/listings.hpp"
#include "rentpas/matrix.hpp"

namespace rentpas {

// One-hot group with drop-first encoding: levels are sorted, levels[0] is the
// baseline and gets no column.
struct CategoricalGroup {
  std::string field;  // "location" or "rental_type"
  std::vector<std::string> levels;

  const std::string& baseline() const { return levels.front(); }
  std::size_t width() const { return levels.empty() ? 0 : levels.size() - 1; }

  friend bool operator==(const CategoricalGroup&, const CategoricalGroup&) = default;
};

struct FeatureSchema {
  std::vector<std::string> continuous{"beds", "baths"};
  std::vector<CategoricalGroup> categorical;
  std::size_t total_width = 0;

  std::vector<std::string> column_names() const {
    std::vector<std::string> out = continuous;
    for (const auto& g : categorical)
      for (std::size_t i = 1; i < g.levels.size(); ++i) out.push_back(g.field + "=" + g.levels[i]);
    return out;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

inline const std::string& categorical_value(const Listing& l, const std::string& field) {
  return field == "location" ? l.location : l.rental_type;
}

inline FeatureSchema fit_schema(const std::vector<Listing>& listings) {
  if (listings.empty()) throw Error(ErrorKind::EmptyDataset, "fit_schema");
  FeatureSchema schema;
  schema.total_width = schema.continuous.size();
  for (const char* field : {"location", "rental_type"}) {
    std::set<std::string> levels;
    for (const auto& l : listings) levels.insert(categorical_value(l, field));
    CategoricalGroup g{field, {levels.begin(), levels.end()}};
    schema.total_width += g.width();
    schema.categorical.push_back(std::move(g));
  }
  return schema;
}

struct UnseenCategory {
  std::string field;
  std::string value;
  std::int64_t count = 0;
};

struct DesignMatrix {
  Matrix values;
  std::vector<double> target;  // ln(price)
  std::vector<std::int64_t> listing_ids;
  std::vector<UnseenCategory> unseen;  // encoded as the baseline

  std::size_t warning_count() const {
    std::size_t n = 0;
    for (const auto& u : unseen) n += static_cast<std::size_t>(u.count);
    return n;
  }
};

inline DesignMatrix transform(const FeatureSchema& schema, const std::vector<Listing>& listings) {
  DesignMatrix out;
  out.values = Matrix(listings.size(), schema.total_width);
  out.target.reserve(listings.size());
  out.listing_ids.reserve(listings.size());

  std::vector<std::map<std::string, std::size_t>> column_of(schema.categorical.size());
  std::size_t offset = schema.continuous.size();
  for (std::size_t g = 0; g < schema.categorical.size(); ++g) {
    const auto& levels = schema.categorical[g].levels;
    for (std::size_t i = 0; i < levels.size(); ++i)
      column_of[g][levels[i]] = i == 0 ? SIZE_MAX : offset + i - 1;
    offset += schema.categorical[g].width();
  }

  std::map<std::pair<std::string, std::string>, std::int64_t> unseen;
  for (std::size_t r = 0; r < listings.size(); ++r) {
    const auto& l = listings[r];
    auto row = out.values.row(r);
    row[0] = static_cast<double>(l.beds);
    row[1] = l.baths;
    for (std::size_t g = 0; g < schema.categorical.size(); ++g) {
      const auto& field = schema.categorical[g].field;
      const auto& value = categorical_value(l, field);
      auto it = column_of[g].find(value);
      if (it == column_of[g].end()) {
        ++unseen[{field, value}];
      } else if (it->second != SIZE_MAX) {
        row[it->second] = 1.0;
      }
    }
    out.target.push_back(std::log(l.price));
    out.listing_ids.push_back(l.id);
  }
  for (const auto& [key, count] : unseen) out.unseen.push_back({key.first, key.second, count});
  return out;
}

inline double inverse_target(double y_log) { return std::exp(y_log); }

inline void to_json(nlohmann::json& j, const FeatureSchema& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : s.categorical)
    groups.push_back({{"field", g.field}, {"baseline", g.baseline()}, {"levels", g.levels}});
  j = {{"continuous", s.continuous}, {"categorical", std::move(groups)}, {"total_width", s.total_width}};
}

inline void from_json(const nlohmann::json& j, FeatureSchema& s) {
  s.continuous = j.at("continuous").get<std::vector<std::string>>();
  s.categorical.clear();
  for (const auto& g : j.at("categorical"))
    s.categorical.push_back({g.at("field").get<std::string>(), g.at("levels").get<std::vector<std::string>>()});
  s.total_width = j.at("total_width").get<std::size_t>();
}

}  // namespace rentpas
