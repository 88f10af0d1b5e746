#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/csv.hpp"
#include "rentpas/error.hpp"
#include "rentpas/evaluation.hpp"
#include "rentpas/features.hpp"
#include "rentpas/regressor.hpp"

namespace rentpas {

// Residuals live in log space: residual = ln p - ln p_hat, so the price
// ratio p / p_hat equals exp(residual).
inline constexpr const char* kResidualSpace = "log-price residual ln(p) - ln(p_hat); ratio p/p_hat = exp(residual)";

inline constexpr double kDefaultQ = 0.4;
inline constexpr double kMinHoldoutR2 = 0.75;
inline constexpr std::size_t kMinTestRows = 1000;

enum class Category { Overpriced, Underpriced, FairPriced };

constexpr std::string_view to_string(Category c) {
  switch (c) {
    case Category::Overpriced: return "Overpriced";
    case Category::Underpriced: return "Underpriced";
    case Category::FairPriced: return "Fair-priced";
  }
  return "?";
}

inline Category category_from(std::string_view name) {
  for (auto c : {Category::Overpriced, Category::Underpriced, Category::FairPriced})
    if (to_string(c) == name) return c;
  throw Error(ErrorKind::MalformedSnapshot, "unknown category '" + std::string(name) + "'");
}

struct ResidualStats {
  double mu = 0.0;
  double sigma = 0.0;  // population (n) standard deviation
  std::size_t n = 0;

  friend bool operator==(const ResidualStats&, const ResidualStats&) = default;
};

struct PasRecord {
  std::int64_t listing_id = 0;
  double p = 0.0;
  double p_hat = 0.0;
  double residual = 0.0;
  double z = 0.0;
  double pas = 0.0;
  Category category = Category::FairPriced;

  friend bool operator==(const PasRecord&, const PasRecord&) = default;
};

struct QConfig {
  double q = kDefaultQ;
  std::optional<std::int64_t> exemplar_id;  // absent = set manually

  friend bool operator==(const QConfig&, const QConfig&) = default;
};

inline QConfig manual_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorKind::NonPositiveQ, "q must be a positive number");
  return QConfig{q, std::nullopt};
}

struct PasPreconditionReport {
  double r2_holdout = 0.0;
  bool cv_performed = false;
  std::size_t test_n = 0;
  bool passed = false;
  std::vector<std::string> failures;
  bool overridden = false;
};

inline const char* const kCheckR2 = "R^2 >= 0.75 on the holdout set";
inline const char* const kCheckCv = "cross-validation performed";
inline const char* const kCheckTestSize = "test set has no fewer than 1,000 samples";

inline PasPreconditionReport validate_preconditions(double r2_holdout, bool cv_done, std::size_t test_n) {
  PasPreconditionReport r;
  r.r2_holdout = r2_holdout;
  r.cv_performed = cv_done;
  r.test_n = test_n;
  if (!(r2_holdout >= kMinHoldoutR2)) r.failures.push_back(kCheckR2);
  if (!cv_done) r.failures.push_back(kCheckCv);
  if (test_n < kMinTestRows) r.failures.push_back(kCheckTestSize);
  r.passed = r.failures.empty();
  return r;
}

inline PasPreconditionReport validate_preconditions(const Metrics& holdout, bool cv_done) {
  return validate_preconditions(holdout.r2.value_or(-std::numeric_limits<double>::infinity()), cv_done, holdout.n);
}

// Fits the selected spec on every row so that each listing gets a residual.
inline Model refit_full(const RegressorSpec& best, const Matrix& x_all, std::span<const double> y_all, std::uint64_t seed) {
  return fit(best, x_all, y_all, seed);
}

struct ZScores {
  ResidualStats stats;
  std::vector<double> z;
};

inline std::vector<double> standardize(std::span<const double> residuals, const ResidualStats& stats) {
  if (!(stats.sigma > 0.0)) throw Error(ErrorKind::ZeroSigma, "residual standard deviation is zero");
  std::vector<double> z(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) z[i] = (residuals[i] - stats.mu) / stats.sigma;
  return z;
}

inline ZScores zscores(std::span<const double> residuals) {
  if (residuals.size() < 2) throw Error(ErrorKind::TooFewRecords, "z-scores need at least two residuals");
  if (std::all_of(residuals.begin(), residuals.end(), [&](double r) { return r == residuals.front(); }))
    throw Error(ErrorKind::ZeroSigma, "all residuals are identical");
  const auto n = static_cast<double>(residuals.size());
  double mu = 0.0;
  for (double r : residuals) mu += r;
  mu /= n;
  double ss = 0.0;
  for (double r : residuals) ss += (r - mu) * (r - mu);
  ZScores out;
  out.stats = {mu, std::sqrt(ss / n), residuals.size()};
  out.z = standardize(residuals, out.stats);
  return out;
}

// pas_i = (p_i / p_hat_i) * z_i
inline std::vector<double> compute_pas(std::span<const double> p, std::span<const double> p_hat, std::span<const double> z) {
  if (p.size() != p_hat.size() || p.size() != z.size())
    throw Error(ErrorKind::LengthMismatch, "p, p_hat and z must have equal lengths");
  std::vector<double> pas(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !(p_hat[i] > 0.0)) throw Error(ErrorKind::NonPositivePrice, "row " + std::to_string(i));
    pas[i] = (p[i] / p_hat[i]) * z[i];
  }
  return pas;
}

inline Category classify_one(double pas, double q) {
  if (pas >= q) return Category::Overpriced;
  if (pas <= -q) return Category::Underpriced;
  return Category::FairPriced;
}

inline std::vector<Category> classify(std::span<const double> pas, double q) {
  if (!(q > 0.0)) throw Error(ErrorKind::NonPositiveQ, "q must be positive");
  std::vector<Category> out(pas.size());
  for (std::size_t i = 0; i < pas.size(); ++i) out[i] = classify_one(pas[i], q);
  return out;
}

inline void apply_q(std::vector<PasRecord>& records, double q) {
  if (!(q > 0.0)) throw Error(ErrorKind::NonPositiveQ, "q must be positive");
  for (auto& r : records) r.category = classify_one(r.pas, q);
}

// q = |pas| of a listing the user considers mispriced: the exemplar sits on
// its boundary and everything at least as extreme is captured.
inline QConfig calibrate_q(const std::vector<PasRecord>& records, std::int64_t exemplar_id) {
  auto it = std::find_if(records.begin(), records.end(), [&](const PasRecord& r) { return r.listing_id == exemplar_id; });
  if (it == records.end()) throw Error(ErrorKind::UnknownListing, "listing " + std::to_string(exemplar_id));
  if (it->pas == 0.0) throw Error(ErrorKind::ZeroPasExemplar, "listing " + std::to_string(exemplar_id) + " has pas 0");
  return QConfig{std::abs(it->pas), exemplar_id};
}

// Builds records from log-price predictions. With `stats` given (scoring new
// listings against a stored population) those are used for z; otherwise
// they are computed over exactly these records.
inline std::pair<std::vector<PasRecord>, ResidualStats> score_records(std::span<const std::int64_t> ids,
                                                                       std::span<const double> prices,
                                                                       std::span<const double> predicted_log, double q,
                                                                       std::optional<ResidualStats> stats = std::nullopt) {
  if (ids.size() != prices.size() || prices.size() != predicted_log.size())
    throw Error(ErrorKind::LengthMismatch, "ids, prices and predictions must align");
  std::vector<double> residual(prices.size()), p_hat(prices.size());
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0)) throw Error(ErrorKind::NonPositivePrice, "row " + std::to_string(i));
    p_hat[i] = inverse_target(predicted_log[i]);
    residual[i] = std::log(prices[i]) - predicted_log[i];
  }
  ResidualStats used;
  std::vector<double> z;
  if (stats) {
    used = *stats;
    z = standardize(residual, used);
  } else {
    auto zs = zscores(residual);
    used = zs.stats;
    z = std::move(zs.z);
  }
  const auto pas = compute_pas(prices, p_hat, z);
  const auto cats = classify(pas, q);
  std::vector<PasRecord> records(prices.size());
  for (std::size_t i = 0; i < prices.size(); ++i)
    records[i] = {ids[i], prices[i], p_hat[i], residual[i], z[i], pas[i], cats[i]};
  return {std::move(records), used};
}

struct CategoryTotals {
  std::size_t overpriced = 0;
  std::size_t underpriced = 0;
  std::size_t fair = 0;

  std::size_t& operator[](Category c) {
    return c == Category::Overpriced ? overpriced : c == Category::Underpriced ? underpriced : fair;
  }
  std::size_t total() const { return overpriced + underpriced + fair; }
  friend bool operator==(const CategoryTotals&, const CategoryTotals&) = default;
};

inline CategoryTotals totals(const std::vector<PasRecord>& records) {
  CategoryTotals t;
  for (const auto& r : records) ++t[r.category];
  return t;
}

struct Histogram {
  std::string metric;  // "pas" or "z"
  double min = 0.0;
  double max = 0.0;
  std::vector<double> edges;  // bins + 1 edges
  std::vector<CategoryTotals> bins;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

struct PasSummary {
  double q = 0.0;
  CategoryTotals totals;
  Histogram pas;
  Histogram z;
};

namespace detail {

inline Histogram histogram(const std::string& metric, std::span<const double> values, std::span<const Category> cats,
                           std::size_t bins) {
  Histogram h;
  h.metric = metric;
  h.min = *std::min_element(values.begin(), values.end());
  h.max = *std::max_element(values.begin(), values.end());
  const double width = (h.max - h.min) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? h.max : h.min + width * static_cast<double>(b));
  h.bins.assign(bins, {});
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t b = width > 0 ? static_cast<std::size_t>((values[i] - h.min) / width) : 0;
    b = std::min(b, bins - 1);  // the max lands in the last bin
    ++h.bins[b][cats[i]];
  }
  const auto n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0) {
    h.skewness = m3 / std::pow(m2, 1.5);
    h.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return h;
}

}  // namespace detail

// Equal-width histograms of pas and z over [min, max] with per-bin category
// counts at threshold q.
inline PasSummary pas_summary(const std::vector<PasRecord>& records, double q, std::size_t bins) {
  if (records.empty()) throw Error(ErrorKind::EmptyRecords, "pas_summary");
  if (bins < 1) throw Error(ErrorKind::BadK, "bins >= 1");
  std::vector<double> pas, z;
  for (const auto& r : records) {
    pas.push_back(r.pas);
    z.push_back(r.z);
  }
  const auto cats = classify(pas, q);
  PasSummary s;
  s.q = q;
  for (auto c : cats) ++s.totals[c];
  s.pas = detail::histogram("pas", pas, cats, bins);
  s.z = detail::histogram("z", z, cats, bins);
  return s;
}

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string scored_csv(const std::vector<PasRecord>& records) {
  std::string out = "listing_id,price,predicted_price,residual,z,pas,category\n";
  for (const auto& r : records)
    out += csv::format_row({std::to_string(r.listing_id), detail::shortest(r.p), detail::shortest(r.p_hat),
                            detail::shortest(r.residual), detail::shortest(r.z), detail::shortest(r.pas),
                            std::string(to_string(r.category))});
  return out;
}

inline void to_json(nlohmann::json& j, const ResidualStats& s) { j = {{"mu", s.mu}, {"sigma", s.sigma}, {"n", s.n}}; }
inline void from_json(const nlohmann::json& j, ResidualStats& s) {
  s.mu = j.at("mu").get<double>();
  s.sigma = j.at("sigma").get<double>();
  s.n = j.at("n").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const QConfig& q) {
  j = {{"q", q.q}, {"provenance", q.exemplar_id ? "exemplar" : "manual"}};
  j["exemplar_id"] = q.exemplar_id ? nlohmann::json(*q.exemplar_id) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, QConfig& q) {
  q.q = j.at("q").get<double>();
  q.exemplar_id = j.at("exemplar_id").is_null() ? std::nullopt : std::optional(j.at("exemplar_id").get<std::int64_t>());
}

inline void to_json(nlohmann::json& j, const PasPreconditionReport& r) {
  j = {{"r2_holdout", r.r2_holdout}, {"cv_performed", r.cv_performed}, {"test_n", r.test_n},
       {"passed", r.passed},         {"failures", r.failures},         {"overridden", r.overridden}};
}
inline void from_json(const nlohmann::json& j, PasPreconditionReport& r) {
  r.r2_holdout = j.at("r2_holdout").get<double>();
  r.cv_performed = j.at("cv_performed").get<bool>();
  r.test_n = j.at("test_n").get<std::size_t>();
  r.passed = j.at("passed").get<bool>();
  r.failures = j.at("failures").get<std::vector<std::string>>();
  r.overridden = j.at("overridden").get<bool>();
}

inline void to_json(nlohmann::json& j, const PasRecord& r) {
  j = {{"listing_id", r.listing_id}, {"price", r.p}, {"predicted_price", r.p_hat}, {"residual", r.residual},
       {"z", r.z},                   {"pas", r.pas}, {"category", std::string(to_string(r.category))}};
}
inline void from_json(const nlohmann::json& j, PasRecord& r) {
  r.listing_id = j.at("listing_id").get<std::int64_t>();
  r.p = j.at("price").get<double>();
  r.p_hat = j.at("predicted_price").get<double>();
  r.residual = j.at("residual").get<double>();
  r.z = j.at("z").get<double>();
  r.pas = j.at("pas").get<double>();
  r.category = category_from(j.at("category").get<std::string>());
}

inline void to_json(nlohmann::json& j, const CategoryTotals& t) {
  j = {{"Overpriced", t.overpriced}, {"Underpriced", t.underpriced}, {"Fair-priced", t.fair}};
}

inline void to_json(nlohmann::json& j, const Histogram& h) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t b = 0; b < h.bins.size(); ++b) {
    bins.push_back({{"lo", h.edges[b]}, {"hi", h.edges[b + 1]}, {"count", h.bins[b].total()}, {"by_category", h.bins[b]}});
  }
  j = {{"metric", h.metric}, {"min", h.min},   {"max", h.max}, {"skewness", h.skewness},
       {"excess_kurtosis", h.excess_kurtosis}, {"bins", std::move(bins)}};
}

inline void to_json(nlohmann::json& j, const PasSummary& s) {
  j = {{"q", s.q}, {"totals", s.totals}, {"pas", s.pas}, {"z", s.z}};
}

}  // namespace rentpas
