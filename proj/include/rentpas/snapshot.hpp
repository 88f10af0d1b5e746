#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/csv.hpp"
#include "rentpas/evaluation.hpp"
#include "rentpas/explain.hpp"
#include "rentpas/features.hpp"
#include "rentpas/listings.hpp"
#include "rentpas/pas.hpp"
#include "rentpas/regressor.hpp"

namespace rentpas {

inline constexpr const char* kSnapshotVersion = "rentpas-snapshot/1";

// FNV-1a 64, hex encoded.
inline std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string dataset_fingerprint(const std::vector<Listing>& listings) {
  return fingerprint(write_listings_csv(listings));
}

inline std::string schema_fingerprint(const FeatureSchema& schema) { return fingerprint(nlohmann::json(schema).dump()); }

// UTC ISO-8601; honours SOURCE_DATE_EPOCH so builds can be reproducible.
inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct PcaPoint {
  std::int64_t listing_id = 0;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct PcaSummary {
  std::vector<std::string> columns;
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> eigenvalues{};
  std::vector<PcaPoint> points;
};

struct Snapshot {
  std::string version = kSnapshotVersion;
  std::string created_at;
  std::string dataset_fingerprint;
  std::string schema_fingerprint;
  std::uint64_t seed = 0;
  std::size_t folds = 0;
  std::size_t train_n = 0;
  std::size_t test_n = 0;
  std::vector<Listing> listings;
  FeatureSchema schema;
  Model model;
  Metrics holdout;
  std::vector<LeaderboardEntry> leaderboard;  // grid order
  std::vector<RegressorSpec> grid;
  std::vector<ComparisonRow> comparison;
  PasPreconditionReport preconditions;
  ResidualStats stats;
  QConfig q;
  std::vector<PasRecord> records;  // same order as listings
  std::optional<AttributionSummary> attribution;
  std::optional<PcaSummary> pca;
  std::vector<std::string> warnings;
};

struct TrainOptions {
  std::vector<RegressorSpec> grid = default_gbt_grid();
  std::vector<RegressorSpec> baselines = default_baselines();
  std::uint64_t seed = 42;
  std::size_t folds = 10;
  double q = kDefaultQ;
  bool override_preconditions = false;
  std::size_t attribution_top_k = 20;
  std::size_t attribution_rows = 2000;
  std::string created_at;  // empty = now
};

inline std::vector<std::int64_t> listing_ids(const std::vector<Listing>& listings) {
  std::vector<std::int64_t> ids;
  ids.reserve(listings.size());
  for (const auto& l : listings) ids.push_back(l.id);
  return ids;
}

inline std::vector<double> listing_prices(const std::vector<Listing>& listings) {
  std::vector<double> p;
  p.reserve(listings.size());
  for (const auto& l : listings) p.push_back(l.price);
  return p;
}

namespace detail {

inline std::optional<PcaSummary> pca_summary(const DesignMatrix& dm, const FeatureSchema& schema, std::vector<std::string>& warnings) {
  try {
    const auto p = pca_top2(dm.values);
    PcaSummary s;
    s.columns = schema.column_names();
    s.components = p.components;
    s.eigenvalues = p.eigenvalues;
    for (std::size_t r = 0; r < dm.values.rows(); ++r) s.points.push_back({dm.listing_ids[r], p.coords(r, 0), p.coords(r, 1)});
    return s;
  } catch (const Error& e) {
    warnings.push_back(std::string("PCA skipped: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace detail

// Split, grid search on the training rows, holdout evaluation, baseline
// comparison, precondition gate, full refit, scoring, attribution and PCA.
inline Snapshot train_pipeline(const std::vector<Listing>& listings, const TrainOptions& opt) {
  if (listings.size() < 2) throw Error(ErrorKind::EmptyDataset, "training needs at least two listings");
  if (!(opt.q > 0.0)) throw Error(ErrorKind::NonPositiveQ, "q must be positive");
  Snapshot s;
  s.created_at = opt.created_at.empty() ? utc_timestamp() : opt.created_at;
  s.listings = listings;
  s.dataset_fingerprint = dataset_fingerprint(listings);
  s.seed = opt.seed;
  s.folds = opt.folds;
  s.grid = opt.grid;
  s.schema = fit_schema(listings);
  s.schema_fingerprint = schema_fingerprint(s.schema);
  const auto dm = transform(s.schema, listings);

  const auto split = train_test_split(listings.size(), opt.seed);
  s.train_n = split.train.size();
  s.test_n = split.test.size();
  const auto x_train = dm.values.select_rows(split.train);
  const auto y_train = select<double>(dm.target, split.train);
  const auto search = grid_search(opt.grid, x_train, y_train, opt.folds, opt.seed);
  s.leaderboard = search.leaderboard;
  for (const auto& e : search.leaderboard)
    for (const auto& w : e.cv.warnings) s.warnings.push_back("grid[" + std::to_string(e.grid_index) + "] " + w);

  s.holdout = holdout_metrics(search.best, dm.values, dm.target, split, opt.seed);
  auto specs = opt.baselines;
  specs.insert(specs.begin(), search.best);
  s.comparison = compare_models(dm.values, dm.target, split, specs, opt.seed);

  s.preconditions = validate_preconditions(s.holdout, true);
  if (!s.preconditions.passed) {
    std::string why;
    for (const auto& f : s.preconditions.failures) why += (why.empty() ? "" : "; ") + f;
    if (!opt.override_preconditions) throw Error(ErrorKind::PreconditionFailed, why);
    s.preconditions.overridden = true;
    s.warnings.push_back("preconditions overridden: " + why);
  }

  s.model = refit_full(search.best, dm.values, dm.target, opt.seed);
  const auto predicted = s.model.predict_all(dm.values);
  const auto ids = listing_ids(listings);
  const auto prices = listing_prices(listings);
  auto [records, stats] = score_records(ids, prices, predicted, opt.q);
  s.records = std::move(records);
  s.stats = stats;
  s.q = manual_q(opt.q);

  if (const auto* gbt = s.model.trees())
    s.attribution = shap_summary(*gbt, dm.values, s.schema.column_names(), opt.attribution_top_k, opt.attribution_rows);
  s.pca = detail::pca_summary(dm, s.schema, s.warnings);
  return s;
}

// Returns a copy with a new QConfig; pas values are untouched.
inline Snapshot with_q(const Snapshot& s, QConfig q) {
  if (!(q.q > 0.0)) throw Error(ErrorKind::NonPositiveQ, "q must be positive");
  Snapshot out = s;
  out.q = q;
  apply_q(out.records, q.q);
  return out;
}

// New listings scored with the stored schema, model and residual statistics.
struct ScoreResult {
  std::vector<PasRecord> records;
  std::vector<UnseenCategory> unseen;
};

inline ScoreResult score_listings(const Snapshot& s, const std::vector<Listing>& listings) {
  if (listings.empty()) throw Error(ErrorKind::EmptyDataset, "no listings to score");
  const auto dm = transform(s.schema, listings);
  const auto predicted = s.model.predict_all(dm.values);
  const auto ids = listing_ids(listings);
  const auto prices = listing_prices(listings);
  return {score_records(ids, prices, predicted, s.q.q, s.stats).first, dm.unseen};
}

// ---- persistence ----

inline void to_json(nlohmann::json& j, const PcaSummary& p) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : p.points) points.push_back({pt.listing_id, pt.pc1, pt.pc2});
  j = {{"columns", p.columns}, {"components", p.components}, {"eigenvalues", p.eigenvalues}, {"points", std::move(points)}};
}

inline void from_json(const nlohmann::json& j, PcaSummary& p) {
  p.columns = j.at("columns").get<std::vector<std::string>>();
  p.components = j.at("components").get<std::array<std::vector<double>, 2>>();
  p.eigenvalues = j.at("eigenvalues").get<std::array<double, 2>>();
  p.points.clear();
  for (const auto& pt : j.at("points"))
    p.points.push_back({pt.at(0).get<std::int64_t>(), pt.at(1).get<double>(), pt.at(2).get<double>()});
}

inline std::string save_snapshot_string(const Snapshot& s) {
  using oj = nlohmann::ordered_json;
  auto put = [](const auto& v) { return oj(nlohmann::json(v)); };
  oj doc;
  doc["version"] = s.version;
  doc["created_at"] = s.created_at;
  doc["dataset_fingerprint"] = s.dataset_fingerprint;
  doc["schema_fingerprint"] = s.schema_fingerprint;
  doc["residual_space"] = kResidualSpace;
  doc["seed"] = s.seed;
  doc["folds"] = s.folds;
  doc["split"] = {{"fraction", 0.8}, {"train_n", s.train_n}, {"test_n", s.test_n}};
  doc["q"] = put(s.q);
  doc["preconditions"] = put(s.preconditions);
  doc["stats"] = put(s.stats);
  doc["holdout"] = put(s.holdout);
  doc["grid"] = put(s.grid);
  doc["leaderboard"] = put(s.leaderboard);
  doc["comparison"] = put(s.comparison);
  doc["warnings"] = s.warnings;
  doc["schema"] = put(s.schema);
  doc["model"] = put(s.model);
  doc["listings"] = put(s.listings);
  doc["records"] = put(s.records);
  doc["attribution"] = s.attribution ? put(*s.attribution) : oj(nullptr);
  doc["pca"] = s.pca ? put(*s.pca) : oj(nullptr);
  return doc.dump() + "\n";
}

namespace detail {

inline void check_consistent(const Snapshot& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::SnapshotMismatch, why); };
  if (s.version != kSnapshotVersion) fail("unsupported version '" + s.version + "'");
  if (dataset_fingerprint(s.listings) != s.dataset_fingerprint) fail("dataset fingerprint does not match stored listings");
  if (schema_fingerprint(s.schema) != s.schema_fingerprint) fail("schema fingerprint does not match stored schema");
  if (s.records.size() != s.listings.size()) fail("record count differs from listing count");
  if (!(s.q.q > 0.0)) fail("stored q is not positive");
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    if (s.records[i].listing_id != s.listings[i].id) fail("record order differs from listings");
    if (s.records[i].category != classify_one(s.records[i].pas, s.q.q)) fail("stored categories do not match q");
  }
  if (const auto* gbt = s.model.trees(); gbt && gbt->width != s.schema.total_width)
    fail("model width differs from schema width");
}

}  // namespace detail

inline Snapshot load_snapshot_string(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedSnapshot, e.what());
  }
  Snapshot s;
  try {
    s.version = doc.at("version").get<std::string>();
    if (s.version != kSnapshotVersion) throw Error(ErrorKind::SnapshotMismatch, "unsupported version '" + s.version + "'");
    s.created_at = doc.at("created_at").get<std::string>();
    s.dataset_fingerprint = doc.at("dataset_fingerprint").get<std::string>();
    s.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.folds = doc.at("folds").get<std::size_t>();
    s.train_n = doc.at("split").at("train_n").get<std::size_t>();
    s.test_n = doc.at("split").at("test_n").get<std::size_t>();
    s.q = doc.at("q").get<QConfig>();
    s.preconditions = doc.at("preconditions").get<PasPreconditionReport>();
    s.stats = doc.at("stats").get<ResidualStats>();
    s.holdout = doc.at("holdout").get<Metrics>();
    s.grid = doc.at("grid").get<std::vector<RegressorSpec>>();
    s.leaderboard = doc.at("leaderboard").get<std::vector<LeaderboardEntry>>();
    s.comparison = doc.at("comparison").get<std::vector<ComparisonRow>>();
    s.warnings = doc.at("warnings").get<std::vector<std::string>>();
    s.schema = doc.at("schema").get<FeatureSchema>();
    s.model = doc.at("model").get<Model>();
    s.listings = doc.at("listings").get<std::vector<Listing>>();
    s.records = doc.at("records").get<std::vector<PasRecord>>();
    if (!doc.at("attribution").is_null()) s.attribution = doc.at("attribution").get<AttributionSummary>();
    if (!doc.at("pca").is_null()) s.pca = doc.at("pca").get<PcaSummary>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedSnapshot, e.what());
  }
  detail::check_consistent(s);
  return s;
}

inline void save_snapshot(const Snapshot& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileUnreadable, "cannot write " + path);
  out << save_snapshot_string(s);
  if (!out) throw Error(ErrorKind::FileUnreadable, "write failed for " + path);
}

inline Snapshot load_snapshot(const std::string& path) { return load_snapshot_string(csv::read_file(path)); }

// ---- report ----

struct ReportOptions {
  std::optional<double> q;  // overrides the stored q for this report only
  std::size_t top_k = 10;
};

inline nlohmann::json report_json(const Snapshot& snap, const ReportOptions& opt = {}) {
  const Snapshot s = opt.q ? with_q(snap, manual_q(*opt.q)) : snap;
  auto sorted = s.records;
  std::stable_sort(sorted.begin(), sorted.end(), [](const PasRecord& a, const PasRecord& b) { return a.pas > b.pas; });
  std::vector<PasRecord> over, under;
  for (const auto& r : sorted)
    if (r.category == Category::Overpriced && over.size() < opt.top_k) over.push_back(r);
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it)
    if (it->category == Category::Underpriced && under.size() < opt.top_k) under.push_back(*it);
  return {{"residual_space", kResidualSpace},
          {"q", s.q},
          {"preconditions", s.preconditions},
          {"holdout", s.holdout},
          {"comparison", s.comparison},
          {"bedroom_summary", summarize_by_bedrooms(s.listings)},
          {"totals", totals(s.records)},
          {"stats", s.stats},
          {"top_overpriced", over},
          {"top_underpriced", under}};
}

inline std::string report_text(const Snapshot& snap, const ReportOptions& opt = {}) {
  const auto j = report_json(snap, opt);
  std::ostringstream out;
  char buf[256];
  out << "Residual space: " << kResidualSpace << "\n";
  out << "q = " << j["q"]["q"].get<double>()
      << (snap.q.exemplar_id && !opt.q ? " (exemplar " + std::to_string(*snap.q.exemplar_id) + ")" : std::string()) << "\n";
  out << "Preconditions: " << (snap.preconditions.passed ? "passed" : "FAILED")
      << (snap.preconditions.overridden ? " (overridden)" : "") << "\n";
  for (const auto& f : snap.preconditions.failures) out << "  - " << f << "\n";
  out << "\nModel comparison (holdout)\n" << format_comparison_table(snap.comparison);
  out << "\nPrice by bedrooms\n";
  std::snprintf(buf, sizeof buf, "%-8s %7s %10s %10s %10s %10s\n", "Beds", "Count", "Min", "Max", "Median", "Mean");
  out << buf;
  for (const auto& b : summarize_by_bedrooms(snap.listings)) {
    const std::string label = b.bedrooms == 0 ? "Studio" : std::to_string(b.bedrooms);
    std::snprintf(buf, sizeof buf, "%-8s %7lld %10.0f %10.0f %10.1f %10.1f\n", label.c_str(),
                  static_cast<long long>(b.count), b.min, b.max, b.median, b.mean);
    out << buf;
  }
  const auto& t = j["totals"];
  out << "\nCategories: Overpriced " << t["Overpriced"] << ", Underpriced " << t["Underpriced"] << ", Fair-priced "
      << t["Fair-priced"] << "\n";
  auto list = [&](const char* title, const nlohmann::json& rows) {
    out << "\n" << title << "\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "  %8lld  price %9.0f  predicted %9.0f  pas %8.4f\n",
                    static_cast<long long>(r["listing_id"].get<std::int64_t>()), r["price"].get<double>(),
                    r["predicted_price"].get<double>(), r["pas"].get<double>());
      out << buf;
    }
  };
  list("Most overpriced", j["top_overpriced"]);
  list("Most underpriced", j["top_underpriced"]);
  return out.str();
}

}  // namespace rentpas
