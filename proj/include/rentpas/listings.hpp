#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/csv.hpp"
#include "rentpas/error.hpp"

namespace rentpas {

struct RawListing {
  std::string title;
  std::string address;
  std::string price_text;
  std::string details;
  std::string listing_by;
};

struct Listing {
  std::int64_t id = 0;
  double price = 0.0;  // dollars per month
  int beds = 0;        // 0 = studio
  double baths = 1.0;
  std::string location;
  std::string rental_type;
  std::optional<std::string> street;
  std::string address;
  bool baths_imputed = false;

  friend bool operator==(const Listing&, const Listing&) = default;
};

inline void to_json(nlohmann::json& j, const Listing& l) {
  j = {{"id", l.id},
       {"price", l.price},
       {"beds", l.beds},
       {"baths", l.baths},
       {"baths_imputed", l.baths_imputed},
       {"location", l.location},
       {"rental_type", l.rental_type},
       {"street", l.street ? nlohmann::json(*l.street) : nlohmann::json(nullptr)},
       {"address", l.address}};
}

inline void from_json(const nlohmann::json& j, Listing& l) {
  l.id = j.at("id").get<std::int64_t>();
  l.price = j.at("price").get<double>();
  l.beds = j.at("beds").get<int>();
  l.baths = j.at("baths").get<double>();
  l.baths_imputed = j.at("baths_imputed").get<bool>();
  l.location = j.at("location").get<std::string>();
  l.rental_type = j.at("rental_type").get<std::string>();
  const auto& street = j.at("street");
  l.street = street.is_null() ? std::nullopt : std::optional<std::string>(street.get<std::string>());
  l.address = j.at("address").get<std::string>();
}

inline constexpr int kMaxBeds = 20;
inline constexpr double kMaxBaths = 20.0;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool ends_with_icase(std::string_view s, std::string_view suffix) {
  if (suffix.size() > s.size()) return false;
  return lower(s.substr(s.size() - suffix.size())) == lower(suffix);
}

inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Trimmed, whitespace-collapsed, title-cased ("upper  west side" -> "Upper West Side").
inline std::string canonical_location(std::string_view name) {
  std::string out = detail::collapse_spaces(name);
  bool word_start = true;
  for (char& c : out) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalpha(uc)) {
      c = static_cast<char>(word_start ? std::toupper(uc) : std::tolower(uc));
      word_start = false;
    } else {
      word_start = (c == ' ' || c == '-' || c == '/');
    }
  }
  return out;
}

inline std::string canonical_rental_type(std::string_view type) {
  auto out = detail::lower(detail::collapse_spaces(type));
  return out.empty() ? "unspecified" : out;
}

// Accepts "$3,495", "1650", " $2,100/month ".
inline double parse_price(std::string_view price_text) {
  std::string_view s = detail::trim(price_text);
  for (std::string_view suffix : {"/month", "/mo"}) {
    if (detail::ends_with_icase(s, suffix)) {
      s = detail::trim(s.substr(0, s.size() - suffix.size()));
      break;
    }
  }
  std::string cleaned;
  bool negative = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '$' || c == ',') continue;
    if (c == '-' && cleaned.empty() && !negative) {
      negative = true;
      continue;
    }
    cleaned.push_back(c);
  }
  const bool has_digit = std::any_of(cleaned.begin(), cleaned.end(),
                                     [](unsigned char c) { return std::isdigit(c); });
  if (!has_digit) throw Error(ErrorKind::NonNumericPrice, std::string(price_text));
  double value = 0.0;
  const auto* first = cleaned.data();
  const auto* last = cleaned.data() + cleaned.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw Error(ErrorKind::NonNumericPrice, std::string(price_text));
  if (negative) value = -value;
  if (!(value > 0.0)) throw Error(ErrorKind::NonPositivePrice, std::string(price_text));
  return value;
}

// Inverse of parse_price for whole-dollar amounts: 3495 -> "$3,495".
inline std::string format_price(std::int64_t dollars) {
  std::string digits = std::to_string(dollars < 0 ? -dollars : dollars);
  std::string out;
  const auto n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return (dollars < 0 ? "-$" : "$") + out;
}

struct Details {
  int beds = 0;
  double baths = 1.0;
  bool baths_imputed = false;

  friend bool operator==(const Details&, const Details&) = default;
};

inline Details parse_details(std::string_view details) {
  static const std::regex beds_re(R"((\d+(?:\.\d+)?)\s*(?:bedrooms?|beds?)\b)", std::regex::icase);
  static const std::regex baths_re(R"((\d+(?:\.\d+)?)\s*(?:bathrooms?|baths?)\b)", std::regex::icase);
  static const std::regex studio_re(R"(\bstudio\b)", std::regex::icase);

  const std::string text(details);
  Details out;
  std::smatch m;
  if (std::regex_search(text, m, beds_re)) {
    const double beds = std::stod(m[1].str());
    if (beds != std::floor(beds))
      throw Error(ErrorKind::UnparseableDetails, "fractional bedroom count: " + text);
    out.beds = static_cast<int>(beds);
  } else if (std::regex_search(text, studio_re)) {
    out.beds = 0;
  } else {
    throw Error(ErrorKind::UnparseableDetails, text);
  }
  if (std::regex_search(text, m, baths_re)) {
    out.baths = std::stod(m[1].str());
  } else {
    out.baths = 1.0;
    out.baths_imputed = true;
  }
  return out;
}

// "558 Broome Street #7" -> "Broome Street". Only a trailing "#..." unit is stripped.
inline std::optional<std::string> parse_street(std::string_view address) {
  std::string_view s = detail::trim(address);
  if (auto hash = s.find('#'); hash != std::string_view::npos) s = detail::trim(s.substr(0, hash));
  // leading house number, e.g. "558", "12-14", "101A"
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s.front()))) {
    const auto space = s.find_first_of(" \t");
    s = space == std::string_view::npos ? std::string_view{} : detail::trim(s.substr(space));
  }
  auto out = detail::collapse_spaces(s);
  if (out.empty()) return std::nullopt;
  return out;
}

// Titles look like "Rental Unit in Upper West Side"; the last " in " separates
// rental type from neighborhood.
struct TitleParts {
  std::string rental_type;
  std::string location;
};

inline std::optional<TitleParts> parse_title(std::string_view title) {
  const std::string t = detail::lower(title);
  const auto pos = t.rfind(" in ");
  if (pos == std::string::npos) return std::nullopt;
  TitleParts out{canonical_rental_type(title.substr(0, pos)),
                 canonical_location(title.substr(pos + 4))};
  if (out.location.empty()) return std::nullopt;
  return out;
}

enum class SchemaMode { Raw, Processed };

inline const std::vector<std::string>& required_columns(SchemaMode mode) {
  static const std::vector<std::string> raw{"title", "address", "price", "details", "listing_by"};
  static const std::vector<std::string> processed{"price",       "beds",   "baths",  "location",
                                                  "rental_type", "street", "address"};
  return mode == SchemaMode::Raw ? raw : processed;
}

struct DroppedRow {
  std::int64_t row = 0;  // data-row ordinal (the default Listing::id)
  std::string reason;
  std::string detail;
};

struct IngestReport {
  std::int64_t rows_read = 0;
  std::int64_t rows_kept = 0;
  std::int64_t rows_dropped = 0;
  std::int64_t baths_imputed = 0;
  std::vector<DroppedRow> drops;

  std::map<std::string, std::int64_t> reason_counts() const {
    std::map<std::string, std::int64_t> out;
    for (const auto& d : drops) ++out[d.reason];
    return out;
  }
};

inline void to_json(nlohmann::json& j, const IngestReport& r) {
  nlohmann::json drops = nlohmann::json::array();
  for (const auto& d : r.drops) drops.push_back({{"row", d.row}, {"reason", d.reason}, {"detail", d.detail}});
  j = {{"rows_read", r.rows_read},         {"rows_kept", r.rows_kept},
       {"rows_dropped", r.rows_dropped},   {"baths_imputed", r.baths_imputed},
       {"reason_counts", r.reason_counts()}, {"drops", std::move(drops)}};
}

struct IngestResult {
  std::vector<Listing> listings;
  IngestReport report;
};

namespace detail {

inline int parse_int_field(std::string_view s, ErrorKind kind) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v != std::floor(v))
    throw Error(kind, std::string(s));
  return static_cast<int>(v);
}

inline std::optional<double> parse_optional_double(std::string_view s, ErrorKind kind) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) throw Error(kind, std::string(s));
  return v;
}

// Checks the Listing invariants; returns a drop reason when violated.
inline std::optional<std::string> violation(const Listing& l) {
  if (!(l.price > 0.0) || !std::isfinite(l.price)) return "NonPositivePrice";
  if (l.beds < 0 || l.beds > kMaxBeds) return "BedsOutOfRange";
  if (!(l.baths > 0.0) || l.baths > kMaxBaths) return "BathsOutOfRange";
  if (l.location.empty()) return "MissingLocation";
  return std::nullopt;
}

}  // namespace detail

inline bool satisfies_invariants(const Listing& l) { return !detail::violation(l).has_value(); }

inline IngestResult ingest_text(std::string_view text, SchemaMode mode) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw Error(ErrorKind::MissingColumns, "no header row");

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i)
    col.emplace(detail::lower(detail::trim(rows[0][i])), i);
  std::string missing;
  for (const auto& name : required_columns(mode)) {
    if (!col.count(name)) missing += (missing.empty() ? "" : ",") + name;
  }
  if (!missing.empty()) throw Error(ErrorKind::MissingColumns, missing);

  IngestResult out;
  auto& report = out.report;
  std::unordered_set<std::int64_t> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto ordinal = static_cast<std::int64_t>(r - 1);
    ++report.rows_read;
    auto drop = [&](std::string reason, std::string detail) {
      report.drops.push_back({ordinal, std::move(reason), std::move(detail)});
    };
    if (row.size() < rows[0].size()) {
      drop("MalformedRow", "expected " + std::to_string(rows[0].size()) + " fields, got " +
                               std::to_string(row.size()));
      continue;
    }
    auto field = [&](const char* name) -> const std::string& { return row[col.at(name)]; };

    Listing l;
    l.id = ordinal;
    try {
      if (mode == SchemaMode::Processed && col.count("id")) {
        const auto id = detail::trim(field("id"));
        auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), l.id);
        if (id.empty() || ec != std::errc() || ptr != id.data() + id.size()) {
          drop("MalformedId", std::string(id));
          continue;
        }
      }
      l.address = std::string(detail::trim(field("address")));
      l.price = parse_price(field("price"));
      if (mode == SchemaMode::Raw) {
        const auto d = parse_details(field("details"));
        l.beds = d.beds;
        l.baths = d.baths;
        l.baths_imputed = d.baths_imputed;
        auto title = parse_title(field("title"));
        if (!title) {
          drop("UnparseableTitle", field("title"));
          continue;
        }
        l.location = title->location;
        l.rental_type = title->rental_type;
        l.street = parse_street(l.address);
      } else {
        l.beds = detail::parse_int_field(field("beds"), ErrorKind::UnparseableDetails);
        if (auto baths = detail::parse_optional_double(field("baths"), ErrorKind::UnparseableDetails)) {
          l.baths = *baths;
        } else {
          l.baths = 1.0;
          l.baths_imputed = true;
        }
        l.location = canonical_location(field("location"));
        l.rental_type = canonical_rental_type(field("rental_type"));
        auto street = detail::collapse_spaces(field("street"));
        l.street = street.empty() ? parse_street(l.address) : std::optional<std::string>(street);
      }
    } catch (const Error& e) {
      drop(std::string(e.name()), e.what());
      continue;
    }
    if (auto why = detail::violation(l)) {
      drop(*why, "");
      continue;
    }
    if (!seen_ids.insert(l.id).second) {
      drop("DuplicateId", std::to_string(l.id));
      continue;
    }
    if (l.baths_imputed) ++report.baths_imputed;
    out.listings.push_back(std::move(l));
  }
  report.rows_kept = static_cast<std::int64_t>(out.listings.size());
  report.rows_dropped = static_cast<std::int64_t>(report.drops.size());
  return out;
}

inline IngestResult ingest_csv(const std::string& path, SchemaMode mode) {
  return ingest_text(csv::read_file(path), mode);
}

// Processed-schema CSV with a leading id column; ingest_text(write_listings_csv(L),
// Processed) reproduces L exactly.
inline std::string write_listings_csv(const std::vector<Listing>& listings) {
  auto header = required_columns(SchemaMode::Processed);
  header.insert(header.begin(), "id");
  std::string out = csv::format_row(header);
  char buf[64];
  for (const auto& l : listings) {
    auto res = std::to_chars(buf, buf + sizeof buf, l.price);
    std::string price(buf, res.ptr);
    res = std::to_chars(buf, buf + sizeof buf, l.baths);
    std::string baths = l.baths_imputed ? std::string() : std::string(buf, res.ptr);
    out += csv::format_row({std::to_string(l.id), price, std::to_string(l.beds), baths, l.location, l.rental_type,
                            l.street.value_or(""), l.address});
  }
  return out;
}

struct BedroomSummary {
  int bedrooms = 0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double mean = 0.0;
  std::optional<double> std_dev;  // sample (n-1); absent when count == 1
  std::int64_t count = 0;
};

inline std::vector<BedroomSummary> summarize_by_bedrooms(const std::vector<Listing>& listings) {
  if (listings.empty()) throw Error(ErrorKind::EmptyDataset, "summarize_by_bedrooms");
  std::map<int, std::vector<double>> by_beds;
  for (const auto& l : listings) by_beds[l.beds].push_back(l.price);

  std::vector<BedroomSummary> out;
  for (auto& [beds, prices] : by_beds) {
    std::sort(prices.begin(), prices.end());
    const auto n = prices.size();
    BedroomSummary s;
    s.bedrooms = beds;
    s.count = static_cast<std::int64_t>(n);
    s.min = prices.front();
    s.max = prices.back();
    s.median = n % 2 ? prices[n / 2] : 0.5 * (prices[n / 2 - 1] + prices[n / 2]);
    double sum = 0.0;
    for (double p : prices) sum += p;
    s.mean = sum / static_cast<double>(n);
    if (n >= 2) {
      double ss = 0.0;
      for (double p : prices) ss += (p - s.mean) * (p - s.mean);
      s.std_dev = std::sqrt(ss / static_cast<double>(n - 1));
    }
    out.push_back(s);
  }
  return out;
}

inline void to_json(nlohmann::json& j, const BedroomSummary& s) {
  j = {{"bedrooms", s.bedrooms}, {"min", s.min},   {"max", s.max},
       {"median", s.median},     {"mean", s.mean}, {"count", s.count}};
  j["std_dev"] = s.std_dev ? nlohmann::json(*s.std_dev) : nlohmann::json(nullptr);
}

enum class CountKey { Street, Location };

inline std::vector<std::pair<std::string, std::int64_t>> top_counts(const std::vector<Listing>& listings,
                                                                     CountKey key, std::size_t k) {
  if (k < 1) throw Error(ErrorKind::BadK, "top_counts requires k >= 1");
  if (listings.empty()) throw Error(ErrorKind::EmptyDataset, "top_counts");
  std::map<std::string, std::int64_t> counts;
  for (const auto& l : listings) {
    if (key == CountKey::Location) ++counts[l.location];
    else if (l.street) ++counts[*l.street];
  }
  std::vector<std::pair<std::string, std::int64_t>> out(counts.begin(), counts.end());
  // map order is lexicographic already; stable sort keeps it for ties
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace rentpas
