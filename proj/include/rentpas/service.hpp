#pragma once

#include <algorithm>
#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rentpas/snapshot.hpp"

namespace rentpas {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using QueryParams = std::multimap<std::string, std::string>;

// Read-only snapshot API. Readers take a reference to the current snapshot;
// /api/q builds a new one and swaps it in, so a request never sees a mix.
class Service {
 public:
  explicit Service(Snapshot snapshot) : current_(std::make_shared<const Snapshot>(std::move(snapshot))) {}

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  Response handle(const std::string& method, const std::string& path, const QueryParams& params = {},
                  const std::string& body = {}) {
    try {
      if (method == "GET") {
        if (path == "/api/snapshot") return ok(snapshot_info(*snapshot()));
        if (path == "/api/listings") return ok(listings(*snapshot(), params));
        if (path == "/api/histogram") return ok(histogram(*snapshot(), params));
        if (path == "/api/pca") return pca(*snapshot());
        if (path == "/api/attribution") return attribution(*snapshot());
      } else if (method == "POST" && path == "/api/q") {
        return ok(update_q(body));
      }
      return error(404, "NotFound", method + " " + path);
    } catch (const Error& e) {
      return error(status_for(e.kind()), std::string(e.name()), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(400, "MalformedRequest", e.what());
    }
  }

 private:
  static Response ok(const nlohmann::json& j) { return {200, j.dump(), "application/json"}; }

  static Response error(int status, const std::string& name, const std::string& message) {
    return {status, nlohmann::json{{"error", name}, {"message", message}}.dump(), "application/json"};
  }

  static int status_for(ErrorKind k) { return k == ErrorKind::UnknownListing ? 404 : 400; }

  static std::optional<std::string> param(const QueryParams& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end() || it->second.empty()) return std::nullopt;
    return it->second;
  }

  static double number_param(const QueryParams& p, const std::string& key, double fallback) {
    auto v = param(p, key);
    if (!v) return fallback;
    double out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out))
      throw Error(ErrorKind::InvalidSpec, key + " must be a number");
    return out;
  }

  static std::size_t count_param(const QueryParams& p, const std::string& key, std::size_t fallback) {
    const double v = number_param(p, key, static_cast<double>(fallback));
    if (v < 0 || v != std::floor(v)) throw Error(ErrorKind::InvalidSpec, key + " must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  static nlohmann::json snapshot_info(const Snapshot& s) {
    return {{"version", s.version},
            {"created_at", s.created_at},
            {"dataset_fingerprint", s.dataset_fingerprint},
            {"residual_space", kResidualSpace},
            {"n", s.records.size()},
            {"seed", s.seed},
            {"folds", s.folds},
            {"train_n", s.train_n},
            {"test_n", s.test_n},
            {"model", s.model.spec()},
            {"q", s.q},
            {"preconditions", s.preconditions},
            {"holdout", s.holdout},
            {"comparison", s.comparison},
            {"stats", s.stats},
            {"totals", totals(s.records)},
            {"warnings", s.warnings}};
  }

  static nlohmann::json listings(const Snapshot& s, const QueryParams& p) {
    std::optional<Category> filter;
    if (auto c = param(p, "category")) {
      try {
        filter = category_from(*c);
      } catch (const Error&) {
        throw Error(ErrorKind::InvalidSpec, "category must be Overpriced, Underpriced or Fair-priced");
      }
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < s.records.size(); ++i)
      if (!filter || s.records[i].category == *filter) rows.push_back(i);

    const auto sort = param(p, "sort");
    const auto order = param(p, "order").value_or("desc");
    if (order != "asc" && order != "desc") throw Error(ErrorKind::InvalidSpec, "order must be asc or desc");
    if (sort) {
      double PasRecord::*key = nullptr;
      if (*sort == "pas") key = &PasRecord::pas;
      else if (*sort == "price") key = &PasRecord::p;
      else throw Error(ErrorKind::InvalidSpec, "sort must be pas or price");
      std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        return order == "asc" ? s.records[a].*key < s.records[b].*key : s.records[a].*key > s.records[b].*key;
      });
    }
    const auto offset = count_param(p, "offset", 0);
    const auto limit = count_param(p, "limit", 100);
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t k = offset; k < rows.size() && k < offset + limit; ++k) {
      const auto i = rows[k];
      nlohmann::json item = s.records[i];
      const auto& l = s.listings[i];
      item["address"] = l.address;
      item["location"] = l.location;
      item["rental_type"] = l.rental_type;
      item["beds"] = l.beds;
      item["baths"] = l.baths;
      items.push_back(std::move(item));
    }
    return {{"total", rows.size()}, {"offset", offset}, {"limit", limit}, {"q", s.q.q}, {"items", std::move(items)}};
  }

  static nlohmann::json histogram(const Snapshot& s, const QueryParams& p) {
    const auto metric = param(p, "metric").value_or("pas");
    if (metric != "pas" && metric != "z") throw Error(ErrorKind::InvalidSpec, "metric must be pas or z");
    const auto bins = count_param(p, "bins", 30);
    const double q = number_param(p, "q", s.q.q);
    if (!(q > 0.0)) throw Error(ErrorKind::NonPositiveQ, "q must be positive");
    const auto summary = pas_summary(s.records, q, bins);
    return {{"metric", metric}, {"q", q}, {"n", s.records.size()}, {"totals", summary.totals},
            {"histogram", metric == "pas" ? summary.pas : summary.z}};
  }

  static Response pca(const Snapshot& s) {
    if (!s.pca) return error(404, "NotAvailable", "snapshot has no PCA projection");
    std::unordered_map<std::int64_t, const PasRecord*> by_id;
    for (const auto& r : s.records) by_id.emplace(r.listing_id, &r);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& pt : s.pca->points) {
      const auto* r = by_id.at(pt.listing_id);
      points.push_back({{"listing_id", pt.listing_id}, {"pc1", pt.pc1}, {"pc2", pt.pc2}, {"pas", r->pas},
                        {"category", std::string(to_string(r->category))}});
    }
    return ok({{"q", s.q.q}, {"columns", s.pca->columns}, {"eigenvalues", s.pca->eigenvalues},
               {"components", s.pca->components}, {"points", std::move(points)}});
  }

  static Response attribution(const Snapshot& s) {
    if (!s.attribution) return error(404, "NotAvailable", "selected model has no tree attribution");
    return ok(*s.attribution);
  }

  nlohmann::json update_q(const std::string& body) {
    const auto j = nlohmann::json::parse(body);
    std::lock_guard writer(write_mu_);  // one update at a time; readers are never blocked by the rebuild
    const auto base = snapshot();
    QConfig q;
    if (j.contains("exemplar_id")) q = calibrate_q(base->records, j.at("exemplar_id").get<std::int64_t>());
    else if (j.contains("q") && j.at("q").is_number()) q = manual_q(j.at("q").get<double>());
    else throw Error(ErrorKind::InvalidSpec, "body must be {\"q\": number} or {\"exemplar_id\": id}");
    auto next = std::make_shared<const Snapshot>(with_q(*base, q));
    const auto t = totals(next->records);
    {
      std::lock_guard lock(mu_);
      current_ = std::move(next);
    }
    return {{"q", q}, {"totals", t}};
  }

  mutable std::mutex mu_;
  std::mutex write_mu_;
  std::shared_ptr<const Snapshot> current_;
};

}  // namespace rentpas
