#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/matrix.hpp"
#include "rentpas/tree.hpp"

namespace rentpas {

struct AttributionRow {
  std::int64_t listing_id = 0;
  std::vector<double> contributions;  // log-price units, one per column
  double base = 0.0;                  // cover-weighted expected model output
};

namespace detail {

// Path-dependent tree SHAP: for each leaf, the set of features on the root
// path is tracked with the fraction of "zero" (feature unknown, follow cover)
// and "one" (feature known, follow x) paths, and the Shapley weights of all
// subset sizes are updated incrementally.
class TreeShap {
 public:
  TreeShap(const Tree& tree, double scale, std::span<const double> row, std::span<double> phi)
      : tree_(tree), scale_(scale), row_(row), phi_(phi) {}

  void run() {
    if (tree_.nodes.empty()) return;
    std::vector<PathElement> path;
    recurse(0, path, 1.0, 1.0, -1);
  }

 private:
  struct PathElement {
    int feature;
    double zero_fraction;
    double one_fraction;
    double weight;
  };

  static void extend(std::vector<PathElement>& path, double zero_fraction, double one_fraction, int feature) {
    const auto depth = path.size();
    path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
      path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
      path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
    }
  }

  static void unwind(std::vector<PathElement>& path, std::size_t index) {
    const auto depth = path.size() - 1;
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const auto d1 = static_cast<double>(depth + 1);
    double next_one = path[depth].weight;
    for (std::size_t i = depth; i-- > 0;) {
      if (one != 0.0) {
        const double tmp = path[i].weight;
        path[i].weight = next_one * d1 / (static_cast<double>(i + 1) * one);
        next_one = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
      } else {
        path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
      }
    }
    for (std::size_t i = index; i < depth; ++i) {
      path[i].feature = path[i + 1].feature;
      path[i].zero_fraction = path[i + 1].zero_fraction;
      path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop_back();
  }

  // sum of path weights with element `index` removed, without modifying the path
  static double unwound_sum(const std::vector<PathElement>& path, std::size_t index) {
    const auto depth = path.size() - 1;
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const auto d1 = static_cast<double>(depth + 1);
    double next_one = path[depth].weight;
    double total = 0.0;
    for (std::size_t i = depth; i-- > 0;) {
      if (one != 0.0) {
        const double tmp = next_one * d1 / (static_cast<double>(i + 1) * one);
        total += tmp;
        next_one = path[i].weight - tmp * zero * static_cast<double>(depth - i) / d1;
      } else {
        total += path[i].weight / zero / (static_cast<double>(depth - i) / d1);
      }
    }
    return total;
  }

  void recurse(int node_index, std::vector<PathElement> path, double zero_fraction, double one_fraction, int feature) {
    extend(path, zero_fraction, one_fraction, feature);
    const auto& node = tree_.nodes[static_cast<std::size_t>(node_index)];
    if (node.is_leaf()) {
      const double value = scale_ * node.weight;
      for (std::size_t i = 1; i < path.size(); ++i) {
        const double w = unwound_sum(path, i);
        const auto& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * value;
      }
      return;
    }
    const bool go_left = row_[static_cast<std::size_t>(node.feature)] < node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double cover = node.cover;
    const double hot_zero = cover > 0 ? tree_.nodes[static_cast<std::size_t>(hot)].cover / cover : 0.5;
    const double cold_zero = cover > 0 ? tree_.nodes[static_cast<std::size_t>(cold)].cover / cover : 0.5;

    double incoming_zero = 1.0, incoming_one = 1.0;
    // a feature seen earlier on this path is merged into one path element
    for (std::size_t i = 1; i < path.size(); ++i) {
      if (path[i].feature == node.feature) {
        incoming_zero = path[i].zero_fraction;
        incoming_one = path[i].one_fraction;
        unwind(path, i);
        break;
      }
    }
    recurse(hot, path, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, std::move(path), cold_zero * incoming_zero, 0.0, node.feature);
  }

  const Tree& tree_;
  double scale_;
  std::span<const double> row_;
  std::span<double> phi_;
};

inline double expected_value(const Tree& t, std::size_t i = 0) {
  const auto& n = t.nodes[i];
  if (n.is_leaf()) return n.weight;
  const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
  if (n.cover <= 0) return 0.5 * (expected_value(t, static_cast<std::size_t>(n.left)) + expected_value(t, static_cast<std::size_t>(n.right)));
  return (l.cover * expected_value(t, static_cast<std::size_t>(n.left)) +
          r.cover * expected_value(t, static_cast<std::size_t>(n.right))) / n.cover;
}

}  // namespace detail

inline double expected_output(const GbtModel& model) {
  double s = 0.0;
  for (const auto& t : model.trees) s += detail::expected_value(t);
  return model.base_score + model.learning_rate * s;
}

// base + sum(contributions) reproduces gbt_predict(model, row).
inline AttributionRow shap_values(const GbtModel& model, std::span<const double> row, std::int64_t listing_id = 0) {
  if (row.size() != model.width)
    throw Error(ErrorKind::WidthMismatch,
                "row has " + std::to_string(row.size()) + " columns, model expects " + std::to_string(model.width));
  AttributionRow out;
  out.listing_id = listing_id;
  out.contributions.assign(row.size(), 0.0);
  out.base = expected_output(model);
  for (const auto& t : model.trees) detail::TreeShap(t, model.learning_rate, row, out.contributions).run();
  return out;
}

struct FeatureAttribution {
  std::size_t feature = 0;
  std::string name;
  double mean_abs = 0.0;
  double mean_signed = 0.0;
  std::vector<std::pair<double, double>> samples;  // (feature value, shap) for beeswarm plots
};

struct AttributionSummary {
  double base = 0.0;
  std::size_t rows_used = 0;
  std::vector<FeatureAttribution> features;  // descending mean |shap|
};

// Ranks features by mean |shap| over the rows of `x`. When `max_rows` is below
// the row count an evenly spaced subset is used; `max_samples` caps the
// per-feature beeswarm pairs.
inline AttributionSummary shap_summary(const GbtModel& model, const Matrix& x, const std::vector<std::string>& names,
                                       std::size_t top_k, std::size_t max_rows = SIZE_MAX,
                                       std::size_t max_samples = 500) {
  if (x.empty()) throw Error(ErrorKind::EmptyDataset, "shap_summary");
  std::vector<std::size_t> rows;
  const std::size_t n = x.rows();
  const std::size_t used = std::min(n, std::max<std::size_t>(1, max_rows));
  for (std::size_t i = 0; i < used; ++i) rows.push_back(i * n / used);

  const auto d = x.cols();
  std::vector<double> abs_sum(d, 0.0), signed_sum(d, 0.0);
  std::vector<std::vector<std::pair<double, double>>> samples(d);
  const std::size_t sample_stride = std::max<std::size_t>(1, (rows.size() + max_samples - 1) / std::max<std::size_t>(1, max_samples));
  AttributionSummary s;
  s.base = expected_output(model);
  s.rows_used = rows.size();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = x.row(rows[k]);
    const auto a = shap_values(model, row);
    for (std::size_t f = 0; f < d; ++f) {
      abs_sum[f] += std::abs(a.contributions[f]);
      signed_sum[f] += a.contributions[f];
      if (k % sample_stride == 0) samples[f].emplace_back(row[f], a.contributions[f]);
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    const auto m = static_cast<double>(rows.size());
    s.features.push_back({f, f < names.size() ? names[f] : "f" + std::to_string(f), abs_sum[f] / m,
                          signed_sum[f] / m, std::move(samples[f])});
  }
  std::stable_sort(s.features.begin(), s.features.end(),
                   [](const FeatureAttribution& a, const FeatureAttribution& b) { return a.mean_abs > b.mean_abs; });
  if (s.features.size() > top_k) s.features.resize(top_k);
  return s;
}

struct PcaProjection {
  std::array<std::vector<double>, 2> components;  // unit vectors of width d
  std::array<double, 2> eigenvalues{};            // descending, non-negative
  std::vector<double> mean;                       // column means
  std::vector<double> scale;                      // column divisor (1 when not standardized or constant)
  Matrix coords;                                  // n x 2

  // Maps a data row into component space.
  std::array<double, 2> project(std::span<const double> row) const {
    std::array<double, 2> out{};
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double v = (row[j] - mean[j]) / scale[j];
      out[0] += v * components[0][j];
      out[1] += v * components[1][j];
    }
    return out;
  }

  std::vector<double> reconstruct(std::array<double, 2> c) const {
    std::vector<double> out(mean.size());
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = (c[0] * components[0][j] + c[1] * components[1][j]) * scale[j] + mean[j];
    return out;
  }
};

struct PcaOptions {
  bool standardize = true;  // divide centered columns by their sample std (constant columns untouched)
  std::size_t max_iterations = 20000;
  double tolerance = 1e-15;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

// Dominant eigenpair of a symmetric PSD matrix by power iteration, kept
// orthogonal to `against`.
inline std::pair<double, Eigen::VectorXd> power_iteration(const Eigen::MatrixXd& a, const std::vector<Eigen::VectorXd>& against,
                                                          const PcaOptions& opt, std::mt19937_64& rng) {
  const auto d = a.rows();
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = g(rng);
  auto orthogonalize = [&](Eigen::VectorXd& x) {
    for (const auto& u : against) x -= u.dot(x) * u;
  };
  orthogonalize(v);
  v.normalize();
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    Eigen::VectorXd w = a * v;
    orthogonalize(w);
    const double norm = w.norm();
    if (norm == 0.0) break;  // remaining spectrum is zero; any orthogonal unit vector will do
    w /= norm;
    if (w.dot(v) < 0) w = -w;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < opt.tolerance) break;
  }
  const double lambda = std::max(0.0, v.dot(a * v));
  return {lambda, v};
}

inline void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
  if (v(arg) < 0) v = -v;
}

}  // namespace detail

// Top two principal components of the (optionally standardized) columns via
// power iteration with deflation. Sign: largest-magnitude entry is positive.
inline PcaProjection pca_top2(const Matrix& x, const PcaOptions& opt = {}) {
  if (x.rows() < 2 || x.cols() < 2) throw Error(ErrorKind::DegenerateMatrix, "pca needs n >= 2 and d >= 2");
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  Eigen::MatrixXd z(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) z(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));

  PcaProjection out;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  out.mean.assign(mean.data(), mean.data() + d);
  out.scale.assign(static_cast<std::size_t>(d), 1.0);
  bool all_constant = true;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double sd = std::sqrt(z.col(c).squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0) {
      all_constant = false;
      if (opt.standardize) {
        z.col(c) /= sd;
        out.scale[static_cast<std::size_t>(c)] = sd;
      }
    }
  }
  if (all_constant) throw Error(ErrorKind::DegenerateMatrix, "all rows are identical");

  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  std::mt19937_64 rng(opt.seed);
  std::vector<Eigen::VectorXd> found;
  Eigen::MatrixXd deflated = cov;
  for (int k = 0; k < 2; ++k) {
    auto [lambda, v] = detail::power_iteration(deflated, found, opt, rng);
    detail::fix_sign(v);
    out.eigenvalues[static_cast<std::size_t>(k)] = lambda;
    out.components[static_cast<std::size_t>(k)].assign(v.data(), v.data() + d);
    deflated -= lambda * v * v.transpose();
    found.push_back(v);
  }
  if (out.eigenvalues[1] > out.eigenvalues[0]) {
    std::swap(out.eigenvalues[0], out.eigenvalues[1]);
    std::swap(out.components[0], out.components[1]);
  }

  out.coords = Matrix(x.rows(), 2);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto c = out.project(x.row(r));
    out.coords(r, 0) = c[0];
    out.coords(r, 1) = c[1];
  }
  return out;
}

inline void to_json(nlohmann::json& j, const FeatureAttribution& f) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& [v, s] : f.samples) samples.push_back({v, s});
  j = {{"feature", f.feature}, {"name", f.name}, {"mean_abs_shap", f.mean_abs}, {"mean_shap", f.mean_signed},
       {"samples", std::move(samples)}};
}

inline void from_json(const nlohmann::json& j, FeatureAttribution& f) {
  f.feature = j.at("feature").get<std::size_t>();
  f.name = j.at("name").get<std::string>();
  f.mean_abs = j.at("mean_abs_shap").get<double>();
  f.mean_signed = j.at("mean_shap").get<double>();
  f.samples.clear();
  for (const auto& s : j.at("samples")) f.samples.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
}

inline void to_json(nlohmann::json& j, const AttributionSummary& s) {
  j = {{"base", s.base}, {"rows_used", s.rows_used}, {"features", s.features}};
}

inline void from_json(const nlohmann::json& j, AttributionSummary& s) {
  s.base = j.at("base").get<double>();
  s.rows_used = j.at("rows_used").get<std::size_t>();
  s.features = j.at("features").get<std::vector<FeatureAttribution>>();
}

}  // namespace rentpas
