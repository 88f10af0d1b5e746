#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "rentpas/error.hpp"
#include "rentpas/matrix.hpp"
#include "rentpas/spec.hpp"

namespace rentpas {

// Internal node: go left iff row[feature] < threshold. Leaf: feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf value before shrinkage
  double cover = 0.0;   // training rows routed through this node

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return i;
  }
  double predict(std::span<const double> row) const { return nodes[leaf_index(row)].weight; }

  int depth() const { return depth_from(0); }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  int depth_from(std::size_t i) const {
    const auto& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }
};

// Additive tree ensemble: prediction = base_score + learning_rate * sum of leaves.
// A single CART is stored the same way with learning_rate 1 and base = mean.
struct GbtModel {
  RegressorSpec spec;
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::size_t width = 0;
  std::vector<Tree> trees;
  bool degenerate_target = false;

  double predict(std::span<const double> row) const {
    if (row.size() != width)
      throw Error(ErrorKind::WidthMismatch,
                  "row has " + std::to_string(row.size()) + " columns, model expects " + std::to_string(width));
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(row);
    return base_score + learning_rate * sum;
  }

  friend bool operator==(const GbtModel&, const GbtModel&) = default;
};

struct TreeParams {
  int max_depth = 4;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
};

namespace detail {

// Exact split finding over the distinct values of each feature. Each column is
// stored as bin indices into its sorted unique values; rows only list the bins
// that differ from the column's most common value, so one-hot columns cost
// nothing for rows outside the category. Stats of the common bin come from
// node totals.
class BinnedColumns {
 public:
  explicit BinnedColumns(const Matrix& x) : cols_(x.cols()) {
    const std::size_t n = x.rows();
    values_.resize(cols_);
    default_bin_.resize(cols_);
    offset_.resize(cols_ + 1, 0);
    std::vector<std::vector<std::uint32_t>> bin_of(cols_, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < cols_; ++f) {
      auto& vals = values_[f];
      vals.reserve(n);
      for (std::size_t r = 0; r < n; ++r) vals.push_back(x(r, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      std::vector<std::size_t> counts(vals.size(), 0);
      for (std::size_t r = 0; r < n; ++r) {
        auto b = static_cast<std::uint32_t>(std::lower_bound(vals.begin(), vals.end(), x(r, f)) - vals.begin());
        bin_of[f][r] = b;
        ++counts[b];
      }
      // most common bin; lowest index on ties
      default_bin_[f] = static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      offset_[f + 1] = offset_[f] + vals.size();
    }
    row_start_.assign(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < cols_; ++f)
        if (bin_of[f][r] != default_bin_[f]) entries_.push_back({static_cast<std::uint32_t>(f), bin_of[f][r]});
      row_start_[r + 1] = entries_.size();
    }
  }

  struct Entry {
    std::uint32_t feature;
    std::uint32_t bin;
  };

  std::size_t cols() const noexcept { return cols_; }
  std::size_t total_bins() const noexcept { return offset_.back(); }
  std::size_t offset(std::size_t f) const noexcept { return offset_[f]; }
  std::uint32_t default_bin(std::size_t f) const noexcept { return default_bin_[f]; }
  const std::vector<double>& values(std::size_t f) const noexcept { return values_[f]; }
  std::span<const Entry> row(std::size_t r) const {
    return {entries_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
  }
  // bin of (r, f)
  std::uint32_t bin(std::size_t r, std::size_t f) const {
    for (const auto& e : row(r))
      if (e.feature == f) return e.bin;
    return default_bin_[f];
  }

 private:
  std::size_t cols_;
  std::vector<std::vector<double>> values_;
  std::vector<std::uint32_t> default_bin_;
  std::vector<std::size_t> offset_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> row_start_;
};

struct SplitCandidate {
  bool found = false;
  double gain = 0.0;
  std::size_t feature = 0;
  std::uint32_t last_left_bin = 0;  // rows with bin <= this go left
  double threshold = 0.0;
};

inline double leaf_weight(double g, double h, double lambda) { return h + lambda > 0 ? -g / (h + lambda) : 0.0; }

inline double score(double g, double h, double lambda) { return h + lambda > 0 ? g * g / (h + lambda) : 0.0; }

// Grows one regression tree on `rows` against per-row gradients (hessians all 1).
class TreeGrower {
 public:
  TreeGrower(const BinnedColumns& bins, std::span<const double> grad, TreeParams params)
      : bins_(bins), grad_(grad), params_(params), hist_g_(bins.total_bins()), hist_h_(bins.total_bins()) {}

  Tree grow(std::vector<std::size_t> rows) {
    Tree tree;
    grow_node(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow_node(Tree& tree, std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g = 0.0;
    double gmin = grad_[rows.front()];
    double gmax = gmin;
    for (auto r : rows) {
      g += grad_[r];
      gmin = std::min(gmin, grad_[r]);
      gmax = std::max(gmax, grad_[r]);
    }
    const auto h = static_cast<double>(rows.size());
    tree.nodes[index].cover = h;
    tree.nodes[index].weight = leaf_weight(g, h, params_.lambda);

    // identical gradients admit no split with positive gain
    if (depth >= params_.max_depth || gmin == gmax) return index;
    const auto split = best_split(rows, g, h);
    if (!split.found) return index;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (bins_.bin(r, split.feature) <= split.last_left_bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    auto& node = tree.nodes[index];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.weight = 0.0;
    const int l = grow_node(tree, std::move(left), depth + 1);
    const int r = grow_node(tree, std::move(right), depth + 1);
    tree.nodes[index].left = l;
    tree.nodes[index].right = r;
    return index;
  }

  SplitCandidate best_split(const std::vector<std::size_t>& rows, double g_total, double h_total) {
    std::fill(hist_g_.begin(), hist_g_.end(), 0.0);
    std::fill(hist_h_.begin(), hist_h_.end(), 0.0);
    for (auto r : rows) {
      for (const auto& e : bins_.row(r)) {
        const auto slot = bins_.offset(e.feature) + e.bin;
        hist_g_[slot] += grad_[r];
        hist_h_[slot] += 1.0;
      }
    }
    const double parent = score(g_total, h_total, params_.lambda);
    SplitCandidate best;
    for (std::size_t f = 0; f < bins_.cols(); ++f) {
      const auto base = bins_.offset(f);
      const auto& vals = bins_.values(f);
      const auto nb = vals.size();
      // fill in the common bin from node totals
      double g_other = 0.0, h_other = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (b == bins_.default_bin(f)) continue;
        g_other += hist_g_[base + b];
        h_other += hist_h_[base + b];
      }
      const auto d = base + bins_.default_bin(f);
      hist_g_[d] = g_total - g_other;
      hist_h_[d] = h_total - h_other;

      double g_left = 0.0, h_left = 0.0;
      std::ptrdiff_t prev = -1;  // last non-empty bin seen
      for (std::size_t b = 0; b < nb; ++b) {
        if (hist_h_[base + b] <= 0.0) continue;
        if (prev >= 0) {
          const double g_right = g_total - g_left;
          const double h_right = h_total - h_left;
          if (h_left >= params_.min_child_weight && h_right >= params_.min_child_weight) {
            const double gain =
                0.5 * (score(g_left, h_left, params_.lambda) + score(g_right, h_right, params_.lambda) - parent) -
                params_.gamma;
            if (gain > 0.0 && (!best.found || gain > best.gain)) {
              best.found = true;
              best.gain = gain;
              best.feature = f;
              best.last_left_bin = static_cast<std::uint32_t>(prev);
              best.threshold = 0.5 * (vals[static_cast<std::size_t>(prev)] + vals[b]);
            }
          }
        }
        g_left += hist_g_[base + b];
        h_left += hist_h_[base + b];
        prev = static_cast<std::ptrdiff_t>(b);
      }
    }
    return best;
  }

  const BinnedColumns& bins_;
  std::span<const double> grad_;
  TreeParams params_;
  std::vector<double> hist_g_;
  std::vector<double> hist_h_;
};

inline bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

// Second-order boosting on squared error: g = pred - y, h = 1, leaf = -G/(H+lambda),
// gain = (G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l))/2 - gamma.
inline GbtModel gbt_fit(const Matrix& x, std::span<const double> y, const RegressorSpec& spec, std::uint64_t seed) {
  if (spec.kind != RegressorKind::Gbt) throw Error(ErrorKind::InvalidSpec, "gbt_fit needs a gbt spec");
  spec.validate();
  if (x.empty()) throw Error(ErrorKind::EmptyDataset, "gbt_fit");
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");

  GbtModel model;
  model.spec = spec;
  model.width = x.cols();
  model.learning_rate = spec.get("learning_rate");
  if (detail::all_equal(y)) {
    model.base_score = y.front();
    model.degenerate_target = true;
    return model;
  }
  model.base_score = detail::mean_of(y);

  const auto rounds = static_cast<std::size_t>(spec.get("rounds"));
  const double subsample = spec.get("subsample");
  const TreeParams params{static_cast<int>(spec.get("max_depth")), spec.get("lambda"), spec.get("gamma"),
                          spec.get("min_child_weight")};
  const std::size_t n = x.rows();
  const auto n_sample =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(subsample * static_cast<double>(n))));

  const detail::BinnedColumns bins(x);
  std::vector<double> pred(n, model.base_score);
  std::vector<double> grad(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  model.trees.reserve(rounds);
  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
    std::vector<std::size_t> rows;
    if (n_sample < n) {
      // partial Fisher-Yates, then restore ascending order
      std::vector<std::size_t> pool = all;
      for (std::size_t i = 0; i < n_sample; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_sample));
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all;
    }
    detail::TreeGrower grower(bins, grad, params);
    Tree tree = grower.grow(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) pred[i] += model.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// Single squared-error CART: the boosting grower with lambda = gamma = 0 and one
// round at learning rate 1, so each leaf holds its node mean.
inline GbtModel tree_fit(const Matrix& x, std::span<const double> y, const RegressorSpec& spec) {
  if (spec.kind != RegressorKind::DecisionTree) throw Error(ErrorKind::InvalidSpec, "tree_fit needs a decision_tree spec");
  spec.validate();
  if (x.empty()) throw Error(ErrorKind::EmptyDataset, "tree_fit");
  if (y.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "target length differs from matrix rows");

  GbtModel model;
  model.spec = spec;
  model.width = x.cols();
  model.learning_rate = 1.0;
  if (detail::all_equal(y)) {
    model.base_score = y.front();
    model.degenerate_target = true;
    return model;
  }
  model.base_score = detail::mean_of(y);
  std::vector<double> grad(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) grad[i] = model.base_score - y[i];
  const TreeParams params{static_cast<int>(spec.get("max_depth")), 0.0, 0.0, spec.get("min_samples_leaf")};
  const detail::BinnedColumns bins(x);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::TreeGrower grower(bins, grad, params);
  model.trees.push_back(grower.grow(std::move(rows)));
  return model;
}

inline double gbt_predict(const GbtModel& model, std::span<const double> row) { return model.predict(row); }

inline void to_json(nlohmann::json& j, const Tree& t) {
  j = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf())
      j.push_back({{"weight", n.weight}, {"cover", n.cover}});
    else
      j.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                   {"cover", n.cover}});
  }
}

inline void from_json(const nlohmann::json& j, Tree& t) {
  t.nodes.clear();
  for (const auto& jn : j) {
    TreeNode n;
    n.cover = jn.value("cover", 0.0);
    if (jn.contains("weight")) {
      n.weight = jn.at("weight").get<double>();
    } else {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    t.nodes.push_back(n);
  }
  const auto size = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
      throw Error(ErrorKind::MalformedSnapshot, "tree child index out of range");
}

inline void to_json(nlohmann::json& j, const GbtModel& m) {
  j = {{"spec", m.spec},
       {"base_score", m.base_score},
       {"learning_rate", m.learning_rate},
       {"width", m.width},
       {"degenerate_target", m.degenerate_target},
       {"trees", m.trees}};
}

inline void from_json(const nlohmann::json& j, GbtModel& m) {
  m.spec = j.at("spec").get<RegressorSpec>();
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.width = j.at("width").get<std::size_t>();
  m.degenerate_target = j.value("degenerate_target", false);
  m.trees = j.at("trees").get<std::vector<Tree>>();
}

}  // namespace rentpas
