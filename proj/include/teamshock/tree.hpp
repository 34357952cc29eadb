#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "teamshock/matrix.hpp"
#include "teamshock/random.hpp"

namespace teamshock {

enum class SplitMode { exact, histogram };

struct TreeParams {
  int max_depth = 3;  // negative: unlimited
  int min_samples_leaf = 1;
  int max_features = 0;  // features tried per split; 0 = all
  SplitMode mode = SplitMode::exact;
  int bins = 256;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, int max_depth, int min_samples_leaf)
      : nodes_(std::move(nodes)), max_depth_(max_depth), min_samples_leaf_(min_samples_leaf) {}

  double predict(std::span<const double> x) const {
    int k = 0;
    while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& n = nodes_[static_cast<std::size_t>(k)];
      k = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(k)].value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  int max_depth() const noexcept { return max_depth_; }
  int min_samples_leaf() const noexcept { return min_samples_leaf_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
  }
  int depth() const { return depth_from(0); }

 private:
  int depth_from(int k) const {
    const auto& n = nodes_[static_cast<std::size_t>(k)];
    return n.feature < 0 ? 0 : 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  std::vector<TreeNode> nodes_{TreeNode{}};
  int max_depth_ = 0;
  int min_samples_leaf_ = 1;
};

/// Per-feature row orderings and histogram bins computed once per design
/// matrix and shared by every tree fitted on it.
class TreeData {
 public:
  TreeData(const Matrix& X, SplitMode mode = SplitMode::exact, int bins = 256) : X_(&X), mode_(mode) {
    if (X.rows == 0) throw std::invalid_argument("tree: empty design");
    order_.resize(X.cols);
    for (std::size_t f = 0; f < X.cols; ++f) {
      auto& o = order_[f];
      o.resize(X.rows);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    }
    if (mode == SplitMode::histogram) build_bins(bins);
  }

  const Matrix& X() const noexcept { return *X_; }
  SplitMode mode() const noexcept { return mode_; }
  const std::vector<std::uint32_t>& order(std::size_t f) const { return order_[f]; }
  std::uint16_t bin(std::size_t row, std::size_t f) const { return bin_[row * X_->cols + f]; }
  const std::vector<double>& edges(std::size_t f) const { return edges_[f]; }

 private:
  void build_bins(int bins) {
    if (bins < 2 || bins > 65535) throw std::invalid_argument("tree: bins must be in [2, 65535]");
    const auto& X = *X_;
    edges_.assign(X.cols, {});
    bin_.assign(X.rows * X.cols, 0);
    for (std::size_t f = 0; f < X.cols; ++f) {
      std::vector<double> distinct;
      for (auto r : order_[f])
        if (distinct.empty() || X(r, f) != distinct.back()) distinct.push_back(X(r, f));
      // Upper edges are midpoints between distinct values at evenly spaced ranks.
      auto& e = edges_[f];
      const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(bins), distinct.size());
      for (std::size_t b = 1; b < nb; ++b) {
        const std::size_t k = b * distinct.size() / nb;
        const double edge = 0.5 * (distinct[k - 1] + distinct[k]);
        if (e.empty() || edge > e.back()) e.push_back(edge);
      }
      for (std::size_t r = 0; r < X.rows; ++r) {
        const auto it = std::lower_bound(e.begin(), e.end(), X(r, f));
        bin_[r * X.cols + f] = static_cast<std::uint16_t>(it - e.begin());
      }
    }
  }

  const Matrix* X_;
  SplitMode mode_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::vector<double>> edges_;
  std::vector<std::uint16_t> bin_;
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TreeData& data, std::span<const double> y, std::span<const std::uint32_t> sample,
              const TreeParams& p, Rng* rng)
      : data_(data), y_(y), p_(p), rng_(rng), p_count_(data.X().cols) {
    const auto& X = data.X();
    if (y.size() != X.rows) throw std::invalid_argument("tree: X rows and y length differ");
    if (p.min_samples_leaf < 1) throw std::invalid_argument("tree: min_samples_leaf must be >= 1");
    if (p.max_features < 0 || static_cast<std::size_t>(p.max_features) > X.cols)
      throw std::invalid_argument("tree: max_features out of range");
    if (p.max_features > 0 && static_cast<std::size_t>(p.max_features) < X.cols && rng == nullptr)
      throw std::invalid_argument("tree: feature subsampling needs a random stream");
    n_ = sample.size();
    if (n_ == 0) throw std::invalid_argument("tree: no training rows");
    for (double v : y)
      if (!std::isfinite(v)) throw std::invalid_argument("tree: non-finite target");
    if (data.mode() == SplitMode::exact) {
      // Sorted sample lists per feature, duplicates from resampling kept.
      std::vector<std::uint32_t> mult(X.rows, 0);
      for (auto s : sample) ++mult[s];
      sorted_.assign(p_count_, {});
      for (std::size_t f = 0; f < p_count_; ++f) {
        auto& s = sorted_[f];
        s.reserve(n_);
        for (auto r : data.order(f))
          for (std::uint32_t m = 0; m < mult[r]; ++m) s.push_back(r);
      }
      scratch_.resize(n_);
    } else {
      rows_.assign(sample.begin(), sample.end());
    }
    go_left_.assign(X.rows, 0);
  }

  RegressionTree build() {
    nodes_.clear();
    grow(0, n_, 0);
    return RegressionTree(std::move(nodes_), p_.max_depth, p_.min_samples_leaf);
  }

 private:
  const std::vector<std::uint32_t>& node_rows() const { return data_.mode() == SplitMode::exact ? sorted_[0] : rows_; }

  int grow(std::size_t b, std::size_t e, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const auto& rows = node_rows();
    double sum = 0.0;
    for (std::size_t k = b; k < e; ++k) sum += y_[rows[k]];
    const double n = static_cast<double>(e - b);
    const double mean = sum / n;
    nodes_[static_cast<std::size_t>(id)].value = mean;
    double sse = 0.0;
    for (std::size_t k = b; k < e; ++k) sse += (y_[rows[k]] - mean) * (y_[rows[k]] - mean);
    const bool depth_ok = p_.max_depth < 0 || depth < p_.max_depth;
    if (!depth_ok || e - b < 2 * static_cast<std::size_t>(p_.min_samples_leaf) || sse <= 0.0) return id;

    const auto features = candidate_features();
    const SplitChoice best = data_.mode() == SplitMode::exact ? best_exact(b, e, sum, features)
                                                              : best_histogram(b, e, sum, features);
    if (best.feature < 0) return id;

    const auto& X = data_.X();
    const auto f = static_cast<std::size_t>(best.feature);
    std::size_t n_left = 0;
    for (std::size_t k = b; k < e; ++k) {
      const auto r = node_rows()[k];
      go_left_[r] = X(r, f) <= best.threshold;
    }
    if (data_.mode() == SplitMode::exact) {
      for (auto& s : sorted_) n_left = stable_split(s, b, e);
    } else {
      n_left = stable_split(rows_, b, e);
    }
    nodes_[static_cast<std::size_t>(id)].feature = best.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
    const int l = grow(b, b + n_left, depth + 1);
    const int r = grow(b + n_left, e, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::size_t stable_split(std::vector<std::uint32_t>& s, std::size_t b, std::size_t e) {
    if (scratch_.size() < e - b) scratch_.resize(e - b);
    std::size_t w = b, t = 0;
    for (std::size_t k = b; k < e; ++k) {
      if (go_left_[s[k]]) s[w++] = s[k];
      else scratch_[t++] = s[k];
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(t), s.begin() + static_cast<std::ptrdiff_t>(w));
    return w - b;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(p_count_);
    std::iota(f.begin(), f.end(), 0);
    if (p_.max_features > 0 && static_cast<std::size_t>(p_.max_features) < p_count_) {
      // Partial Fisher-Yates, then restore ascending order for tie-breaking.
      for (std::size_t i = 0; i < static_cast<std::size_t>(p_.max_features); ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(*rng_, p_count_ - i));
        std::swap(f[i], f[j]);
      }
      f.resize(static_cast<std::size_t>(p_.max_features));
      std::sort(f.begin(), f.end());
    }
    return f;
  }

  SplitChoice best_exact(std::size_t b, std::size_t e, double sum, const std::vector<std::size_t>& features) const {
    const auto& X = data_.X();
    const double n = static_cast<double>(e - b);
    const double parent = sum * sum / n;
    const auto msl = static_cast<std::size_t>(p_.min_samples_leaf);
    SplitChoice best;
    for (auto f : features) {
      const auto& s = sorted_[f];
      double left = 0.0;
      for (std::size_t k = b; k + 1 < e; ++k) {
        left += y_[s[k]];
        const std::size_t nl = k + 1 - b, nr = e - b - nl;
        const double xa = X(s[k], f), xb = X(s[k + 1], f);
        if (xa == xb || nl < msl || nr < msl) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          double thr = 0.5 * (xa + xb);
          if (thr >= xb) thr = xa;  // adjacent doubles
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  SplitChoice best_histogram(std::size_t b, std::size_t e, double sum, const std::vector<std::size_t>& features) const {
    const double n = static_cast<double>(e - b);
    const double parent = sum * sum / n;
    const auto msl = static_cast<std::size_t>(p_.min_samples_leaf);
    SplitChoice best;
    std::vector<double> hs;
    std::vector<std::size_t> hc;
    for (auto f : features) {
      const auto& edges = data_.edges(f);
      const std::size_t nb = edges.size() + 1;
      hs.assign(nb, 0.0);
      hc.assign(nb, 0);
      for (std::size_t k = b; k < e; ++k) {
        const auto r = rows_[k];
        const auto bi = data_.bin(r, f);
        hs[bi] += y_[r];
        ++hc[bi];
      }
      double left = 0.0;
      std::size_t nl = 0;
      for (std::size_t bi = 0; bi + 1 < nb; ++bi) {
        left += hs[bi];
        nl += hc[bi];
        const std::size_t nr = e - b - nl;
        if (hc[bi] == 0 || nl < msl || nr < msl) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
        if (gain > best.gain) best = {static_cast<int>(f), edges[bi], gain};
      }
    }
    return best;
  }

  const TreeData& data_;
  std::span<const double> y_;
  TreeParams p_;
  Rng* rng_;
  std::size_t p_count_;
  std::size_t n_ = 0;
  std::vector<std::vector<std::uint32_t>> sorted_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> scratch_;
  std::vector<char> go_left_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// CART on the rows listed in `sample` (duplicates allowed).
inline RegressionTree fit_tree(const TreeData& data, std::span<const double> y, std::span<const std::uint32_t> sample,
                               const TreeParams& params, Rng* rng = nullptr) {
  return detail::TreeBuilder(data, y, sample, params, rng).build();
}

inline RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& params, Rng* rng = nullptr) {
  const TreeData data(X, params.mode, params.bins);
  std::vector<std::uint32_t> all(X.rows);
  std::iota(all.begin(), all.end(), 0u);
  return fit_tree(data, y, all, params, rng);
}

}  // namespace teamshock
