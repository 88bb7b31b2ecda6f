#include "treestealer/cart.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "treestealer/error.hpp"

namespace treestealer {

namespace {

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class CartTrainer {
 public:
  CartTrainer(std::span<const Sample> rows, const CartConfig& config)
      : rows_(rows), config_(config), m_(rows.front().x.size()) {
    regression_ = std::holds_alternative<double>(rows.front().y);
    for (const auto& row : rows_) {
      if (row.x.size() != m_) throw DimensionMismatch(m_, row.x.size());
      if (std::holds_alternative<double>(row.y) != regression_) {
        throw DatasetError("dataset mixes integer class labels and real targets");
      }
      if (!regression_) classes_.emplace(std::get<std::int64_t>(row.y), 0);
    }
    std::size_t next = 0;
    for (auto& [label, index] : classes_) index = next++;
  }

  DecisionTree run() {
    std::vector<std::size_t> all(rows_.size());
    std::iota(all.begin(), all.end(), 0);
    const int root = grow(all, 0);

    std::vector<double> low(m_), high(m_);
    for (std::size_t f = 0; f < m_; ++f) {
      auto [lo, hi] = std::minmax_element(rows_.begin(), rows_.end(),
                                          [f](const Sample& a, const Sample& b) {
                                            return a.x[f] < b.x[f];
                                          });
      const double span = hi->x[f] - lo->x[f];
      const double pad = span == 0.0 ? 0.5 : config_.margin * span;
      low[f] = lo->x[f] - pad;
      high[f] = hi->x[f] + pad;
    }
    return builder_.build(root, std::move(low), std::move(high));
  }

 private:
  double impurity(const std::vector<double>& stats, double n) const {
    if (n <= 0) return 0.0;
    if (regression_) {
      // stats = {sum, sum of squares}
      const double mean = stats[0] / n;
      return stats[1] / n - mean * mean;
    }
    double g = 1.0;
    for (double c : stats) g -= (c / n) * (c / n);
    return g;
  }

  std::vector<double> empty_stats() const {
    return std::vector<double>(regression_ ? 2 : classes_.size(), 0.0);
  }

  void add(std::vector<double>& stats, std::size_t row, double sign) const {
    const auto& y = rows_[row].y;
    if (regression_) {
      const double v = std::get<double>(y);
      stats[0] += sign * v;
      stats[1] += sign * v * v;
    } else {
      stats[classes_.at(std::get<std::int64_t>(y))] += sign;
    }
  }

  Label leaf_value(const std::vector<std::size_t>& idx) const {
    if (regression_) {
      double sum = 0.0;
      for (auto i : idx) sum += std::get<double>(rows_[i].y);
      return sum / static_cast<double>(idx.size());
    }
    std::map<std::int64_t, std::size_t> counts;
    for (auto i : idx) ++counts[std::get<std::int64_t>(rows_[i].y)];
    // Ties go to the smallest label; std::map iterates in key order.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    return best->first;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& idx) const {
    const auto n = static_cast<double>(idx.size());
    auto total = empty_stats();
    for (auto i : idx) add(total, i, 1.0);
    const double parent = impurity(total, n);

    std::optional<Split> best;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < m_; ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows_[a].x[f] < rows_[b].x[f];
      });
      // Sweep: `low` holds rows with x <= candidate (the right child).
      auto low = empty_stats();
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        add(low, order[k], 1.0);
        const double v = rows_[order[k]].x[f];
        const double next = rows_[order[k + 1]].x[f];
        if (!(v < next)) continue;
        const auto n_low = static_cast<double>(k + 1);
        const double n_high = n - n_low;
        if (n_low < static_cast<double>(config_.min_leaf) ||
            n_high < static_cast<double>(config_.min_leaf)) {
          continue;
        }
        auto high = total;
        for (std::size_t c = 0; c < high.size(); ++c) high[c] -= low[c];
        const double child =
            (n_low * impurity(low, n_low) + n_high * impurity(high, n_high)) / n;
        const double gain = parent - child;
        if (gain > 1e-12 && (!best || gain > best->gain + 1e-12)) {
          best = Split{f, v + (next - v) / 2.0, gain};
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& idx, int depth) {
    if (depth < config_.max_depth && idx.size() >= 2 * std::max<std::size_t>(config_.min_leaf, 1)) {
      if (auto split = best_split(idx)) {
        std::vector<std::size_t> left, right;
        for (auto i : idx) {
          (rows_[i].x[split->feature] > split->threshold ? left : right).push_back(i);
        }
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        return builder_.inner(static_cast<int>(split->feature), split->threshold, l, r);
      }
    }
    return builder_.leaf(leaf_value(idx));
  }

  std::span<const Sample> rows_;
  const CartConfig& config_;
  std::size_t m_;
  bool regression_ = false;
  std::map<std::int64_t, std::size_t> classes_;
  TreeBuilder builder_;
};

}  // namespace

DecisionTree train_cart(std::span<const Sample> rows, const CartConfig& config) {
  if (rows.empty()) throw DatasetError("cannot train on an empty dataset");
  if (rows.front().x.empty()) throw DatasetError("dataset has no features");
  if (config.max_depth < 0) throw Error("max_depth must be non-negative");
  return CartTrainer(rows, config).run();
}

}  // namespace treestealer
