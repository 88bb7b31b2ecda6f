#include "treestealer/generate.hpp"

#include <cmath>
#include <numeric>

#include "treestealer/error.hpp"
#include "treestealer/random.hpp"

namespace treestealer {

namespace {

// Admissible grid indices per feature for the current node, inclusive.
struct IndexWindow {
  std::int64_t lo;
  std::int64_t hi;
  bool empty() const { return lo > hi; }
};

class Generator {
 public:
  explicit Generator(const GeneratorConfig& config) : config_(config), rng_(config.seed) {}

  DecisionTree run() {
    std::vector<IndexWindow> windows;
    for (std::size_t f = 0; f < config_.num_features; ++f) {
      const double span = config_.ranges_high[f] - config_.ranges_low[f];
      // Largest k with low + k*grid <= high - grid; the nudge absorbs rounding
      // when the span is an exact multiple of the grid.
      const auto k_max = static_cast<std::int64_t>(std::floor(span / config_.grid + 1e-9)) - 1;
      windows.push_back({1, k_max});
    }
    const int root = grow(0, windows);
    assign_labels();
    auto tree = builder_.build(root, config_.ranges_low, config_.ranges_high);
    tree.set_threshold_grid(config_.grid);
    return tree;
  }

 private:
  int grow(int depth, const std::vector<IndexWindow>& windows) {
    bool split = false;
    if (depth < config_.depth_min) {
      split = true;
    } else if (depth < config_.depth_max) {
      split = rng_.bernoulli(config_.split_probability);
    }
    std::vector<std::size_t> feasible;
    for (std::size_t f = 0; f < windows.size(); ++f) {
      if (!windows[f].empty()) feasible.push_back(f);
    }
    if (split && feasible.empty()) {
      if (depth < config_.depth_min) {
        throw InfeasibleGrid("no admissible threshold left at depth " + std::to_string(depth) +
                             "; widen the ranges or refine the grid");
      }
      split = false;
    }
    if (!split) {
      const int id = builder_.leaf(std::int64_t{0});
      leaves_.push_back(id);
      return id;
    }
    const auto f = feasible[rng_.below(feasible.size())];
    const auto k = rng_.between(windows[f].lo, windows[f].hi);
    const double threshold = config_.ranges_low[f] + static_cast<double>(k) * config_.grid;

    auto left_windows = windows;
    left_windows[f].lo = k + 2;
    auto right_windows = windows;
    right_windows[f].hi = k - 2;
    const int left = grow(depth + 1, left_windows);
    const int right = grow(depth + 1, right_windows);
    return builder_.inner(static_cast<int>(f), threshold, left, right);
  }

  void assign_labels() {
    std::vector<std::int64_t> order(leaves_.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng_.below(i)]);
    }
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      Label value;
      if (config_.num_classes) {
        value = static_cast<std::int64_t>(
            rng_.below(static_cast<std::uint64_t>(*config_.num_classes)));
      } else if (config_.regression) {
        value = 0.5 + 1.25 * static_cast<double>(order[i]);
      } else {
        value = order[i];
      }
      builder_.set_value(leaves_[i], value);
    }
  }

  const GeneratorConfig& config_;
  Rng rng_;
  TreeBuilder builder_;
  std::vector<int> leaves_;
};

}  // namespace

DecisionTree generate_random_tree(const GeneratorConfig& config) {
  if (!(config.grid > 0.0)) throw Error("threshold grid must be positive");
  if (config.depth_min < 1 || config.depth_max < config.depth_min) {
    throw Error("require 1 <= depth_min <= depth_max");
  }
  if (config.num_features == 0 || config.ranges_low.size() != config.num_features ||
      config.ranges_high.size() != config.num_features) {
    throw Error("ranges must have one entry per feature");
  }
  for (std::size_t f = 0; f < config.num_features; ++f) {
    if (!std::isfinite(config.ranges_low[f]) || !std::isfinite(config.ranges_high[f]) ||
        !(config.ranges_low[f] < config.ranges_high[f])) {
      throw Error("feature " + std::to_string(f) + " needs a finite range with low < high");
    }
  }
  if (config.num_classes && *config.num_classes < 1) throw Error("num_classes must be positive");
  return Generator(config).run();
}

}  // namespace treestealer
