#pragma once

#include <span>
#include <vector>

#include "treestealer/tree.hpp"

namespace treestealer {

struct Sample {
  std::vector<double> x;
  Label y;
};

struct CartConfig {
  int max_depth = 16;
  std::size_t min_leaf = 1;
  // Feature ranges are the data min/max widened by margin * span per side.
  double margin = 0.05;
};

// Greedy CART. Integer labels split on Gini reduction, real labels on
// variance reduction. Candidate thresholds are midpoints between adjacent
// distinct feature values; rows with x > t go left.
DecisionTree train_cart(std::span<const Sample> rows, const CartConfig& config = {});

}  // namespace treestealer
