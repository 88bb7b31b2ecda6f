#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "treestealer/channel.hpp"
#include "treestealer/tree.hpp"

namespace treestealer {

struct BaselineConfig {
  double epsilon = 1.0;
  std::int64_t max_queries = 1'000'000;
  void validate() const;
};

// Axis-aligned cell that answered a single label.
struct LeafBox {
  std::vector<double> low;
  std::vector<double> high;
  Label label;
};

struct BaselineResult {
  DecisionTree tree;
  std::int64_t queries = 0;
  bool budget_exhausted = false;
  std::vector<LeafBox> boxes;
};

// Label-only attack. Each newly seen label gets a representative point;
// per feature, binary searches outward from it locate the nearest label
// change on either side to within epsilon, which bounds the label's cell. Space not covered by any cell
// is probed at its centre until nothing wider than epsilon remains, and the
// cells are finally cut into a tree. Exact when leaf labels are pairwise
// distinct.
BaselineResult api_attack_extract(LabelOracle& oracle, std::span<const double> ranges_low,
                                  std::span<const double> ranges_high,
                                  const BaselineConfig& config);

// Recursive guillotine cuts over labelled boxes; x[f] > c goes left. Falls
// back to the majority label where no cut separates the boxes within `tol`.
DecisionTree boxes_to_tree(std::span<const LeafBox> boxes, std::span<const double> ranges_low,
                           std::span<const double> ranges_high, double tol);

}  // namespace treestealer
