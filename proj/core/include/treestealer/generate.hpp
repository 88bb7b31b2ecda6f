#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "treestealer/tree.hpp"

namespace treestealer {

struct GeneratorConfig {
  std::size_t num_features = 2;
  int depth_min = 1;
  int depth_max = 3;
  std::vector<double> ranges_low;
  std::vector<double> ranges_high;
  // Thresholds sit on {low + k * grid}, at least one grid step inside the
  // range and at least two steps away from same-feature ancestors.
  double grid = 1.0;
  std::uint64_t seed = 0;
  // Between depth_min and depth_max each node splits with this probability.
  double split_probability = 0.7;
  bool regression = false;
  // Draw class labels from [0, num_classes) instead of distinct labels.
  std::optional<int> num_classes;
};

// Throws InfeasibleGrid when a node above depth_min has no admissible
// threshold on any feature.
DecisionTree generate_random_tree(const GeneratorConfig& config);

}  // namespace treestealer
