#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "treestealer/error.hpp"
#include "treestealer/generate.hpp"
#include "treestealer/random.hpp"
#include "treestealer/tree.hpp"

namespace treestealer::fixtures {

// Two-feature example target. Ranges [2,-2]..[7,3]; the
// right subtree tests s1 three times so the last probe goes through
// thresholds of completed ancestors.
inline DecisionTree worked_example_tree() {
  TreeBuilder b;
  const int n1 = b.inner(1, 1.0, b.leaf(std::int64_t{0}), b.leaf(std::int64_t{1}));
  const int n8 = b.inner(1, 0.0, b.leaf(std::int64_t{4}), b.leaf(std::int64_t{5}));
  const int n3 = b.inner(1, 1.9, b.leaf(std::int64_t{3}), n8);
  const int n2 = b.inner(1, -0.9, n3, b.leaf(std::int64_t{2}));
  const int root = b.inner(0, 3.0, n1, n2);
  return b.build(root, {2.0, -2.0}, {7.0, 3.0});
}

struct CorpusTree {
  DecisionTree tree;
  double epsilon;
  std::size_t num_features;
};

// Random grid trees with m in [2,8], depth in [2,9] and grid 2*epsilon.
inline std::vector<CorpusTree> grid_corpus(std::size_t count, std::uint64_t seed,
                                           int depth_max = 9) {
  std::vector<CorpusTree> out;
  Rng rng(seed);
  while (out.size() < count) {
    GeneratorConfig cfg;
    cfg.num_features = static_cast<std::size_t>(rng.between(2, 8));
    cfg.depth_max = static_cast<int>(rng.between(2, depth_max));
    cfg.depth_min = std::max(2, cfg.depth_max - 2);
    const double eps = 0.25 * static_cast<double>(rng.between(1, 4));
    cfg.grid = 2 * eps;
    for (std::size_t f = 0; f < cfg.num_features; ++f) {
      const double lo = static_cast<double>(rng.between(-20, 20));
      const double width = cfg.grid * static_cast<double>(rng.between(24, 64));
      cfg.ranges_low.push_back(lo);
      cfg.ranges_high.push_back(lo + width);
    }
    cfg.split_probability = 0.6;
    cfg.seed = rng.next();
    try {
      out.push_back({generate_random_tree(cfg), eps, cfg.num_features});
    } catch (const InfeasibleGrid&) {
    }
  }
  return out;
}

}  // namespace treestealer::fixtures
