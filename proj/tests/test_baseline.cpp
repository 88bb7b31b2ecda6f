#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "treestealer/baseline.hpp"
#include "treestealer/error.hpp"
#include "treestealer/eval.hpp"

using namespace treestealer;

namespace {

BaselineResult run_baseline(const DecisionTree& tree, double eps, std::int64_t budget = 1'000'000) {
  TreeLabelOracle oracle(tree);
  auto r = api_attack_extract(oracle, tree.ranges_low(), tree.ranges_high(), {eps, budget});
  EXPECT_EQ(r.queries, oracle.queries());
  return r;
}

double grid_fidelity(const DecisionTree& target, const DecisionTree& shadow, double grid) {
  Rng rng(1);
  return fidelity(target, shadow, grid_dataset(target, grid, 1000, rng));
}

}  // namespace

TEST(Baseline, ValidatesConfig) {
  const auto tree = fixtures::worked_example_tree();
  TreeLabelOracle oracle(tree);
  EXPECT_THROW(api_attack_extract(oracle, tree.ranges_low(), tree.ranges_high(), {0.0, 10}), Error);
  EXPECT_THROW(api_attack_extract(oracle, tree.ranges_low(), tree.ranges_high(), {1.0, 0}), Error);
  const std::vector<double> one{0.0};
  EXPECT_THROW(api_attack_extract(oracle, one, one, {1.0, 10}), DimensionMismatch);
}

TEST(Baseline, StumpIsCheap) {
  TreeBuilder b;
  const auto tree = b.build(b.inner(0, 3.0, b.leaf(1.0), b.leaf(2.0)), {0.0}, {8.0});
  const auto r = run_baseline(tree, 0.5);
  EXPECT_LE(r.queries, 6);
  EXPECT_FALSE(r.budget_exhausted);
  ASSERT_EQ(r.tree.size(), 3u);
  EXPECT_NEAR(*r.tree.root().threshold, 3.0, 0.5);
}

TEST(Baseline, SingleLeaf) {
  TreeBuilder b;
  const auto tree = b.build(b.leaf(std::int64_t{7}), {0.0, 0.0}, {4.0, 4.0});
  const auto r = run_baseline(tree, 0.5);
  EXPECT_EQ(r.tree.size(), 1u);
  EXPECT_EQ(std::get<std::int64_t>(*r.tree.root().value), 7);
}

TEST(Baseline, WorkedExampleExact) {
  const auto tree = fixtures::worked_example_tree();
  const auto r = run_baseline(tree, 0.05);
  EXPECT_EQ(r.boxes.size(), tree.num_leaves());
  EXPECT_EQ(grid_fidelity(tree, r.tree, 0.1), 1.0);
}

TEST(Baseline, DistinctLeavesReachFullFidelity) {
  for (const auto& c : fixtures::grid_corpus(25, 99, 5)) {
    const auto r = run_baseline(c.tree, c.epsilon);
    EXPECT_FALSE(r.budget_exhausted);
    EXPECT_EQ(r.boxes.size(), c.tree.num_leaves());
    EXPECT_EQ(grid_fidelity(c.tree, r.tree, 2 * c.epsilon), 1.0);
  }
}

TEST(Baseline, DuplicateLabelsDoNotFail) {
  TreeBuilder b;
  const int inner = b.inner(1, 2.0, b.leaf(std::int64_t{0}), b.leaf(std::int64_t{1}));
  const auto tree = b.build(b.inner(0, 2.0, inner, b.leaf(std::int64_t{0})), {0.0, 0.0}, {4.0, 4.0});
  const auto r = run_baseline(tree, 0.25);
  EXPECT_FALSE(r.budget_exhausted);
  const auto f = grid_fidelity(tree, r.tree, 0.5);
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
}

TEST(Baseline, FinerEpsilonCostsMore) {
  const auto tree = fixtures::worked_example_tree();
  std::int64_t prev = 0;
  for (double eps = 1.0; eps >= 1.0 / 64; eps /= 2) {
    const auto r = run_baseline(tree, eps);
    EXPECT_GE(r.queries, prev) << eps;
    prev = r.queries;
  }
}

TEST(Baseline, BudgetGivesPartialResult) {
  const auto tree = fixtures::worked_example_tree();
  const auto r = run_baseline(tree, 0.01, 10);
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_EQ(r.queries, 10);
  EXPECT_GE(r.tree.size(), 1u);
}

TEST(BoxesToTree, CutsBetweenBoxes) {
  const std::vector<double> lo{0.0, 0.0};
  const std::vector<double> hi{4.0, 4.0};
  const std::vector<LeafBox> boxes = {
      {{2.0, 0.0}, {4.0, 4.0}, std::int64_t{1}},
      {{0.0, 0.0}, {2.0, 1.0}, std::int64_t{2}},
      {{0.0, 1.0}, {2.0, 4.0}, std::int64_t{3}},
  };
  const auto tree = boxes_to_tree(boxes, lo, hi, 0.1);
  EXPECT_EQ(tree.num_leaves(), 3u);
  for (const auto& box : boxes) {
    std::vector<double> mid{(box.low[0] + box.high[0]) / 2, (box.low[1] + box.high[1]) / 2};
    EXPECT_EQ(infer(tree, mid), box.label);
  }
}

TEST(BoxesToTree, EmptyAndUncuttable) {
  const std::vector<double> lo{0.0};
  const std::vector<double> hi{4.0};
  EXPECT_THROW(boxes_to_tree({}, lo, hi, 0.1), Error);
  // Overlapping boxes cannot be cut; the larger one wins.
  const std::vector<LeafBox> boxes = {
      {{0.0}, {3.0}, std::int64_t{1}},
      {{1.0}, {4.0}, std::int64_t{2}},
      {{0.0}, {4.0}, std::int64_t{1}},
  };
  const auto tree = boxes_to_tree(boxes, lo, hi, 0.1);
  EXPECT_EQ(tree.size(), 1u);
  EXPECT_EQ(std::get<std::int64_t>(*tree.root().value), 1);
}
