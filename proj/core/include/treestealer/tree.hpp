#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace treestealer {

// Leaf payload: integer class label or real regression value. The extractor
// treats it opaquely; equality is exact and type-sensitive.
using Label = std::variant<std::int64_t, double>;

std::string to_string(const Label& label);

// Ordered left/right decisions of one inference run, root first.
// 0 = left (x_f > t), 1 = right (x_f <= t).
class BranchTrace {
 public:
  BranchTrace() = default;
  explicit BranchTrace(std::vector<std::uint8_t> bits);

  // Parses the textual form over {L,R}, e.g. "LRL".
  static BranchTrace parse(std::string_view text);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  void push_back(std::uint8_t bit);
  void flip(std::size_t i) { bits_[i] ^= 1U; }

  // "LRL" rendering used in logs and reports.
  std::string str() const;

  friend bool operator==(const BranchTrace&, const BranchTrace&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct TreeNode {
  int id = 0;
  std::optional<int> feature;
  std::optional<double> threshold;
  std::optional<int> left;
  std::optional<int> right;
  std::optional<Label> value;
  int depth = 0;

  bool is_leaf() const { return value.has_value(); }
};

struct InferenceResult {
  Label label;
  BranchTrace trace;
};

// Immutable binary decision tree. Nodes live in a flat vector indexed by id;
// ids are assigned breadth-first from the root (id 0).
class DecisionTree {
 public:
  // Validates structure and renumbers nodes breadth-first. `nodes[i].left`
  // and `.right` refer to positions in `nodes`; `root` likewise.
  DecisionTree(std::vector<TreeNode> nodes, int root, std::vector<double> ranges_low,
               std::vector<double> ranges_high);

  std::size_t num_features() const { return ranges_low_.size(); }
  const std::vector<double>& ranges_low() const { return ranges_low_; }
  const std::vector<double>& ranges_high() const { return ranges_high_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  // Grid the thresholds were drawn on, when the tree came from the generator.
  const std::optional<double>& threshold_grid() const { return threshold_grid_; }
  void set_threshold_grid(std::optional<double> grid) { threshold_grid_ = grid; }

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_leaves() const;
  std::size_t num_inner() const { return size() - num_leaves(); }
  int max_depth() const;
  int min_leaf_depth() const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> ranges_low_;
  std::vector<double> ranges_high_;
  std::optional<double> threshold_grid_;
};

// Convenience for assembling trees by hand in tests and examples.
class TreeBuilder {
 public:
  int leaf(Label value);
  int inner(int feature, double threshold, int left, int right);
  // Overwrites the value of a leaf created earlier.
  void set_value(int leaf, Label value);
  DecisionTree build(int root, std::vector<double> ranges_low,
                     std::vector<double> ranges_high) const;

 private:
  std::vector<TreeNode> nodes_;
};

// Comparison is strict: x[f] > t goes left (bit 0), otherwise right (bit 1).
InferenceResult infer_with_trace(const DecisionTree& tree, std::span<const double> input);
Label infer(const DecisionTree& tree, std::span<const double> input);

// Follows `trace` from the root; returns the id of the node it stops at.
int replay_trace(const DecisionTree& tree, const BranchTrace& trace);

struct TreeComparison {
  bool equal = true;
  // Empty when equal; otherwise a path like "root/L/R" plus the difference.
  std::string first_mismatch;
};

TreeComparison tree_equal(const DecisionTree& a, const DecisionTree& b,
                          double threshold_tol);

// Smallest gap between a threshold and any same-feature ancestor threshold or
// range limit, over all inner nodes. Infinity for a single-leaf tree.
double min_threshold_separation(const DecisionTree& tree);

}  // namespace treestealer
