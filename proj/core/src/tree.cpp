#include "treestealer/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "treestealer/error.hpp"

namespace treestealer {

std::string to_string(const Label& label) {
  if (const auto* i = std::get_if<std::int64_t>(&label)) return std::to_string(*i);
  std::ostringstream out;
  out.precision(17);
  out << std::get<double>(label);
  return out.str();
}

BranchTrace::BranchTrace(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw Error("branch trace bits must be 0 or 1");
  }
}

BranchTrace BranchTrace::parse(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c == 'L') {
      bits.push_back(0);
    } else if (c == 'R') {
      bits.push_back(1);
    } else {
      throw Error(std::string("invalid trace character '") + c + "'");
    }
  }
  return BranchTrace(std::move(bits));
}

void BranchTrace::push_back(std::uint8_t bit) {
  if (bit > 1) throw Error("branch trace bits must be 0 or 1");
  bits_.push_back(bit);
}

std::string BranchTrace::str() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b == 0 ? 'L' : 'R');
  return s;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int root,
                           std::vector<double> ranges_low, std::vector<double> ranges_high)
    : ranges_low_(std::move(ranges_low)), ranges_high_(std::move(ranges_high)) {
  const auto m = ranges_low_.size();
  if (m == 0) throw MalformedTree("tree needs at least one feature");
  if (ranges_high_.size() != m) throw MalformedTree("feature range vectors differ in length");
  for (std::size_t f = 0; f < m; ++f) {
    if (!std::isfinite(ranges_low_[f]) || !std::isfinite(ranges_high_[f]) ||
        ranges_low_[f] > ranges_high_[f]) {
      throw MalformedTree("invalid range for feature " + std::to_string(f));
    }
  }
  const auto n = nodes.size();
  if (n == 0) throw MalformedTree("tree has no nodes");
  if (root < 0 || static_cast<std::size_t>(root) >= n) {
    throw MalformedTree("root index out of range");
  }

  auto check_child = [&](const std::optional<int>& c, std::size_t at) {
    if (!c || *c < 0 || static_cast<std::size_t>(*c) >= n) {
      throw MalformedTree("dangling child reference at node " + std::to_string(at));
    }
    return static_cast<std::size_t>(*c);
  };

  // Breadth-first walk that renumbers and rejects shared children and cycles.
  std::vector<int> new_id(n, -1);
  std::deque<std::size_t> queue{static_cast<std::size_t>(root)};
  new_id[static_cast<std::size_t>(root)] = 0;
  std::vector<std::size_t> order;
  std::vector<int> depth(n, 0);
  while (!queue.empty()) {
    const auto at = queue.front();
    queue.pop_front();
    order.push_back(at);
    const auto& node = nodes[at];
    const bool has_split = node.feature || node.threshold || node.left || node.right;
    if (node.value.has_value()) {
      if (has_split) {
        throw MalformedTree("leaf node " + std::to_string(at) + " carries split fields");
      }
      continue;
    }
    if (!node.feature || !node.threshold) {
      throw MalformedTree("inner node " + std::to_string(at) + " lacks feature or threshold");
    }
    const int f = *node.feature;
    if (f < 0 || static_cast<std::size_t>(f) >= m) {
      throw MalformedTree("feature index out of range at node " + std::to_string(at));
    }
    const double t = *node.threshold;
    const auto uf = static_cast<std::size_t>(f);
    if (!std::isfinite(t) || t < ranges_low_[uf] || t > ranges_high_[uf]) {
      throw MalformedTree("threshold outside feature range at node " + std::to_string(at));
    }
    for (const auto* c : {&node.left, &node.right}) {
      const auto child = check_child(*c, at);
      if (new_id[child] != -1) {
        throw MalformedTree("node " + std::to_string(child) + " reachable twice");
      }
      new_id[child] = static_cast<int>(order.size() + queue.size());
      depth[child] = depth[at] + 1;
      queue.push_back(child);
    }
  }
  if (order.size() != n) throw MalformedTree("tree contains unreachable nodes");

  nodes_.resize(n);
  for (auto old : order) {
    TreeNode node = nodes[old];
    node.id = new_id[old];
    node.depth = depth[old];
    if (node.left) node.left = new_id[static_cast<std::size_t>(*node.left)];
    if (node.right) node.right = new_id[static_cast<std::size_t>(*node.right)];
    nodes_[static_cast<std::size_t>(node.id)] = std::move(node);
  }
}

std::size_t DecisionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int DecisionTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

int DecisionTree::min_leaf_depth() const {
  int d = std::numeric_limits<int>::max();
  for (const auto& n : nodes_) {
    if (n.is_leaf()) d = std::min(d, n.depth);
  }
  return d;
}

int TreeBuilder::leaf(Label value) {
  TreeNode node;
  node.value = value;
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

int TreeBuilder::inner(int feature, double threshold, int left, int right) {
  TreeNode node;
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

void TreeBuilder::set_value(int leaf, Label value) {
  auto& node = nodes_.at(static_cast<std::size_t>(leaf));
  if (!node.is_leaf()) throw Error("node " + std::to_string(leaf) + " is not a leaf");
  node.value = value;
}

DecisionTree TreeBuilder::build(int root, std::vector<double> ranges_low,
                                std::vector<double> ranges_high) const {
  return DecisionTree(nodes_, root, std::move(ranges_low), std::move(ranges_high));
}

InferenceResult infer_with_trace(const DecisionTree& tree, std::span<const double> input) {
  if (input.size() != tree.num_features()) {
    throw DimensionMismatch(tree.num_features(), input.size());
  }
  InferenceResult result{Label{}, BranchTrace{}};
  const TreeNode* node = &tree.root();
  while (!node->is_leaf()) {
    const bool go_left = input[static_cast<std::size_t>(*node->feature)] > *node->threshold;
    result.trace.push_back(go_left ? 0 : 1);
    node = &tree.node(go_left ? *node->left : *node->right);
  }
  result.label = *node->value;
  return result;
}

Label infer(const DecisionTree& tree, std::span<const double> input) {
  if (input.size() != tree.num_features()) {
    throw DimensionMismatch(tree.num_features(), input.size());
  }
  const TreeNode* node = &tree.root();
  while (!node->is_leaf()) {
    const bool go_left = input[static_cast<std::size_t>(*node->feature)] > *node->threshold;
    node = &tree.node(go_left ? *node->left : *node->right);
  }
  return *node->value;
}

int replay_trace(const DecisionTree& tree, const BranchTrace& trace) {
  const TreeNode* node = &tree.root();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (node->is_leaf()) throw Error("trace continues past a leaf at depth " + std::to_string(i));
    node = &tree.node(trace[i] == 0 ? *node->left : *node->right);
  }
  return node->id;
}

namespace {

bool compare_nodes(const DecisionTree& a, const DecisionTree& b, int ia, int ib, double tol,
                   std::string& path, std::string& mismatch) {
  const auto& na = a.node(ia);
  const auto& nb = b.node(ib);
  auto fail = [&](const std::string& what) {
    mismatch = path + ": " + what;
    return false;
  };
  if (na.is_leaf() != nb.is_leaf()) {
    return fail(na.is_leaf() ? "leaf vs inner node" : "inner node vs leaf");
  }
  if (na.is_leaf()) {
    if (*na.value != *nb.value) {
      return fail("leaf value " + to_string(*na.value) + " vs " + to_string(*nb.value));
    }
    return true;
  }
  if (*na.feature != *nb.feature) {
    return fail("feature " + std::to_string(*na.feature) + " vs " + std::to_string(*nb.feature));
  }
  if (!(std::abs(*na.threshold - *nb.threshold) <= tol)) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold " << *na.threshold << " vs " << *nb.threshold;
    return fail(out.str());
  }
  const auto len = path.size();
  path += "/L";
  if (!compare_nodes(a, b, *na.left, *nb.left, tol, path, mismatch)) return false;
  path.resize(len);
  path += "/R";
  if (!compare_nodes(a, b, *na.right, *nb.right, tol, path, mismatch)) return false;
  path.resize(len);
  return true;
}

}  // namespace

TreeComparison tree_equal(const DecisionTree& a, const DecisionTree& b, double threshold_tol) {
  TreeComparison result;
  std::string path = "root";
  result.equal = compare_nodes(a, b, 0, 0, threshold_tol, path, result.first_mismatch);
  return result;
}

double min_threshold_separation(const DecisionTree& tree) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> seen(tree.num_features());
  auto walk = [&](auto&& self, int id) -> void {
    const auto& node = tree.node(id);
    if (node.is_leaf()) return;
    const auto f = static_cast<std::size_t>(*node.feature);
    const double t = *node.threshold;
    best = std::min({best, t - tree.ranges_low()[f], tree.ranges_high()[f] - t});
    for (double other : seen[f]) best = std::min(best, std::abs(t - other));
    seen[f].push_back(t);
    self(self, *node.left);
    self(self, *node.right);
    seen[f].pop_back();
  };
  walk(walk, 0);
  return best;
}

}  // namespace treestealer
