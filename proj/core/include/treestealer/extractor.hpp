#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treestealer/channel.hpp"
#include "treestealer/tree.hpp"

namespace treestealer {

// Attacker-side node. Feature, threshold and value start unknown.
struct ShadowNode {
  int id = 0;
  std::optional<int> parent;
  int depth = 0;
  std::optional<int> feature;
  std::optional<double> threshold;
  std::optional<int> left;
  std::optional<int> right;
  std::optional<Label> value;

  // Input and trace of the query that first reached this node.
  std::vector<double> explore_input;
  BranchTrace explore_trace;

  // Element-wise minimum of inputs that went left here / maximum of inputs
  // that went right here.
  std::optional<std::vector<double>> t_left;
  std::optional<std::vector<double>> t_right;

  // Per feature: thresholds of completed ancestors testing that feature and
  // their depths, root first.
  std::vector<std::vector<double>> feat_thresholds;
  std::vector<std::vector<int>> feat_depths;

  bool in_backlog = false;

  bool complete() const { return value.has_value() || (feature && threshold); }
};

class ShadowTree {
 public:
  explicit ShadowTree(std::size_t num_features) : m_(num_features) {}

  std::size_t num_features() const { return m_; }
  std::optional<int> root() const {
    return nodes_.empty() ? std::nullopt : std::optional<int>(0);
  }
  ShadowNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const ShadowNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<ShadowNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  // FIFO of incomplete nodes. Parents are always enqueued before children.
  const std::deque<int>& backlog() const { return backlog_; }
  std::optional<int> pop_backlog();
  void remove_from_backlog(int id);

  // Creates a node (root when `parent` is empty), links it and enqueues it.
  int add_node(std::optional<int> parent, std::uint8_t side, std::span<const double> input,
               const BranchTrace& trace);

  // Records a finalized threshold in the feature-threshold lists of every
  // existing descendant of `id`.
  void propagate_threshold(int id);

  bool complete() const;
  // Throws Error when some node is still incomplete.
  DecisionTree to_tree(std::vector<double> ranges_low, std::vector<double> ranges_high) const;

 private:
  std::size_t m_;
  std::vector<ShadowNode> nodes_;
  std::deque<int> backlog_;
};

struct AttackParams {
  std::vector<double> ranges_low;
  std::vector<double> ranges_high;
  double epsilon = 0.0;
  // Off: threshold ranges are only updated at the node under attack and its
  // binary search restarts from the interval its ancestors allow.
  bool passive_tracking = true;
  // 0 = unlimited.
  std::int64_t max_queries = 0;

  std::size_t num_features() const { return ranges_low.size(); }
  void validate() const;
};

struct Observation {
  std::vector<double> input;
  Label label;
  BranchTrace trace;
};

enum class Phase { Explore, Feature, Threshold };
std::string to_string(Phase phase);

struct TranscriptEntry {
  std::int64_t query_index = 0;
  std::vector<double> input;
  Label label;
  BranchTrace trace;
  Phase phase = Phase::Explore;
  std::optional<int> target_node_id;
};

nlohmann::json to_json(const TranscriptEntry& entry);
// One JSON object per line.
std::string transcript_jsonl(std::span<const TranscriptEntry> transcript);

struct CraftedInput {
  std::vector<double> input;
  int beta = 0;
};

// Threshold-range update for one node on the path of `input`.
void update_threshold_ranges(ShadowNode& node, std::uint8_t bit, std::span<const double> input);

// Walks `obs.trace` through the shadow, creating and enqueueing missing
// nodes, tracking threshold ranges and labelling the final node. With
// `track_only` set, ranges are only updated at that node.
void add_nodes(ShadowTree& shadow, const Observation& obs,
               std::optional<int> track_only = std::nullopt);

// Folds one observation into the shadow and advances the node under attack.
// Returns the next feature cursor.
int add_attack_info(ShadowTree& shadow, std::optional<int>& current, const Observation& obs,
                    int beta, const AttackParams& params);

// Probe that flips the decision of `current` if it tests feature `beta`
// while still reaching it. Out-of-range values are clamped and reported
// through `warnings`.
std::vector<double> craft_inp_feature(const ShadowNode& current, const ShadowTree& shadow,
                                      const AttackParams& params, int beta,
                                      std::vector<std::string>* warnings = nullptr);

// One binary-search step at the midpoint of the node's threshold range.
std::vector<double> craft_inp_threshold(const ShadowNode& current);

// Empty result: the node is already complete.
std::optional<CraftedInput> craft_next_input(const ShadowNode& current, const ShadowTree& shadow,
                                             const AttackParams& params, int beta,
                                             std::vector<std::string>* warnings = nullptr);

struct ExtractionResult {
  ShadowTree shadow;
  std::optional<DecisionTree> tree;
  std::int64_t queries = 0;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> warnings;
};

// Main attack loop: explore the leftmost path with the upper range limits,
// then take backlog nodes in FIFO order and probe feature and threshold until
// no incomplete node remains.
ExtractionResult dt_extraction(TraceOracle& oracle, const AttackParams& params);

}  // namespace treestealer
