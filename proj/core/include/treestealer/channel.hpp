#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "treestealer/phr.hpp"
#include "treestealer/random.hpp"
#include "treestealer/tree.hpp"

namespace treestealer {

enum class ChannelKind { Perfect, PhrSgx, StepCounterSev };

std::string to_string(ChannelKind kind);
ChannelKind parse_channel_kind(const std::string& name);  // perfect|phr|step

struct ChannelModel {
  ChannelKind kind = ChannelKind::Perfect;
  std::size_t phr_exit_doublets = phr::kExitDoublets;
  std::size_t phr_capacity = phr::kCapacity;
  std::size_t doublets_per_node = phr::kDoubletsPerNode;
  // Independent per-bit flip probability applied to the recovered trace.
  double flip_noise = 0.0;
  // Strict mode raises TruncatedTrace; lenient mode returns the suffix.
  bool strict = true;
  int read_rounds = 8;
  std::uint64_t layout_seed = 0;

  // Deepest leaf the PHR channel recovers completely (11 by default).
  std::size_t max_phr_depth() const;
  void validate() const;
};

struct OracleResult {
  Label label;
  BranchTrace trace;
  std::int64_t queries_observed = 0;
  bool truncated = false;
};

// Side-channel oracle seen by the extractor: one call is one API query plus
// the branch trace observed while the TEE served it.
class TraceOracle {
 public:
  virtual ~TraceOracle() = default;
  virtual std::size_t num_features() const = 0;
  virtual OracleResult observe(std::span<const double> input) = 0;
  virtual std::int64_t queries() const = 0;
};

// Plain prediction API. Used by the black-box baseline.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual std::size_t num_features() const = 0;
  virtual Label query(std::span<const double> input) = 0;
  virtual std::int64_t queries() const = 0;
};

struct StepEvent {
  bool retired_conditional = false;
  bool retired_taken = false;
};

// Single-step log of one simulated inference plus the step index of each
// node's conditional jump, as located by page tracking.
struct StepLog {
  std::vector<StepEvent> events;
  std::vector<std::size_t> node_step_offsets;
};

// Simulated SEV single-stepping of the compiled traversal. Each node runs
// load/compare/jcc; the then-block adds an unconditional jmp.
StepLog simulate_step_log(const BranchTrace& trace);

// Taken conditional jump = else/right (bit 1), not taken = left (bit 0).
BranchTrace decode_step_counters(std::span<const StepEvent> event_log,
                                 std::span<const std::size_t> node_step_offsets);

// Channel session over one immutable target tree. Owns the query counter,
// the noise RNG and, for the PHR channel, the attacker's PHT model.
class SimulatedChannel final : public TraceOracle {
 public:
  SimulatedChannel(const DecisionTree& tree, ChannelModel model, std::uint64_t seed = 0);

  std::size_t num_features() const override { return tree_.num_features(); }
  OracleResult observe(std::span<const double> input) override;
  std::int64_t queries() const override { return queries_; }

  const ChannelModel& model() const { return model_; }

 private:
  BranchTrace through_phr(const BranchTrace& truth, bool& truncated);
  BranchTrace through_step_counters(const BranchTrace& truth) const;

  const DecisionTree& tree_;
  ChannelModel model_;
  Rng noise_;
  std::int64_t queries_ = 0;
  phr::PhtSim pht_;
  // Collision readouts by true trace; the predictor is flushed per candidate,
  // so a readout depends on the victim state alone.
  std::map<std::vector<std::uint8_t>, phr::DecodedTrace> readouts_;
  phr::InferenceLayout layout_;
  std::vector<phr::Doublet> exit_;
};

class TreeLabelOracle final : public LabelOracle {
 public:
  explicit TreeLabelOracle(const DecisionTree& tree) : tree_(tree) {}
  std::size_t num_features() const override { return tree_.num_features(); }
  Label query(std::span<const double> input) override;
  std::int64_t queries() const override { return queries_; }

 private:
  const DecisionTree& tree_;
  std::int64_t queries_ = 0;
};

}  // namespace treestealer
