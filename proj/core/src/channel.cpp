#include "treestealer/channel.hpp"

#include "treestealer/error.hpp"

namespace treestealer {

std::string to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Perfect:
      return "perfect";
    case ChannelKind::PhrSgx:
      return "phr";
    case ChannelKind::StepCounterSev:
      return "step";
  }
  return "unknown";
}

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "perfect") return ChannelKind::Perfect;
  if (name == "phr") return ChannelKind::PhrSgx;
  if (name == "step") return ChannelKind::StepCounterSev;
  throw Error("unknown channel '" + name + "' (expected perfect, phr or step)");
}

std::size_t ChannelModel::max_phr_depth() const {
  return (phr_capacity - phr_exit_doublets - 1) / doublets_per_node + 1;
}

void ChannelModel::validate() const {
  if (!(flip_noise >= 0.0 && flip_noise < 1.0)) throw Error("flip_noise must lie in [0, 1)");
  if (kind != ChannelKind::PhrSgx) return;
  if (phr_capacity == 0 || phr_capacity > phr::kCapacity) {
    throw Error("phr_capacity must lie in [1, " + std::to_string(phr::kCapacity) + "]");
  }
  if (phr_exit_doublets >= phr_capacity) {
    throw Error("phr_exit_doublets must be below phr_capacity");
  }
  if (doublets_per_node != phr::kDoubletsPerNode) {
    throw Error("the simulated traversal emits " + std::to_string(phr::kDoubletsPerNode) +
                " doublets per node");
  }
  if (read_rounds < 8) throw Error("read_rounds must be at least 8");
}

StepLog simulate_step_log(const BranchTrace& trace) {
  StepLog log;
  // call into the traversal routine, then frame setup
  log.events.push_back({false, true});
  log.events.push_back({false, false});
  for (std::size_t i = 0; i < trace.size(); ++i) {
    log.events.push_back({false, false});  // load feature
    log.events.push_back({false, false});  // compare against threshold
    log.node_step_offsets.push_back(log.events.size());
    const bool right = trace[i] == 1;
    log.events.push_back({true, right});  // jcc
    if (right) {
      log.events.push_back({false, false});  // else body
    } else {
      log.events.push_back({false, false});  // then body
      log.events.push_back({false, true});   // jmp over the else block
    }
  }
  log.events.push_back({false, false});  // load leaf value
  log.events.push_back({false, true});   // ret
  return log;
}

BranchTrace decode_step_counters(std::span<const StepEvent> event_log,
                                 std::span<const std::size_t> node_step_offsets) {
  BranchTrace trace;
  for (std::size_t n = 0; n < node_step_offsets.size(); ++n) {
    const auto offset = node_step_offsets[n];
    if (offset >= event_log.size()) {
      throw StepLogError("node " + std::to_string(n) + " step offset " +
                         std::to_string(offset) + " is outside the event log");
    }
    const auto& event = event_log[offset];
    if (!event.retired_conditional) {
      throw StepLogError("no retired conditional branch at step " + std::to_string(offset));
    }
    trace.push_back(event.retired_taken ? 1 : 0);
  }
  return trace;
}

SimulatedChannel::SimulatedChannel(const DecisionTree& tree, ChannelModel model,
                                   std::uint64_t seed)
    : tree_(tree), model_(model), noise_(seed), layout_(model.layout_seed) {
  model_.validate();
  if (model_.kind == ChannelKind::PhrSgx) exit_ = phr::exit_doublets(model_.phr_exit_doublets);
}

OracleResult SimulatedChannel::observe(std::span<const double> input) {
  if (input.size() != tree_.num_features()) {
    throw DimensionMismatch(tree_.num_features(), input.size());
  }
  ++queries_;
  auto truth = infer_with_trace(tree_, input);
  OracleResult result;
  result.label = truth.label;
  result.queries_observed = queries_;
  switch (model_.kind) {
    case ChannelKind::Perfect:
      result.trace = std::move(truth.trace);
      break;
    case ChannelKind::PhrSgx:
      result.trace = through_phr(truth.trace, result.truncated);
      break;
    case ChannelKind::StepCounterSev:
      result.trace = through_step_counters(truth.trace);
      break;
  }
  if (model_.flip_noise > 0.0) {
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      if (noise_.bernoulli(model_.flip_noise)) result.trace.flip(i);
    }
  }
  return result;
}

BranchTrace SimulatedChannel::through_phr(const BranchTrace& truth, bool& truncated) {
  auto it = readouts_.find(truth.bits());
  if (it == readouts_.end()) {
    phr::PhrState victim;
    for (const auto& site : layout_.taken_branches(truth)) victim.push_taken(site.branch, site.target);
    // The exit path is newest; push it oldest first.
    for (auto e = exit_.rbegin(); e != exit_.rend(); ++e) victim.push(*e);

    // The exit doublets are a fixed property of the enclave binary, so the
    // read starts right behind them.
    const auto readout =
        phr::extract_via_collisions(victim.doublets(), pht_, model_.read_rounds, exit_);
    it = readouts_
             .emplace(truth.bits(),
                      phr::decode_branch_trace(readout.doublets, model_.phr_exit_doublets,
                                               victim.pushes_since_clear(), model_.phr_capacity))
             .first;
  }
  const auto& decoded = it->second;
  truncated = decoded.truncated;
  if (truncated && model_.strict) {
    throw TruncatedTrace(decoded.trace.size(), decoded.expected_decisions);
  }
  return decoded.trace;
}

BranchTrace SimulatedChannel::through_step_counters(const BranchTrace& truth) const {
  const auto log = simulate_step_log(truth);
  return decode_step_counters(log.events, log.node_step_offsets);
}

Label TreeLabelOracle::query(std::span<const double> input) {
  ++queries_;
  return infer(tree_, input);
}

}  // namespace treestealer
