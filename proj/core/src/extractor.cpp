#include "treestealer/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "treestealer/error.hpp"
#include "treestealer/tree_io.hpp"

namespace treestealer {

std::optional<int> ShadowTree::pop_backlog() {
  if (backlog_.empty()) return std::nullopt;
  const int id = backlog_.front();
  backlog_.pop_front();
  node(id).in_backlog = false;
  return id;
}

void ShadowTree::remove_from_backlog(int id) {
  auto& n = node(id);
  if (!n.in_backlog) return;
  backlog_.erase(std::find(backlog_.begin(), backlog_.end(), id));
  n.in_backlog = false;
}

int ShadowTree::add_node(std::optional<int> parent, std::uint8_t side,
                         std::span<const double> input, const BranchTrace& trace) {
  ShadowNode n;
  n.id = static_cast<int>(nodes_.size());
  n.parent = parent;
  n.explore_input.assign(input.begin(), input.end());
  n.explore_trace = trace;
  n.feat_thresholds.resize(m_);
  n.feat_depths.resize(m_);
  if (parent) {
    const auto& p = node(*parent);
    n.depth = p.depth + 1;
    n.feat_thresholds = p.feat_thresholds;
    n.feat_depths = p.feat_depths;
    if (p.feature && p.threshold) {
      const auto f = static_cast<std::size_t>(*p.feature);
      n.feat_thresholds[f].push_back(*p.threshold);
      n.feat_depths[f].push_back(p.depth);
    }
  }
  n.in_backlog = true;
  nodes_.push_back(std::move(n));
  const int id = nodes_.back().id;
  if (parent) {
    auto& p = node(*parent);
    (side == 0 ? p.left : p.right) = id;
  }
  backlog_.push_back(id);
  return id;
}

void ShadowTree::propagate_threshold(int id) {
  const auto& src = node(id);
  const auto f = static_cast<std::size_t>(src.feature.value());
  const double t = src.threshold.value();
  const int depth = src.depth;
  std::vector<int> stack;
  if (src.left) stack.push_back(*src.left);
  if (src.right) stack.push_back(*src.right);
  while (!stack.empty()) {
    auto& n = node(stack.back());
    stack.pop_back();
    n.feat_thresholds[f].push_back(t);
    n.feat_depths[f].push_back(depth);
    if (n.left) stack.push_back(*n.left);
    if (n.right) stack.push_back(*n.right);
  }
}

bool ShadowTree::complete() const {
  if (nodes_.empty()) return false;
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const ShadowNode& n) { return n.complete(); });
}

DecisionTree ShadowTree::to_tree(std::vector<double> ranges_low,
                                 std::vector<double> ranges_high) const {
  if (nodes_.empty()) throw Error("shadow tree is empty");
  std::vector<TreeNode> out(nodes_.size());
  for (const auto& n : nodes_) {
    auto& t = out[static_cast<std::size_t>(n.id)];
    t.id = n.id;
    t.depth = n.depth;
    if (n.value) {
      t.value = n.value;
      continue;
    }
    if (!n.feature || !n.threshold || !n.left || !n.right) {
      throw Error("shadow node " + std::to_string(n.id) + " is incomplete");
    }
    t.feature = n.feature;
    t.threshold = n.threshold;
    t.left = n.left;
    t.right = n.right;
  }
  return DecisionTree(std::move(out), 0, std::move(ranges_low), std::move(ranges_high));
}

void AttackParams::validate() const {
  if (ranges_low.empty()) throw Error("feature ranges are empty");
  if (ranges_low.size() != ranges_high.size()) {
    throw DimensionMismatch(ranges_low.size(), ranges_high.size());
  }
  for (std::size_t i = 0; i < ranges_low.size(); ++i) {
    if (!std::isfinite(ranges_low[i]) || !std::isfinite(ranges_high[i]) ||
        !(ranges_low[i] < ranges_high[i])) {
      throw Error("invalid range for feature " + std::to_string(i));
    }
  }
  if (!std::isfinite(epsilon) || !(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (max_queries < 0) throw Error("max_queries must be non-negative");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Explore:
      return "explore";
    case Phase::Feature:
      return "feature";
    case Phase::Threshold:
      return "threshold";
  }
  return "unknown";
}

nlohmann::json to_json(const TranscriptEntry& entry) {
  nlohmann::json j;
  j["query_index"] = entry.query_index;
  j["input"] = entry.input;
  j["label"] = label_to_json(entry.label);
  j["trace"] = entry.trace.str();
  j["phase"] = to_string(entry.phase);
  j["target_node_id"] =
      entry.target_node_id ? nlohmann::json(*entry.target_node_id) : nlohmann::json(nullptr);
  return j;
}

std::string transcript_jsonl(std::span<const TranscriptEntry> transcript) {
  std::string out;
  for (const auto& e : transcript) {
    out += to_json(e).dump();
    out.push_back('\n');
  }
  return out;
}

void update_threshold_ranges(ShadowNode& node, std::uint8_t bit, std::span<const double> input) {
  auto& slot = bit == 0 ? node.t_left : node.t_right;
  if (!slot) {
    slot.emplace(input.begin(), input.end());
    return;
  }
  auto& v = *slot;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = bit == 0 ? std::min(v[i], input[i]) : std::max(v[i], input[i]);
  }
}

void add_nodes(ShadowTree& shadow, const Observation& obs, std::optional<int> track_only) {
  const auto& trace = obs.trace;
  if (!shadow.root()) shadow.add_node(std::nullopt, 0, obs.input, trace);
  int v = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (shadow.node(v).value) {
      throw ChannelInconsistency("trace " + trace.str() + " continues past leaf " +
                                 std::to_string(v));
    }
    if (!track_only || *track_only == v) update_threshold_ranges(shadow.node(v), trace[i], obs.input);
    const auto& n = shadow.node(v);
    const auto child = trace[i] == 0 ? n.left : n.right;
    v = child ? *child : shadow.add_node(v, trace[i], obs.input, trace);
  }
  auto& last = shadow.node(v);
  if (last.value) {
    if (*last.value != obs.label) {
      throw ChannelInconsistency("leaf " + std::to_string(v) + " returned " +
                                 to_string(obs.label) + ", previously " + to_string(*last.value));
    }
    return;
  }
  if (last.left || last.right || last.feature || !last.in_backlog) {
    throw ChannelInconsistency("trace " + trace.str() + " ends at inner node " +
                               std::to_string(v));
  }
  last.value = obs.label;
  shadow.remove_from_backlog(v);
}

namespace {

void check_path(const ShadowNode& node, const BranchTrace& trace) {
  const auto d = static_cast<std::size_t>(node.depth);
  if (trace.size() <= d) {
    throw PathDeviation(node.id, "probe stopped at depth " + std::to_string(trace.size()));
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (trace[i] != node.explore_trace[i]) {
      throw PathDeviation(node.id, "probe left the path at depth " + std::to_string(i));
    }
  }
}

// Interval of feature f that still reaches `node`, bounded by completed
// ancestors testing f.
std::pair<double, double> reachable_interval(const ShadowNode& node, std::size_t f,
                                             const AttackParams& params) {
  double lo = params.ranges_low[f];
  double hi = params.ranges_high[f];
  const auto& tt = node.feat_thresholds[f];
  const auto& dd = node.feat_depths[f];
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (node.explore_trace[static_cast<std::size_t>(dd[i])] == 0) {
      lo = std::max(lo, tt[i]);
    } else {
      hi = std::min(hi, tt[i]);
    }
  }
  return {lo, hi};
}

}  // namespace

int add_attack_info(ShadowTree& shadow, std::optional<int>& current, const Observation& obs,
                    int beta, const AttackParams& params) {
  if (!current) {
    add_nodes(shadow, obs, params.passive_tracking ? std::nullopt : std::optional<int>(-1));
    return 0;
  }
  const int v = *current;
  check_path(shadow.node(v), obs.trace);
  add_nodes(shadow, obs, params.passive_tracking ? std::nullopt : std::optional<int>(v));

  auto& node = shadow.node(v);
  const auto d = static_cast<std::size_t>(node.depth);
  if (!node.feature) {
    if (obs.trace[d] == node.explore_trace[d]) return beta;
    node.feature = beta - 1;
    if (!params.passive_tracking) {
      const auto f = static_cast<std::size_t>(beta - 1);
      const auto [lo, hi] = reachable_interval(node, f, params);
      node.t_left.emplace(params.num_features(), 0.0);
      node.t_right.emplace(params.num_features(), 0.0);
      (*node.t_left)[f] = hi;
      (*node.t_right)[f] = lo;
    }
    return 0;
  }

  const auto f = static_cast<std::size_t>(*node.feature);
  if (!node.t_left || !node.t_right) {
    throw Error("shadow node " + std::to_string(v) + " has no threshold range");
  }
  const double delta = (*node.t_left)[f] - (*node.t_right)[f];
  if (delta <= params.epsilon) {
    node.threshold = (*node.t_right)[f] + delta / 2;
    shadow.propagate_threshold(v);
    current.reset();
  }
  return beta;
}

std::vector<double> craft_inp_feature(const ShadowNode& current, const ShadowTree& shadow,
                                      const AttackParams& params, int beta,
                                      std::vector<std::string>* warnings) {
  (void)shadow;
  const auto b = static_cast<std::size_t>(beta);
  const auto& lo = params.ranges_low;
  const auto& hi = params.ranges_high;
  const double eps = params.epsilon;
  std::vector<double> x;
  if (!current.parent) {
    x = hi;
    x[b] = lo[b];
    return x;
  }
  x = current.explore_input;
  const auto bit = current.explore_trace[static_cast<std::size_t>(current.depth)];
  const auto& tt = current.feat_thresholds[b];
  const auto& dd = current.feat_depths[b];
  if (tt.empty()) {
    x[b] = bit == 0 ? lo[b] : hi[b];
  } else {
    const auto last_bit = current.explore_trace[static_cast<std::size_t>(dd.back())];
    if (last_bit == 0 && bit == 0) {
      x[b] = tt.back() + eps;
    } else if (last_bit == 1 && bit == 1) {
      x[b] = tt.back() - eps;
    } else if (bit == 1) {
      double minrt = hi[b];
      for (std::size_t i = 0; i < tt.size(); ++i) {
        if (current.explore_trace[static_cast<std::size_t>(dd[i])] == 1) minrt = std::min(minrt, tt[i]);
      }
      x[b] = minrt - eps;
    } else {
      double maxlt = lo[b];
      for (std::size_t i = 0; i < tt.size(); ++i) {
        if (current.explore_trace[static_cast<std::size_t>(dd[i])] == 0) maxlt = std::max(maxlt, tt[i]);
      }
      x[b] = maxlt + eps;
    }
  }
  if (x[b] < lo[b] || x[b] > hi[b]) {
    const double clamped = std::clamp(x[b], lo[b], hi[b]);
    if (warnings) {
      std::ostringstream os;
      os << "node " << current.id << ": feature " << beta << " probe " << x[b]
         << " clamped to " << clamped;
      warnings->push_back(os.str());
    }
    x[b] = clamped;
  }
  return x;
}

std::vector<double> craft_inp_threshold(const ShadowNode& current) {
  if (!current.feature || !current.t_left || !current.t_right) {
    throw Error("shadow node " + std::to_string(current.id) + " has no threshold range");
  }
  const auto f = static_cast<std::size_t>(*current.feature);
  auto x = current.explore_input;
  x[f] = (*current.t_right)[f] + ((*current.t_left)[f] - (*current.t_right)[f]) / 2;
  return x;
}

std::optional<CraftedInput> craft_next_input(const ShadowNode& current, const ShadowTree& shadow,
                                             const AttackParams& params, int beta,
                                             std::vector<std::string>* warnings) {
  if (current.complete()) return std::nullopt;
  if (!current.feature) {
    if (beta >= static_cast<int>(params.num_features())) throw FeatureNotFound(current.id);
    return CraftedInput{craft_inp_feature(current, shadow, params, beta, warnings), beta + 1};
  }
  return CraftedInput{craft_inp_threshold(current), beta};
}

ExtractionResult dt_extraction(TraceOracle& oracle, const AttackParams& params) {
  params.validate();
  if (oracle.num_features() != params.num_features()) {
    throw DimensionMismatch(oracle.num_features(), params.num_features());
  }
  ExtractionResult result{ShadowTree(params.num_features()), std::nullopt, 0, {}, {}};
  auto& shadow = result.shadow;

  auto query = [&](std::vector<double> input, Phase phase, std::optional<int> target) {
    if (params.max_queries > 0 && result.queries >= params.max_queries) {
      throw BudgetExhausted("query budget of " + std::to_string(params.max_queries) +
                            " exhausted");
    }
    auto r = oracle.observe(input);
    result.transcript.push_back({result.queries, input, r.label, r.trace, phase, target});
    ++result.queries;
    return Observation{std::move(input), std::move(r.label), std::move(r.trace)};
  };

  std::optional<int> current;
  int beta = add_attack_info(shadow, current, query(params.ranges_high, Phase::Explore, {}), 0,
                             params);
  while (current || !shadow.backlog().empty()) {
    if (!current) {
      current = shadow.pop_backlog();
      beta = 0;
    }
    const auto crafted = craft_next_input(shadow.node(*current), shadow, params, beta,
                                          &result.warnings);
    if (!crafted) {
      current.reset();
      continue;
    }
    const auto phase = shadow.node(*current).feature ? Phase::Threshold : Phase::Feature;
    auto obs = query(crafted->input, phase, current);
    beta = add_attack_info(shadow, current, obs, crafted->beta, params);
  }
  result.tree = shadow.to_tree(params.ranges_low, params.ranges_high);
  return result;
}

}  // namespace treestealer
