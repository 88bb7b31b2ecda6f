#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "treestealer/tree.hpp"

namespace treestealer::phr {

// Two-bit PHR unit. Valid values are 0..3.
using Doublet = std::uint8_t;

inline constexpr std::size_t kCapacity = 194;
inline constexpr std::size_t kExitDoublets = 103;
inline constexpr std::size_t kDoubletsPerNode = 9;
inline constexpr std::size_t kTraceBudget = kCapacity - kExitDoublets;
// Ten full node patterns plus the single direction doublet of the root.
inline constexpr std::size_t kMaxDecodableDepth = (kTraceBudget - 1) / kDoubletsPerNode + 1;

static_assert(kTraceBudget == 91);
static_assert(kMaxDecodableDepth == 11);

// Per-node pattern of the simulated if/else traversal, oldest to newest.
// The direction doublet follows it: follow-up jmp for left, taken jcc for
// right.
inline constexpr std::array<Doublet, kDoubletsPerNode - 1> kCommonBlock = {2, 0, 3, 1,
                                                                          0, 1, 3, 0};
inline constexpr Doublet kLeftDoublet = 3;
inline constexpr Doublet kRightDoublet = 2;

// ((a ^ t) ^ ((a ^ t) >> 2)) & 3
Doublet footprint(std::uint64_t branch_addr, std::uint64_t target_addr);

// Pattern History Register: fixed 194-doublet shift register, index 0 is the
// newest entry. Only taken branches shift it.
class PhrState {
 public:
  PhrState() = default;

  void push_taken(std::uint64_t branch_addr, std::uint64_t target_addr);
  void push(Doublet d);
  // SHIFT_PHR: inserts n zero doublets at the newest end.
  void shift(std::size_t n);
  // CLEAR_PHR
  void clear();
  // WRITE_PHR: newest-first values, remaining older slots zeroed.
  void write(std::span<const Doublet> newest_first);

  Doublet operator[](std::size_t i) const { return doublets_[i]; }
  std::span<const Doublet, kCapacity> doublets() const { return doublets_; }

  // Taken branches recorded since the last clear/write, including ones that
  // have already been shifted out.
  std::uint64_t pushes_since_clear() const { return pushes_; }

  friend bool operator==(const PhrState& a, const PhrState& b) {
    return a.doublets_ == b.doublets_;
  }

 private:
  std::array<Doublet, kCapacity> doublets_{};
  std::uint64_t pushes_ = 0;
};

struct Prediction {
  bool predicted_taken = false;
  bool mispredicted = false;
  int provider = 0;  // table that supplied the prediction
};

// Four-table tagged predictor with 3-bit saturating counters. Table 0 is the
// base table and ignores the PHR; tables 1..3 fold progressively longer PHR
// windows into their 7-bit index.
class PhtSim {
 public:
  static constexpr std::array<std::size_t, 4> kWindows = {0, 24, 68, kCapacity};
  static constexpr std::uint8_t kInitialCounter = 3;
  static constexpr std::uint8_t kCounterMax = 7;

  Prediction lookup_update(const PhrState& phr, std::uint64_t branch_addr, bool taken);

  std::uint64_t mispredicts() const { return mispredicts_; }
  void reset();

  // Bit 6 of the branch address above the folded 7-bit history.
  static std::uint32_t index(const PhrState& phr, std::uint64_t branch_addr, int table);
  static std::uint32_t tag(std::uint64_t branch_addr) {
    return static_cast<std::uint32_t>(branch_addr & 0x1FFFU);
  }
  std::optional<std::uint8_t> counter(int table, std::uint32_t index, std::uint32_t tag) const;

 private:
  static std::uint32_t key(std::uint32_t index, std::uint32_t tag) { return (index << 13) | tag; }

  std::array<std::unordered_map<std::uint32_t, std::uint8_t>, 4> tables_;
  std::uint64_t mispredicts_ = 0;
};

struct CollisionStep {
  std::size_t position = 0;
  std::array<std::uint64_t, 4> mispredicts{};
  Doublet chosen = 0;
};

struct CollisionReadout {
  std::vector<Doublet> doublets;  // newest first
  std::vector<CollisionStep> steps;
};

inline constexpr std::uint64_t kTestBranch = 0x401a40;

// READ_PHR. Recovers the victim's newest-first doublets one position at a
// time: the prime path replays the victim, shifts by 193-k and runs the
// test branch not-taken; the probe path writes each candidate X behind the
// already recovered doublets and runs it taken. The candidate that shares
// the prime path's PHT entry shows the mispredict spike. Positions covered
// by `known_newest` are taken as given instead of probed.
CollisionReadout extract_via_collisions(std::span<const Doublet> victim_newest_first,
                                        PhtSim& pht, int rounds,
                                        std::span<const Doublet> known_newest = {});

struct BranchSite {
  std::uint64_t branch;
  std::uint64_t target;
};

// Code layout of the simulated inference routine. `seed` only moves the
// page base; footprints are invariant under it.
class InferenceLayout {
 public:
  explicit InferenceLayout(std::uint64_t seed = 0);

  const std::array<BranchSite, kDoubletsPerNode - 1>& common() const { return common_; }
  // Conditional jump, taken for the else (right) path.
  const BranchSite& conditional() const { return conditional_; }
  // Unconditional jump closing the then (left) block.
  const BranchSite& follow_up() const { return follow_up_; }

  // Taken branches executed by one inference run, oldest first.
  std::vector<BranchSite> taken_branches(const BranchTrace& trace) const;

 private:
  std::uint64_t base_;
  std::array<BranchSite, kDoubletsPerNode - 1> common_;
  BranchSite conditional_;
  BranchSite follow_up_;
};

// Doublets an inference run leaves in the PHR, newest first.
std::vector<Doublet> encode_inference(const BranchTrace& trace, std::uint64_t layout_seed = 0);

// Deterministic doublets pushed by the enclave exit path, newest first.
std::vector<Doublet> exit_doublets(std::size_t count = kExitDoublets);

struct DecodedTrace {
  BranchTrace trace;
  bool truncated = false;
  // Decisions the stream held before the register cut it.
  std::size_t expected_decisions = 0;
};

// Parses 9-doublet node patterns after skipping the newest `exit_count`
// doublets. `doublets` is newest first; only the newest `capacity` entries
// are visible. `pushed_total` is the stream length when `doublets` is a
// register snapshot (zero-filled beyond the pushed entries); by default the
// span itself is the whole stream.
DecodedTrace decode_branch_trace(std::span<const Doublet> doublets, std::size_t exit_count,
                                 std::optional<std::uint64_t> pushed_total = std::nullopt,
                                 std::size_t capacity = kCapacity);

// "303101302 303101302 3" style rendering, newest first, 9 per group.
std::string render(std::span<const Doublet> newest_first, std::size_t group = kDoubletsPerNode);

}  // namespace treestealer::phr
