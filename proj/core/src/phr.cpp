#include "treestealer/phr.hpp"

#include <algorithm>
#include <sstream>

#include "treestealer/error.hpp"
#include "treestealer/random.hpp"

namespace treestealer::phr {

Doublet footprint(std::uint64_t branch_addr, std::uint64_t target_addr) {
  const std::uint64_t x = branch_addr ^ target_addr;
  return static_cast<Doublet>((x ^ (x >> 2)) & 3U);
}

void PhrState::push_taken(std::uint64_t branch_addr, std::uint64_t target_addr) {
  push(footprint(branch_addr, target_addr));
}

void PhrState::push(Doublet d) {
  if (d > 3) throw Error("doublet out of range");
  std::copy_backward(doublets_.begin(), doublets_.end() - 1, doublets_.end());
  doublets_[0] = d;
  ++pushes_;
}

void PhrState::shift(std::size_t n) {
  if (n > kCapacity) throw Error("shift amount exceeds PHR capacity");
  if (n == 0) return;
  std::copy_backward(doublets_.begin(), doublets_.end() - static_cast<std::ptrdiff_t>(n),
                     doublets_.end());
  std::fill_n(doublets_.begin(), n, Doublet{0});
  pushes_ += n;
}

void PhrState::clear() {
  doublets_.fill(0);
  pushes_ = 0;
}

void PhrState::write(std::span<const Doublet> newest_first) {
  if (newest_first.size() > kCapacity) throw Error("write exceeds PHR capacity");
  doublets_.fill(0);
  for (std::size_t i = 0; i < newest_first.size(); ++i) {
    if (newest_first[i] > 3) throw Error("doublet out of range");
    doublets_[i] = newest_first[i];
  }
  pushes_ = newest_first.size();
}

std::uint32_t PhtSim::index(const PhrState& phr, std::uint64_t branch_addr, int table) {
  const auto bit6 = static_cast<std::uint32_t>((branch_addr >> 6) & 1U);
  std::uint32_t fold = 0;
  const auto window = kWindows[static_cast<std::size_t>(table)];
  for (std::size_t i = 0; i < window; ++i) {
    const std::uint32_t d = phr[i];
    const std::size_t bit = 2 * i;
    fold ^= (d & 1U) << (bit % 7);
    fold ^= ((d >> 1) & 1U) << ((bit + 1) % 7);
  }
  return (bit6 << 7) | fold;
}

std::optional<std::uint8_t> PhtSim::counter(int table, std::uint32_t index,
                                            std::uint32_t tag) const {
  const auto& t = tables_.at(static_cast<std::size_t>(table));
  const auto it = t.find(key(index, tag));
  if (it == t.end()) return std::nullopt;
  return it->second;
}

Prediction PhtSim::lookup_update(const PhrState& phr, std::uint64_t branch_addr, bool taken) {
  const auto t = tag(branch_addr);
  std::array<std::uint32_t, 4> keys{};
  for (int i = 0; i < 4; ++i) keys[static_cast<std::size_t>(i)] = key(index(phr, branch_addr, i), t);

  // Longest history with a tag hit provides; the base table always hits.
  int provider = 0;
  for (int i = 3; i >= 1; --i) {
    if (tables_[static_cast<std::size_t>(i)].contains(keys[static_cast<std::size_t>(i)])) {
      provider = i;
      break;
    }
  }
  auto& counter = tables_[static_cast<std::size_t>(provider)]
                      .try_emplace(keys[static_cast<std::size_t>(provider)], kInitialCounter)
                      .first->second;
  Prediction p;
  p.provider = provider;
  p.predicted_taken = counter >= 4;
  p.mispredicted = p.predicted_taken != taken;
  if (taken) {
    if (counter < kCounterMax) ++counter;
  } else if (counter > 0) {
    --counter;
  }
  if (p.mispredicted) {
    ++mispredicts_;
    // Allocate weak entries in every longer-history table.
    for (int i = provider + 1; i <= 3; ++i) {
      tables_[static_cast<std::size_t>(i)].try_emplace(keys[static_cast<std::size_t>(i)],
                                                      taken ? 4 : 3);
    }
  }
  return p;
}

void PhtSim::reset() {
  for (auto& t : tables_) t.clear();
  mispredicts_ = 0;
}

CollisionReadout extract_via_collisions(std::span<const Doublet> victim_newest_first,
                                        PhtSim& pht, int rounds,
                                        std::span<const Doublet> known_newest) {
  if (victim_newest_first.size() > kCapacity) throw Error("victim exceeds PHR capacity");
  if (rounds < 8) throw Error("collision read needs at least 8 rounds");
  CollisionReadout out;
  PhrState phr;
  std::array<Doublet, kCapacity> probe{};
  for (std::size_t k = 0; k < victim_newest_first.size(); ++k) {
    if (k < known_newest.size()) {
      out.doublets.push_back(known_newest[k]);
      continue;
    }
    // Recovered doublets sit just newer than the unknown one at slot 193.
    probe.fill(0);
    for (std::size_t j = 0; j < k; ++j) probe[kCapacity - 1 - k + j] = out.doublets[j];

    CollisionStep step;
    step.position = k;
    for (Doublet x = 0; x < 4; ++x) {
      probe[kCapacity - 1] = x;
      // Each candidate starts from a flushed predictor.
      pht.reset();
      const auto before = pht.mispredicts();
      for (int r = 0; r < rounds; ++r) {
        phr.clear();
        phr.write(victim_newest_first);
        phr.shift(kCapacity - 1 - k);
        pht.lookup_update(phr, kTestBranch, false);

        phr.write(probe);
        pht.lookup_update(phr, kTestBranch, true);
      }
      step.mispredicts[x] = pht.mispredicts() - before;
    }
    const auto best = std::max_element(step.mispredicts.begin(), step.mispredicts.end());
    if (std::count(step.mispredicts.begin(), step.mispredicts.end(), *best) != 1) {
      throw CollisionReadError(k, "no unique mispredict spike");
    }
    step.chosen = static_cast<Doublet>(best - step.mispredicts.begin());
    out.doublets.push_back(step.chosen);
    out.steps.push_back(step);
  }
  return out;
}

InferenceLayout::InferenceLayout(std::uint64_t seed) {
  Rng rng(seed);
  base_ = 0x400000 + (rng.below(0x1000) << 12);
  // Offsets stay below the page size, so only the low nibble of
  // branch ^ target (fixed by construction) reaches the footprint.
  for (std::size_t i = 0; i < common_.size(); ++i) {
    const std::uint64_t branch = base_ + 0x105 + 0x20 * i;
    common_[i] = {branch, branch ^ (0x40U | kCommonBlock[i])};
  }
  conditional_ = {base_ + 0x2a3, (base_ + 0x2a3) ^ (0x80U | kRightDoublet)};
  follow_up_ = {base_ + 0x2c7, (base_ + 0x2c7) ^ (0x100U | kLeftDoublet)};
}

std::vector<BranchSite> InferenceLayout::taken_branches(const BranchTrace& trace) const {
  std::vector<BranchSite> sites;
  sites.reserve(trace.size() * kDoubletsPerNode);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    sites.insert(sites.end(), common_.begin(), common_.end());
    sites.push_back(trace[i] == 0 ? follow_up_ : conditional_);
  }
  return sites;
}

std::vector<Doublet> encode_inference(const BranchTrace& trace, std::uint64_t layout_seed) {
  const InferenceLayout layout(layout_seed);
  const auto sites = layout.taken_branches(trace);
  std::vector<Doublet> out;
  out.reserve(sites.size());
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    out.push_back(footprint(it->branch, it->target));
  }
  return out;
}

std::vector<Doublet> exit_doublets(std::size_t count) {
  Rng rng(0x5eed'e817);
  std::vector<Doublet> out(count);
  for (auto& d : out) d = static_cast<Doublet>(rng.below(4));
  return out;
}

DecodedTrace decode_branch_trace(std::span<const Doublet> doublets, std::size_t exit_count,
                                 std::optional<std::uint64_t> pushed_total,
                                 std::size_t capacity) {
  if (exit_count >= capacity) throw Error("exit doublet count must be below the PHR capacity");
  const std::uint64_t stream = pushed_total.value_or(doublets.size());
  const auto visible =
      static_cast<std::size_t>(std::min<std::uint64_t>({doublets.size(), capacity, stream}));
  const bool cut = stream > visible;

  std::vector<std::uint8_t> newest_first;
  std::size_t pos = exit_count;
  std::size_t block = 0;
  while (pos < visible) {
    const Doublet dir = doublets[pos];
    if (dir == kLeftDoublet) {
      newest_first.push_back(0);
    } else if (dir == kRightDoublet) {
      newest_first.push_back(1);
    } else {
      throw DecodeError(block, "direction doublet " + std::to_string(dir));
    }
    // Common block newest first is the reverse of its oldest-first layout.
    for (std::size_t j = 1; j < kDoubletsPerNode; ++j) {
      if (pos + j >= visible) {
        if (!cut) throw DecodeError(block, "stream ends inside a node pattern");
        break;
      }
      if (doublets[pos + j] != kCommonBlock[kCommonBlock.size() - j]) {
        throw DecodeError(block, "common doublet " + std::to_string(j) + " mismatches");
      }
    }
    pos += kDoubletsPerNode;
    ++block;
  }
  DecodedTrace out;
  out.trace = BranchTrace(std::vector<std::uint8_t>(newest_first.rbegin(), newest_first.rend()));
  if (stream > exit_count) {
    out.expected_decisions =
        static_cast<std::size_t>((stream - exit_count + kDoubletsPerNode - 1) / kDoubletsPerNode);
  }
  out.truncated = out.trace.size() < out.expected_decisions;
  return out;
}

std::string render(std::span<const Doublet> newest_first, std::size_t group) {
  std::string s;
  for (std::size_t i = 0; i < newest_first.size(); ++i) {
    if (i > 0 && group > 0 && i % group == 0) s.push_back(' ');
    s.push_back(static_cast<char>('0' + newest_first[i]));
  }
  return s;
}

}  // namespace treestealer::phr
