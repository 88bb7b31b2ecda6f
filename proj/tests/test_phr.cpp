#include <gtest/gtest.h>

#include "treestealer/error.hpp"
#include "treestealer/phr.hpp"
#include "treestealer/random.hpp"

using namespace treestealer;
using namespace treestealer::phr;

namespace {

BranchTrace random_trace(Rng& rng, std::size_t depth) {
  BranchTrace t;
  for (std::size_t i = 0; i < depth; ++i) t.push_back(static_cast<std::uint8_t>(rng.below(2)));
  return t;
}

std::vector<Doublet> with_exit(const BranchTrace& trace) {
  auto stream = exit_doublets();
  const auto body = encode_inference(trace);
  stream.insert(stream.end(), body.begin(), body.end());
  return stream;
}

}  // namespace

TEST(Phr, BudgetConstants) {
  EXPECT_EQ(kCapacity, 194u);
  EXPECT_EQ(kExitDoublets, 103u);
  EXPECT_EQ(kTraceBudget, 91u);
  EXPECT_EQ(kDoubletsPerNode, 9u);
  EXPECT_EQ(kMaxDecodableDepth, 11u);
}

TEST(Phr, Footprint) {
  EXPECT_EQ(footprint(0x1234, 0x1234), 0);
  EXPECT_EQ(footprint(0b0001, 0b0000), 1);
  EXPECT_EQ(footprint(0b0101, 0b0000), 0);
  EXPECT_EQ(footprint(0b1000, 0b0000), 2);
}

TEST(Phr, PushShiftWrite) {
  PhrState s;
  s.push(3);
  EXPECT_EQ(s[0], 3);
  EXPECT_EQ(s[1], 0);

  s.clear();
  for (int i = 0; i < 195; ++i) s.push(i == 0 ? 2 : 1);
  for (std::size_t i = 0; i < kCapacity; ++i) EXPECT_EQ(s[i], 1) << i;
  EXPECT_EQ(s.pushes_since_clear(), 195u);

  s.clear();
  s.push(2);
  s.shift(kCapacity);
  for (std::size_t i = 0; i < kCapacity; ++i) EXPECT_EQ(s[i], 0);

  const std::vector<Doublet> one{3};
  s.write(one);
  EXPECT_EQ(s[0], 3);
  for (std::size_t i = 1; i < kCapacity; ++i) EXPECT_EQ(s[i], 0);
  EXPECT_THROW(s.push(4), Error);
  EXPECT_THROW(s.shift(kCapacity + 1), Error);
}

TEST(Pht, InitialAndTrainedPredictions) {
  PhtSim pht;
  PhrState s;
  EXPECT_FALSE(pht.lookup_update(s, 0x4000, true).predicted_taken);
  pht.reset();
  for (int i = 0; i < 8; ++i) pht.lookup_update(s, 0x4000, true);
  EXPECT_TRUE(pht.lookup_update(s, 0x4000, true).predicted_taken);
}

TEST(Pht, IndexDependsOnWindow) {
  PhrState a;
  PhrState b;
  std::vector<Doublet> far(kCapacity, 0);
  far[100] = 3;
  b.write(far);
  EXPECT_EQ(PhtSim::index(a, 0x40, 1), PhtSim::index(b, 0x40, 1));
  EXPECT_EQ(PhtSim::index(a, 0x40, 2), PhtSim::index(b, 0x40, 2));
  EXPECT_NE(PhtSim::index(a, 0x40, 3), PhtSim::index(b, 0x40, 3));
  EXPECT_EQ(PhtSim::index(a, 0x40, 0) >> 7, 1u);
  EXPECT_EQ(PhtSim::tag(0xABCDEF), 0xABCDEFu & 0x1FFFu);
}

TEST(Encode, RendersNodePattern) {
  EXPECT_TRUE(encode_inference(BranchTrace{}).empty());
  EXPECT_EQ(render(encode_inference(BranchTrace::parse("LLLLL"))),
            "303101302 303101302 303101302 303101302 303101302");
  const auto rl = encode_inference(BranchTrace::parse("RLRLR"));
  std::string dirs;
  for (std::size_t i = 0; i < rl.size(); i += kDoubletsPerNode) dirs += std::to_string(rl[i]);
  EXPECT_EQ(dirs, "23232");
}

TEST(Encode, FootprintsIgnoreLayoutSeed) {
  const auto t = BranchTrace::parse("LRRLR");
  EXPECT_EQ(encode_inference(t, 0), encode_inference(t, 12345));
}

TEST(Decode, RoundTripUpToMaxDepth) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const auto t = random_trace(rng, rng.below(kMaxDecodableDepth + 1));
    const auto d = decode_branch_trace(with_exit(t), kExitDoublets);
    EXPECT_EQ(d.trace, t) << t.str();
    EXPECT_FALSE(d.truncated);
  }
}

TEST(Decode, DepthTwelveLosesTheRootFirst) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_trace(rng, 12);
    const auto d = decode_branch_trace(with_exit(t), kExitDoublets);
    EXPECT_TRUE(d.truncated);
    EXPECT_EQ(d.expected_decisions, 12u);
    ASSERT_EQ(d.trace.size(), 11u);
    for (std::size_t k = 0; k < 11; ++k) EXPECT_EQ(d.trace[k], t[k + 1]);
  }
}

TEST(Decode, RegisterSnapshotUsesPushCount) {
  const auto t = BranchTrace::parse("LRLLRRLRLLRL");
  PhrState s;
  const auto body = encode_inference(t);
  for (auto it = body.rbegin(); it != body.rend(); ++it) s.push(*it);
  const auto exit = exit_doublets();
  for (auto it = exit.rbegin(); it != exit.rend(); ++it) s.push(*it);
  const auto d = decode_branch_trace(s.doublets(), kExitDoublets, s.pushes_since_clear());
  EXPECT_TRUE(d.truncated);
  EXPECT_EQ(d.trace.str(), t.str().substr(1));
}

TEST(Decode, EmptyAndMalformed) {
  const auto exit = exit_doublets();
  const auto d = decode_branch_trace(exit, kExitDoublets);
  EXPECT_TRUE(d.trace.empty());
  EXPECT_FALSE(d.truncated);

  auto bad = with_exit(BranchTrace::parse("LL"));
  bad[kExitDoublets + kDoubletsPerNode + 3] ^= 1;
  try {
    decode_branch_trace(bad, kExitDoublets);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.block(), 1u);
  }
  auto bad_dir = with_exit(BranchTrace::parse("L"));
  bad_dir[kExitDoublets] = 1;
  EXPECT_THROW(decode_branch_trace(bad_dir, kExitDoublets), DecodeError);
}

TEST(Collisions, SingleDoublet) {
  PhtSim pht;
  const std::vector<Doublet> victim{3};
  EXPECT_EQ(extract_via_collisions(victim, pht, 8).doublets, victim);
  const std::vector<Doublet> four{2, 3, 0, 3};
  EXPECT_EQ(extract_via_collisions(four, pht, 8).doublets, four);
}

TEST(Collisions, IdentityWithSpike) {
  Rng rng(23);
  PhtSim pht;
  for (int v = 0; v < 20; ++v) {
    std::vector<Doublet> victim(1 + rng.below(kCapacity));
    for (auto& d : victim) d = static_cast<Doublet>(rng.below(4));
    const auto r = extract_via_collisions(victim, pht, 8);
    ASSERT_EQ(r.doublets, victim);
    for (const auto& step : r.steps) {
      for (Doublet x = 0; x < 4; ++x) {
        if (x != step.chosen) EXPECT_GT(step.mispredicts[step.chosen], step.mispredicts[x]);
      }
    }
  }
}

TEST(Collisions, KnownPrefixIsSkipped) {
  PhtSim pht;
  const std::vector<Doublet> victim{1, 2, 3, 0, 1};
  const std::vector<Doublet> known{1, 2};
  const auto r = extract_via_collisions(victim, pht, 8, known);
  EXPECT_EQ(r.doublets, victim);
  EXPECT_EQ(r.steps.size(), 3u);
  EXPECT_EQ(r.steps.front().position, 2u);
  EXPECT_THROW(extract_via_collisions(victim, pht, 4), Error);
}
