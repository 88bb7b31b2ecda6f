#include <benchmark/benchmark.h>

#include "treestealer/baseline.hpp"
#include "treestealer/channel.hpp"
#include "treestealer/extractor.hpp"
#include "treestealer/generate.hpp"
#include "treestealer/phr.hpp"
#include "treestealer/random.hpp"

using namespace treestealer;

namespace {

DecisionTree bench_tree(int depth) {
  GeneratorConfig cfg;
  cfg.num_features = 6;
  cfg.depth_min = depth;
  cfg.depth_max = depth;
  cfg.ranges_low.assign(6, 0.0);
  cfg.ranges_high.assign(6, 64.0);
  cfg.grid = 0.5;
  cfg.seed = 1;
  return generate_random_tree(cfg);
}

void BM_Infer(benchmark::State& state) {
  const auto tree = bench_tree(static_cast<int>(state.range(0)));
  Rng rng(3);
  std::vector<double> x(6);
  for (auto _ : state) {
    for (auto& v : x) v = rng.uniform(0.0, 64.0);
    benchmark::DoNotOptimize(infer_with_trace(tree, x));
  }
}
BENCHMARK(BM_Infer)->Arg(4)->Arg(8)->Arg(11);

void BM_Extraction(benchmark::State& state) {
  const auto tree = bench_tree(static_cast<int>(state.range(0)));
  ChannelModel model;
  model.kind = static_cast<ChannelKind>(state.range(1));
  std::int64_t queries = 0;
  for (auto _ : state) {
    SimulatedChannel channel(tree, model);
    const auto r = dt_extraction(channel, {tree.ranges_low(), tree.ranges_high(), 0.25});
    queries = r.queries;
  }
  state.counters["queries"] = static_cast<double>(queries);
}
BENCHMARK(BM_Extraction)
    ->Args({4, static_cast<int>(ChannelKind::Perfect)})
    ->Args({8, static_cast<int>(ChannelKind::Perfect)})
    ->Args({4, static_cast<int>(ChannelKind::PhrSgx)})
    ->Args({4, static_cast<int>(ChannelKind::StepCounterSev)})
    ->Unit(benchmark::kMillisecond);

void BM_ReadPhr(benchmark::State& state) {
  Rng rng(7);
  BranchTrace trace;
  for (int i = 0; i < state.range(0); ++i) trace.push_back(static_cast<std::uint8_t>(rng.below(2)));
  auto victim = phr::exit_doublets();
  const auto body = phr::encode_inference(trace);
  victim.insert(victim.end(), body.begin(), body.end());
  const auto pushed = victim.size();
  // The register keeps only the newest doublets.
  if (victim.size() > phr::kCapacity) victim.resize(phr::kCapacity);
  phr::PhtSim pht;
  for (auto _ : state) {
    const auto r = phr::extract_via_collisions(victim, pht, 8, phr::exit_doublets());
    benchmark::DoNotOptimize(phr::decode_branch_trace(r.doublets, phr::kExitDoublets, pushed));
  }
}
BENCHMARK(BM_ReadPhr)->Arg(1)->Arg(6)->Arg(11)->Unit(benchmark::kMicrosecond);

void BM_Baseline(benchmark::State& state) {
  const auto tree = bench_tree(static_cast<int>(state.range(0)));
  std::int64_t queries = 0;
  for (auto _ : state) {
    TreeLabelOracle oracle(tree);
    queries = api_attack_extract(oracle, tree.ranges_low(), tree.ranges_high(), {0.25, 10'000'000})
                  .queries;
  }
  state.counters["queries"] = static_cast<double>(queries);
}
BENCHMARK(BM_Baseline)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
