#include <benchmark/benchmark.h>

#include "l2r/contrastive.hpp"
#include "l2r/gmm.hpp"
#include "l2r/metrics.hpp"
#include "l2r/sampling.hpp"
#include "l2r/spatial.hpp"
#include "l2r/synth.hpp"

using namespace l2r;

namespace {

std::vector<Vec3> cloud(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-2, 2)};
  return pts;
}

void BM_KdTreeBuild(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(spatial::KdTree(pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdTreeBuild)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_KdTreeKnn(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 2);
  const spatial::KdTree tree(pts);
  const auto queries = cloud(1024, 3);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tree.k_nearest(queries[i++ % queries.size()], 8));
}
BENCHMARK(BM_KdTreeKnn)->Arg(1000)->Arg(100000);

void BM_Chamfer(benchmark::State& state) {
  const auto p = cloud(static_cast<std::size_t>(state.range(0)), 4);
  const auto q = cloud(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::chamfer(p, q));
}
BENCHMARK(BM_Chamfer)->Arg(200)->Arg(2000)->Arg(20000);

void BM_PipelineFrame(benchmark::State& state) {
  synth::SceneSpec spec;
  spec.n_frames = 2;
  const auto corpus = synth::gen_scene(spec);
  const auto counts = synth::radar_counts(corpus);
  const auto model = gmm::fit_em(counts, {.components = 1}).model;
  const sampling::NearestNeighborFlow flow;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sampling::process_frame(corpus.lidar[0], &corpus.lidar[1], model, sampling::SamplingConfig{}, flow, 0));
  }
}
BENCHMARK(BM_PipelineFrame)->Unit(benchmark::kMillisecond);

void BM_TotalLossForwardBackward(benchmark::State& state) {
  const auto fb = synth::gen_feature_batch({});
  const contrastive::ContrastiveConfig cfg;
  const auto bp = contrastive::BcsaParams::init(fb.spec.channels);
  const auto gp = contrastive::GlobalAggParams::init(fb.spec.channels, 0);
  for (auto _ : state) {
    CounterRng rng(0);
    auto loss = contrastive::total_loss(fb.scenes, cfg, bp, gp, rng);
    loss.backward();
    loss.release_graph();
    for (auto t : bp.tensors()) t.zero_grad();
    for (auto t : gp.tensors()) t.zero_grad();
  }
}
BENCHMARK(BM_TotalLossForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
