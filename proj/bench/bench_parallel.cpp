// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>

#include "splitprune/brute_oracle.hpp"
#include "splitprune/mdp_env.hpp"

using namespace splitprune;

namespace {

// toy4 on the fine grid: 5 * 19^4 = 651,605 plans.
struct Toy4Fine {
  LayerGraph graph = preset("toy4");
  SurrogateOracle oracle{graph, 0.9};
  Grid grid = Grid::fine(graph);
  Environment env;
};

void BM_EnumerateSerial(benchmark::State& state) {
  const Toy4Fine w;
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_best_serial(w.graph, w.env, w.oracle, w.grid));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(plan_count(w.graph, w.grid)));
}

void BM_EnumerateParallel(benchmark::State& state) {
  const Toy4Fine w;
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_best(w.graph, w.env, w.oracle, w.grid));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(plan_count(w.graph, w.grid)));
}

std::vector<RolloutJob> jobs_for(const PruningMdp& mdp, std::size_t n) {
  std::vector<RolloutJob> jobs(n);
  for (std::size_t i = 0; i < n; ++i) jobs[i] = {mdp.options()[i % mdp.options().size()], i};
  return jobs;
}

const Policy uniform_rate = [](const EnvState&, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 0.9)(rng); };

void BM_RolloutSerial(benchmark::State& state) {
  const LayerGraph g = preset("vgg16");
  const SurrogateOracle oracle(g, 0.9);
  const PruningMdp mdp(g, Environment{}, oracle);
  const auto jobs = jobs_for(mdp, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rollout_batch_serial(mdp, jobs, uniform_rate, 1, "bench"));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RolloutParallel(benchmark::State& state) {
  const LayerGraph g = preset("vgg16");
  const SurrogateOracle oracle(g, 0.9);
  const PruningMdp mdp(g, Environment{}, oracle);
  const auto jobs = jobs_for(mdp, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rollout_batch(mdp, jobs, uniform_rate, 1, "bench"));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EnumerateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnumerateParallel)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutParallel)->Arg(256)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
