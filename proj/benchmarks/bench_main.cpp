#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "sheaf_fmtl/data.hpp"
#include "sheaf_fmtl/engine.hpp"
#include "sheaf_fmtl/sheaf.hpp"
#include "sheaf_fmtl/topology.hpp"
#include "sheaf_fmtl/trainer.hpp"

using namespace sheaf_fmtl;

namespace {

SheafGraph er_sheaf(std::size_t n, std::size_t d, double gamma) {
  TopologySpec spec;
  spec.kind = TopologyKind::ErdosRenyi;
  spec.n = n;
  spec.edge_probability = 0.2;
  spec.seed = 1;
  return SheafGraph::with_gamma(gen_topology(spec).graph, std::vector<std::size_t>(n, d), gamma);
}

Section gaussian_section(const SheafGraph& sheaf, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  auto theta = Section::zeros(sheaf.stalk_dims());
  for (std::size_t i = 0; i < theta.n_blocks(); ++i)
    for (Eigen::Index k = 0; k < theta[i].size(); ++k) theta[i][k] = g(rng);
  return theta;
}

void BM_LaplacianApply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto sheaf = er_sheaf(n, d, 0.25);
  const auto maps = init_maps({InitKind::Gaussian, 1.0, 2}, sheaf);
  const auto theta = gaussian_section(sheaf, 3);
  for (auto _ : state) benchmark::DoNotOptimize(laplacian_apply(sheaf, maps, theta));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(sheaf.n_edges()));
}
BENCHMARK(BM_LaplacianApply)->Args({20, 20})->Args({50, 80})->Args({100, 100});

void BM_TrainingRound(benchmark::State& state) {
  const auto algorithm = static_cast<Algorithm>(state.range(0));
  SynthSpec spec;
  spec.clients = 20;
  spec.features = 20;
  spec.classes = 4;
  spec.samples = 2000;
  spec.heterogeneity.kind = HeterogeneityKind::FeatureRotationGroups;
  spec.heterogeneity.groups = 4;
  const auto fed = synth_federation(spec);
  const auto sheaf = er_sheaf(20, 80, 0.25);
  TrainerConfig config;
  config.algorithm = algorithm;
  config.rounds = 10;
  config.alpha = 0.01;
  config.eta = 0.001;
  config.monitor_descent = false;
  config.init = {InitKind::IdentityPlusNoise, 0.01, 4};
  for (auto _ : state) benchmark::DoNotOptimize(run_training(sheaf, fed, config));
  state.SetItemsProcessed(state.iterations() * 10);
  state.SetLabel(std::string(to_string(algorithm)));
}
BENCHMARK(BM_TrainingRound)
    ->Arg(static_cast<int>(Algorithm::SheafFmtl))
    ->Arg(static_cast<int>(Algorithm::DFedU))
    ->Arg(static_cast<int>(Algorithm::DPSGD))
    ->Unit(benchmark::kMillisecond);

void BM_Topology(benchmark::State& state) {
  TopologySpec spec;
  spec.kind = static_cast<TopologyKind>(state.range(0));
  spec.n = 200;
  spec.edge_probability = 0.05;
  spec.ring_neighbors = 4;
  spec.attachments = 2;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    spec.seed = seed++;
    benchmark::DoNotOptimize(gen_topology(spec));
  }
}
BENCHMARK(BM_Topology)
    ->Arg(static_cast<int>(TopologyKind::ErdosRenyi))
    ->Arg(static_cast<int>(TopologyKind::WattsStrogatz))
    ->Arg(static_cast<int>(TopologyKind::BarabasiAlbert));

}  // namespace
BENCHMARK_MAIN();
