#include <benchmark/benchmark.h>

#include "ruleids/clustering.hpp"
#include "ruleids/embedding.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace ruleids;

void BM_ScanEpsilon(benchmark::State& state) {
  const auto b = testing::two_blobs(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)), 1, 10);
  DiffusionConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(scan_epsilon(b.points, config).chosen_epsilon);
}
BENCHMARK(BM_ScanEpsilon)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_SpectralDecompose(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto b = testing::two_blobs(n / 2, n - n / 2, 2, 10);
  const Eigen::MatrixXd w = compute_affinity(b.points, 20.0);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_decompose(w, 30).eigenvalues.size());
}
BENCHMARK(BM_SpectralDecompose)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Embed(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto b = testing::two_blobs(n / 2, n - n / 2, 3, 10);
  DiffusionConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(embed(b.points, config).embedding.coords.rows());
}
BENCHMARK(BM_Embed)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SelectK(benchmark::State& state) {
  const auto b = testing::two_blobs(500, 500, 4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(select_k(b.points, 2, 10, 7).k);
}
BENCHMARK(BM_SelectK)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
