#include <benchmark/benchmark.h>

#include "gfomlab/dynamics.hpp"
#include "gfomlab/ensembles.hpp"
#include "gfomlab/gd_se.hpp"
#include "gfomlab/programs.hpp"
#include "gfomlab/state_evolution.hpp"

namespace {

using namespace gfom;

void BM_SampleSymmetric(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = EnsembleSpec::wigner(n);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_symmetric(spec, n, seed++));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SampleSymmetric)->RangeMultiplier(2)->Range(256, 2048)->Unit(benchmark::kMillisecond);

void BM_SampleRademacher(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = EnsembleSpec::wigner(n, EntryLaw::rademacher());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_symmetric(spec, n, seed++));
}
BENCHMARK(BM_SampleRademacher)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RunSymmetricTanhAmp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t T = 5;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 1);
  const auto prog = build_tanh_amp(
      T, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)),
      std::vector<Eigen::VectorXd>(T - 1, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5)));
  for (auto _ : state) benchmark::DoNotOptimize(run_symmetric(A, prog));
}
BENCHMARK(BM_RunSymmetricTanhAmp)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SeSymmetric(benchmark::State& state) {
  const std::size_t n = 200, T = 5;
  const auto prog = build_tanh_amp(
      T, Eigen::VectorXd::LinSpaced(n, -1.0, 1.0),
      std::vector<Eigen::VectorXd>(T - 1, Eigen::VectorXd::Constant(n, 0.5)));
  const auto profile = EnsembleSpec::wigner(n).second_moments();
  SeOptions opt;
  opt.mc_samples = static_cast<std::size_t>(state.range(0));
  opt.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(se_symmetric(prog, profile, T, opt));
}
BENCHMARK(BM_SeSymmetric)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_GdSeHomogeneous(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const Eigen::VectorXd xi = Eigen::VectorXd::LinSpaced(800, -2.0, 2.0);
  GdSeOptions opt;
  opt.mc_samples = 20000;
  opt.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gd_se_homogeneous(Loss::squared_cos(0.1), 0.2, 0.1, 400.0, xi, 2.0, T, opt));
  }
}
BENCHMARK(BM_GdSeHomogeneous)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
