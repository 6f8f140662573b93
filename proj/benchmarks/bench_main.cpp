#include <benchmark/benchmark.h>

#include <random>

#include "nolab/datagen.hpp"
#include "nolab/models.hpp"
#include "nolab/ops.hpp"
#include "nolab/training.hpp"

using namespace nolab;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, DType dtype = DType::f32) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor::from(std::move(shape), std::move(v), dtype);
}

void BM_Gelu(benchmark::State& st) {
  auto x = random_tensor({16, 16, 64, 64}, 1);
  NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(ops::gelu(x));
}
BENCHMARK(BM_Gelu)->Unit(benchmark::kMillisecond);

void BM_Conv2d(benchmark::State& st) {
  const auto k = static_cast<std::size_t>(st.range(0));
  auto x = random_tensor({16, 16, 64, 64}, 2);
  auto w = random_tensor({16, 16, k, k}, 3);
  NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(ops::conv2d(x, w, ops::Padding::zero));
}
BENCHMARK(BM_Conv2d)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_SpectralRoundTrip(benchmark::State& st) {
  auto x = random_tensor({16, 16, 64, 64}, 4);
  NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(ops::irfft2_modes(ops::rfft2_modes(x, 12, 12), 64, 64));
}
BENCHMARK(BM_SpectralRoundTrip)->Unit(benchmark::kMillisecond);

void BM_FnoStep(benchmark::State& st) {
  models::ModelConfig mc;
  mc.arch = st.range(0) ? models::Arch::fno3x3 : models::Arch::fno;
  auto s = models::init_model(mc.resolved());
  auto a = random_tensor({16, 64, 64}, 5);
  auto y = random_tensor({16, 64, 64}, 6);
  for (auto _ : st) {
    Tape tape;
    Tape::Scope scope(tape);
    auto loss = training::relative_l2(models::forward(s, a), y);
    benchmark::DoNotOptimize(backward(loss, tape));
  }
}
BENCHMARK(BM_FnoStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DarcySolve(benchmark::State& st) {
  auto a = datagen::darcy_sample_coefficient(7, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(datagen::darcy_solve(a));
}
BENCHMARK(BM_DarcySolve)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_NavierStokes(benchmark::State& st) {
  const std::size_t n = 64;
  auto w0 = datagen::sample_grf(datagen::ns_initial_spec(), 8, n);
  datagen::NSConfig cfg;
  cfg.snapshot_times = {0.1};
  for (auto _ : st) benchmark::DoNotOptimize(datagen::ns_solve(w0, datagen::ns_forcing(n), cfg));
}
BENCHMARK(BM_NavierStokes)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
