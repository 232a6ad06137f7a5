// Parallel kernels against their serial reference, at layer shapes of the
// desk and paper architectures, plus one full training step.

#include <benchmark/benchmark.h>

#include <random>

#include "vpf/kernels.hpp"
#include "vpf/model.hpp"

using namespace vpf;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// args: m, k, n
template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&, bool)>
void BM_gemm_nn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(m, k, 1), b = random_matrix(k, n, 2);
  Matrix c(m, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * double(m * k * n) * double(state.iterations()), benchmark::Counter::kIsRate,
                         benchmark::Counter::kIs1000);
}

template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&, bool)>
void BM_gemm_tn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(k, m, 1), b = random_matrix(k, n, 2);
  Matrix c(m, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * double(m * k * n) * double(state.iterations()), benchmark::Counter::kIsRate,
                         benchmark::Counter::kIs1000);
}

template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&, bool)>
void BM_gemm_nt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(m, k, 1), b = random_matrix(n, k, 2);
  Matrix c(m, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * double(m * k * n) * double(state.iterations()), benchmark::Counter::kIsRate,
                         benchmark::Counter::kIs1000);
}

// batch 192: recurrent product (h x 4h), desk dense (64 -> 128), paper dense (200 -> 500)
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({192, 32, 128})->Args({192, 100, 400})->Args({192, 64, 128})->Args({192, 200, 500})->Args({192, 500, 500});
}

void BM_train_step(benchmark::State& state) {
  const auto arch = state.range(0) ? model::ArchitectureSpec::paper() : model::ArchitectureSpec::desk();
  auto m = model::build_model(arch, 1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::size_t batch = 192;
  model::Batch b;
  b.x_power.assign(arch.lookback, Matrix(batch, 1));
  b.x_feat.assign(arch.lookback, Matrix(batch, arch.feat_dim));
  for (auto& x : b.x_power)
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  for (auto& x : b.x_feat)
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  b.y = Matrix(batch, arch.output_dim);
  for (std::size_t i = 0; i < b.y.size(); ++i) b.y.data()[i] = g(rng);
  b.mask = Matrix(batch, arch.output_dim, 1.0);
  const auto params = m.tensors();
  auto adam = nn::AdamState::for_params(std::span<const Matrix* const>(params.data(), params.size()), 1e-3);
  nn::Rng r(1);
  for (auto _ : state) benchmark::DoNotOptimize(model::train_step(m, b, nn::LossKind::MAE, adam, r).value);
}

}  // namespace

BENCHMARK(BM_gemm_nn<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_nn<kernels::gemm_nn>)->Name("gemm_nn/omp")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_tn<kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_tn<kernels::gemm_tn>)->Name("gemm_tn/omp")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_nt<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_nt<kernels::gemm_nt>)->Name("gemm_nt/omp")->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_train_step)->Arg(0)->Arg(1)->ArgNames({"paper"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
