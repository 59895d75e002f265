// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to pick the
// thread count for the omp variants.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "qlens/kernels.hpp"
#include "qlens/rng.hpp"

namespace k = qlens::kernels;

namespace {

std::vector<float> randn(std::size_t n, std::uint64_t seed) {
  qlens::RngStream rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

struct Quant {
  std::vector<float> x;
  std::vector<float> scale;
  std::vector<std::uint16_t> zero;
  k::GroupLayout layout;
  std::vector<std::uint8_t> codes;

  explicit Quant(std::size_t rows, std::size_t cols) : x(randn(rows * cols, 1)), scale(rows, 3.0f / 128), zero(rows, 128), codes(rows * cols) {
    layout.axis = rows;
    layout.inner = cols;
    layout.mode = k::GroupMode::kChannel;
  }
  k::QuantParams params() const { return {scale, zero, 8}; }
};

template <bool Omp>
void BM_sum_sq(benchmark::State& state) {
  const auto x = randn(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Omp ? k::omp::sum_sq(x) : k::serial::sum_sq(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Omp>
void BM_quantize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Quant q(n / 1024, 1024);
  for (auto _ : state) {
    if (Omp)
      benchmark::DoNotOptimize(k::omp::quantize(q.x, q.layout, q.params(), q.codes));
    else
      benchmark::DoNotOptimize(k::serial::quantize(q.x, q.layout, q.params(), q.codes));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Omp>
void BM_fake_quant(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Quant q(n / 1024, 1024);
  std::vector<float> out(n), delta(n);
  for (auto _ : state) {
    if (Omp) {
      k::omp::quantize(q.x, q.layout, q.params(), q.codes);
      k::omp::dequantize(q.codes, q.layout, q.params(), out);
      k::omp::sub(q.x, out, delta);
    } else {
      k::serial::quantize(q.x, q.layout, q.params(), q.codes);
      k::serial::dequantize(q.codes, q.layout, q.params(), out);
      k::serial::sub(q.x, out, delta);
    }
    benchmark::DoNotOptimize(delta.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Omp>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = randn(n * n, 4), b = randn(n * n, 5);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if (Omp)
      k::omp::matmul(a.data(), b.data(), c.data(), n, n, n, false);
    else
      k::serial::matmul(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

}  // namespace

BENCHMARK(BM_sum_sq<false>)->Name("sum_sq/serial")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_sum_sq<true>)->Name("sum_sq/omp")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_quantize<false>)->Name("quantize/serial")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_quantize<true>)->Name("quantize/omp")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_fake_quant<false>)->Name("fake_quant/serial")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_fake_quant<true>)->Name("fake_quant/omp")->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_matmul<false>)->Name("matmul/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_matmul<true>)->Name("matmul/omp")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
