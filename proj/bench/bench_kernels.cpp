// Serial reference kernels against the OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "outfit/kernels.hpp"

using namespace outfit;

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

kernels::ConvShape conv_shape(const benchmark::State& state) {
  kernels::ConvShape s;
  s.in_channels = 16;
  s.out_channels = 32;
  s.height = s.width = static_cast<int>(state.range(0));
  return s;
}

constexpr int kBatch = 16;

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto input = random_values(s.in_size() * kBatch, 1);
  const Matrix w = Matrix::Random(s.out_channels, s.patch());
  const Matrix b = Matrix::Random(s.out_channels, 1);
  std::vector<double> out(s.out_size() * kBatch);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::conv2d_forward(s, kBatch, input, w, b, out);
    } else {
      kernels::conv2d_forward(s, kBatch, input, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto input = random_values(s.in_size() * kBatch, 1);
  const auto d_out = random_values(s.out_size() * kBatch, 2);
  const Matrix w = Matrix::Random(s.out_channels, s.patch());
  Matrix dw = Matrix::Zero(s.out_channels, s.patch());
  Matrix db = Matrix::Zero(s.out_channels, 1);
  std::vector<double> d_in(s.in_size() * kBatch);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::conv2d_backward(s, kBatch, input, w, d_out, dw, db, d_in);
    } else {
      kernels::conv2d_backward(s, kBatch, input, w, d_out, dw, db, d_in);
    }
    benchmark::DoNotOptimize(d_in.data());
  }
}

template <bool Reference>
void BM_AvgPool(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const int channels = 32;
  const auto input = random_values(static_cast<std::size_t>(channels) * hw * hw * kBatch, 3);
  std::vector<double> out(input.size() / 4);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::avg_pool2_forward(channels, hw, hw, kBatch, input, out);
    } else {
      kernels::avg_pool2_forward(channels, hw, hw, kBatch, input, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Reference>
void BM_ColumnDistances(benchmark::State& state) {
  const Batch points = Batch::Random(64, state.range(0));
  const Vector q = Vector::Random(64);
  for (auto _ : state) {
    Vector d = Reference ? kernels::reference::column_distances(points, q) : kernels::column_distances(points, q);
    benchmark::DoNotOptimize(d.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv2d_forward/reference")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvForward<false>)->Name("conv2d_forward/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvBackward<true>)->Name("conv2d_backward/reference")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvBackward<false>)->Name("conv2d_backward/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_AvgPool<true>)->Name("avg_pool2_forward/reference")->Arg(32)->Arg(64);
BENCHMARK(BM_AvgPool<false>)->Name("avg_pool2_forward/openmp")->Arg(32)->Arg(64);
BENCHMARK(BM_ColumnDistances<true>)->Name("column_distances/reference")->Arg(1000)->Arg(20000);
BENCHMARK(BM_ColumnDistances<false>)->Name("column_distances/openmp")->Arg(1000)->Arg(20000);

BENCHMARK_MAIN();
