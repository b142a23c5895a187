// Serial reference kernels against the blocked OpenMP kernels on the shapes the network uses.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "bgsnetd/kernels/gemm.hpp"
#include "bgsnetd/kernels/parallel.hpp"
#include "bgsnetd/kernels/reference.hpp"
#include "bgsnetd/nn/layers.hpp"
#include "bgsnetd/nn/model.hpp"

using namespace bgsnetd;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) x = u(rng);
    return v;
}

void set_flops(benchmark::State& state, double flops_per_iter)
{
    state.counters["GFLOP/s"] =
        benchmark::Counter(flops_per_iter, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

// conv2 of the network as a GEMM: 48 x (batch*400) x 216.
template <bool Reference>
void BM_Gemm(benchmark::State& state)
{
    const int m = static_cast<int>(state.range(0));
    const int n = static_cast<int>(state.range(1));
    const int k = static_cast<int>(state.range(2));
    const auto a = random_vec(static_cast<std::size_t>(m) * k, 1);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, 2);
    std::vector<float> c(static_cast<std::size_t>(m) * n);
    for (auto _ : state) {
        if constexpr (Reference) {
            kernels::reference::gemm<float>(kernels::Trans::No, kernels::Trans::No, m, n, k, a.data(), k, b.data(), n,
                                            0.f, c.data(), n);
        } else {
            kernels::gemm<float>(kernels::Trans::No, kernels::Trans::No, m, n, k, a.data(), k, b.data(), n, 0.f,
                                 c.data(), n);
        }
        benchmark::DoNotOptimize(c.data());
    }
    set_flops(state, 2.0 * m * n * k);
}

template <bool Reference>
void BM_Conv(benchmark::State& state)
{
    const int batch = static_cast<int>(state.range(0));
    const int in = static_cast<int>(state.range(1));
    const int out = static_cast<int>(state.range(2));
    const int side = static_cast<int>(state.range(3));
    nn::ConvLayer<float> layer(in, out);
    layer.weight.data = random_vec(layer.weight.size(), 3);
    nn::Tensor<float> x({static_cast<std::size_t>(batch), static_cast<std::size_t>(in),
                         static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
    x.data = random_vec(x.size(), 4);
    std::vector<float> y(static_cast<std::size_t>(batch) * out * side * side);
    for (auto _ : state) {
        if constexpr (Reference) {
            kernels::reference::conv3x3_forward(x.ptr(), batch, in, side, side, layer.weight.ptr(), layer.bias.ptr(),
                                                out, y.data());
            benchmark::DoNotOptimize(y.data());
        } else {
            benchmark::DoNotOptimize(nn::conv2d_forward(x, layer));
        }
    }
    set_flops(state, 2.0 * batch * out * side * side * in * 9);
}

template <bool Reference>
void BM_Dense(benchmark::State& state)
{
    const int batch = static_cast<int>(state.range(0));
    const int in = static_cast<int>(state.range(1));
    const int out = static_cast<int>(state.range(2));
    nn::DenseLayer<float> layer(in, out);
    layer.weight.data = random_vec(layer.weight.size(), 5);
    nn::Tensor<float> x({static_cast<std::size_t>(batch), static_cast<std::size_t>(in)});
    x.data = random_vec(x.size(), 6);
    std::vector<float> y(static_cast<std::size_t>(batch) * out);
    for (auto _ : state) {
        if constexpr (Reference) {
            kernels::reference::dense_forward(x.ptr(), batch, in, layer.weight.ptr(), layer.bias.ptr(), out, y.data());
            benchmark::DoNotOptimize(y.data());
        } else {
            benchmark::DoNotOptimize(nn::dense_forward(x, layer));
        }
    }
    set_flops(state, 2.0 * batch * in * out);
}

void BM_ModelPredict(benchmark::State& state)
{
    const auto batch = static_cast<std::size_t>(state.range(0));
    const nn::Model<float> m = nn::init_model<float>(nn::ModelSpec::standard(), 1);
    nn::Tensor<float> x({batch, 2, 40, 40});
    x.data = random_vec(x.size(), 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::model_predict(m, x));
    }
    state.counters["patches/s"] =
        benchmark::Counter(static_cast<double>(batch), benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Args({48, 6000, 216})->Args({96, 1500, 432})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<false>)->Name("gemm/blocked")->Args({48, 6000, 216})->Args({96, 1500, 432})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<true>)->Name("conv/reference")->Args({16, 2, 24, 40})->Args({16, 24, 48, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<false>)->Name("conv/blocked")->Args({16, 2, 24, 40})->Args({16, 24, 48, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dense<true>)->Name("dense/reference")->Args({150, 2400, 1200})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dense<false>)->Name("dense/blocked")->Args({150, 2400, 1200})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelPredict)->Name("model/predict")->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
