// Compares the OpenMP compute kernels against their serial reference
// implementations: blur, gemm, and dense convolution.

#include <benchmark/benchmark.h>

#include "jsr/degradation.hpp"
#include "jsr/kernels.hpp"
#include "jsr/netops.hpp"

using namespace jsr;

namespace {

Tensor random_tensor(std::vector<int64_t> dims, uint64_t seed) {
    SeededRng rng(seed);
    Tensor t(std::move(dims));
    for (auto& v : t.vec()) v = rng.uniform();
    return t;
}

void BM_blur_omp(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor im = random_tensor({3, n, n}, 1);
    auto k = deg::make_gaussian_kernel(1.5, 9);
    Tensor out;
    for (auto _ : state) {
        correlate2d_reflect(im, k.weights, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * im.size());
}

void BM_blur_serial(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor im = random_tensor({3, n, n}, 1);
    auto k = deg::make_gaussian_kernel(1.5, 9);
    Tensor out;
    for (auto _ : state) {
        ref::correlate2d_reflect_naive(im, k.weights, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * im.size());
}

void BM_gemm_omp(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor a = random_tensor({n, n}, 2), b = random_tensor({n, n}, 3), c({n, n});
    for (auto _ : state) {
        gemm(n, n, n, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_gemm_serial(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor a = random_tensor({n, n}, 2), b = random_tensor({n, n}, 3), c({n, n});
    for (auto _ : state) {
        ref::gemm_naive(n, n, n, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_conv_im2col(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor x = random_tensor({1, 16, n, n}, 4);
    Tensor w = random_tensor({16, 16, 3, 3}, 5);
    Tensor bias = random_tensor({16}, 6);
    for (auto _ : state) {
        ops::Var out = ops::conv2d(ops::leaf(x, false), ops::leaf(w, false),
                                   ops::leaf(bias, false), 1, 1);
        benchmark::DoNotOptimize(out->value.data());
    }
    state.SetItemsProcessed(state.iterations() * x.size() * 16 * 9);
}

void BM_conv_naive(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor x = random_tensor({1, 16, n, n}, 4);
    Tensor w = random_tensor({16, 16, 3, 3}, 5);
    Tensor bias = random_tensor({16}, 6);
    Tensor out;
    for (auto _ : state) {
        ref::conv2d_naive(x, w, bias, 1, 1, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * x.size() * 16 * 9);
}

}  // namespace

BENCHMARK(BM_blur_omp)->Arg(128)->Arg(512);
BENCHMARK(BM_blur_serial)->Arg(128)->Arg(512);
BENCHMARK(BM_gemm_omp)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_conv_im2col)->Arg(32)->Arg(64);
BENCHMARK(BM_conv_naive)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
