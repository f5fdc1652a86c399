#include <benchmark/benchmark.h>

#include <vector>

#include "clustvit/kernels.hpp"
#include "clustvit/model.hpp"
#include "clustvit/rng.hpp"

using namespace clustvit;

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = random_matrix(n * n, 1), b = random_matrix(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        std::fill(c.begin(), c.end(), 0.0);
        if constexpr (Parallel)
            kernels::gemm_nn(a, b, c, n, n, n);
        else
            kernels::reference::gemm_nn(a, b, c, n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

void BM_forward(benchmark::State& state) {
    EncoderConfig cfg;
    cfg.clusters = static_cast<std::size_t>(state.range(0));
    ClustViT model(cfg, 7);
    Image img(cfg.image_height, cfg.image_width);
    img.rgb = random_matrix(img.rgb.size(), 3);
    for (auto& v : img.rgb) v = 0.5 + 0.5 * v;
    NoGradGuard ng;
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(img).seg_logits.data());
}

}  // namespace

BENCHMARK(BM_gemm_nn<false>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<true>)->Name("gemm_nn/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_forward)->Name("forward/tiny-desk")->Arg(0)->Arg(3);

BENCHMARK_MAIN();
