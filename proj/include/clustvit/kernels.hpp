#pragma once

// Dense f64 kernels behind the tensor ops.
//
// The default entry points are OpenMP-parallel over output rows. Each output
// element is accumulated by exactly one thread in a fixed order, so results
// are bit-identical for any thread count. The `reference` namespace keeps
// plain serial triple loops used as the oracle in tests and benchmarks.

#include <cstddef>
#include <span>

namespace clustvit::kernels {

// c[m x n] += a[m x p] * b[p x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);

// c[m x n] += a[m x p] * b[n x p]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);

// c[m x n] += a[p x m]^T * b[p x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);

// out[n x m] = in[m x n]^T
void transpose(std::span<const double> in, std::span<double> out, std::size_t m, std::size_t n);

// Number of threads the parallel kernels may use (CLUSTVIT_THREADS caps it).
int max_threads();
void set_max_threads(int n);

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n);

}  // namespace reference

}  // namespace clustvit::kernels
