#include "clustvit/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

namespace clustvit::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelMacs = 1u << 16;

int initial_threads() {
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("CLUSTVIT_THREADS")) {
        try {
            n = std::clamp(std::stoi(env), 1, n);
        } catch (...) {
        }
    }
    return n;
}

int& thread_cap() {
    static int cap = initial_threads();
    return cap;
}

int threads_for(std::size_t macs) {
    return macs < kParallelMacs ? 1 : thread_cap();
}

}  // namespace

int max_threads() { return thread_cap(); }
void set_max_threads(int n) { thread_cap() = std::max(1, n); }

namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 16;

using v8 = double __attribute__((vector_size(64)));

// c[i0.., j0..] += sum_k A(i, k) * b[k, j] for one 4 x 16 micro-tile, where
// A(i, k) = a[i * ai + k * ak]. Accumulates in registers, so each element's
// sum runs over k in order regardless of how rows are split across threads.
inline void tile(const double* a, std::size_t ai, std::size_t ak, const double* b, double* c, std::size_t i0,
                 std::size_t j0, std::size_t p, std::size_t n) {
    v8 acc[kMr][2] = {};
    const double* a0 = a + i0 * ai;
    for (std::size_t k = 0; k < p; ++k) {
        v8 b0, b1;
        std::memcpy(&b0, b + k * n + j0, sizeof(v8));
        std::memcpy(&b1, b + k * n + j0 + 8, sizeof(v8));
        const double* ak_ptr = a0 + k * ak;
        for (std::size_t r = 0; r < kMr; ++r) {
            const double av = ak_ptr[r * ai];
            acc[r][0] += av * b0;
            acc[r][1] += av * b1;
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        double* crow = c + (i0 + r) * n + j0;
        for (std::size_t j = 0; j < 8; ++j) {
            crow[j] += acc[r][0][j];
            crow[j + 8] += acc[r][1][j];
        }
    }
}

void edge_tile(const double* a, std::size_t ai, std::size_t ak, const double* b, double* c, std::size_t i0,
               std::size_t mr, std::size_t j0, std::size_t nr, std::size_t p, std::size_t n) {
    double acc[kMr][kNr] = {};
    for (std::size_t k = 0; k < p; ++k) {
        const double* brow = b + k * n + j0;
        for (std::size_t r = 0; r < mr; ++r) {
            const double av = a[(i0 + r) * ai + k * ak];
            for (std::size_t j = 0; j < nr; ++j) acc[r][j] += av * brow[j];
        }
    }
    for (std::size_t r = 0; r < mr; ++r)
        for (std::size_t j = 0; j < nr; ++j) c[(i0 + r) * n + j0 + j] += acc[r][j];
}

void gemm_strided(const double* a, std::size_t ai, std::size_t ak, const double* b, double* c, std::size_t m,
                  std::size_t p, std::size_t n) {
    const auto blocks = static_cast<std::ptrdiff_t>((m + kMr - 1) / kMr);
#pragma omp parallel for num_threads(threads_for(m * p * n)) schedule(static)
    for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kMr;
        const std::size_t mr = std::min(kMr, m - i0);
        std::size_t j0 = 0;
        if (mr == kMr)
            for (; j0 + kNr <= n; j0 += kNr) tile(a, ai, ak, b, c, i0, j0, p, n);
        for (; j0 < n; j0 += kNr) edge_tile(a, ai, ak, b, c, i0, mr, j0, std::min(kNr, n - j0), p, n);
    }
}

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    gemm_strided(a.data(), p, 1, b.data(), c.data(), m, p, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    // Transposing b first lets the row-update micro-kernel vectorize.
    std::vector<double> bt(p * n);
    transpose(b, bt, n, p);
    gemm_nn(a, bt, c, m, p, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    gemm_strided(a.data(), 1, m, b.data(), c.data(), m, p, n);
}

void transpose(std::span<const double> in, std::span<double> out, std::size_t m, std::size_t n) {
    constexpr std::size_t kTile = 16;
    for (std::size_t i0 = 0; i0 < m; i0 += kTile)
        for (std::size_t j0 = 0; j0 < n; j0 += kTile)
            for (std::size_t i = i0; i < std::min(m, i0 + kTile); ++i)
                for (std::size_t j = j0; j < std::min(n, j0 + kTile); ++j) out[j * m + i] = in[i * n + j];
}

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += a[i * p + k] * b[k * n + j];
            c[i * n + j] += s;
        }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += a[i * p + k] * b[j * p + k];
            c[i * n + j] += s;
        }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += a[k * m + i] * b[k * n + j];
            c[i * n + j] += s;
        }
}

}  // namespace reference

}  // namespace clustvit::kernels
