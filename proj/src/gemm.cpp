#include "dvrm/gemm.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstring>

namespace dvrm {
namespace {

using idx = std::ptrdiff_t;

// ---- scalar kernels (also the double-precision path) ----------------------

template <typename T>
void edge_block(idx mr, idx nr, idx kb,
                const T* a, idx lda, const T* b, idx ldb, T* c, idx ldc) {
    for (idx i = 0; i < mr; ++i)
        for (idx k = 0; k < kb; ++k) {
            T av = a[i * lda + k];
            const T* brow = b + k * ldb;
            T* crow = c + i * ldc;
            for (idx j = 0; j < nr; ++j) crow[j] += av * brow[j];
        }
}

template <typename T>
void gemm_scalar(idx m, idx n, idx k,
                 const T* a, idx lda, const T* b, idx ldb, T* c, idx ldc) {
    const idx KC = 256, MC = 64;
    for (idx k0 = 0; k0 < k; k0 += KC) {
        idx kb = std::min(KC, k - k0);
        for (idx i0 = 0; i0 < m; i0 += MC) {
            idx mb = std::min(MC, m - i0);
            edge_block(mb, n, kb, a + i0 * lda + k0, lda, b + k0 * ldb, ldb,
                       c + i0 * ldc, ldc);
        }
    }
}

// ---- AVX-512 float path ----------------------------------------------------
//
// NN and TN share one kernel family templated on the row count MR (1..6) and
// on whether A is read transposed.  Column tails (< 64) are handled with full
// 16-lane vectors plus one masked vector, so no shape ever falls back to the
// scalar edge loop: conv channel counts and batch sizes are rarely multiples
// of 6, and a scalar leftover row over a long k axis costs more than all the
// vector work around it.

#pragma GCC push_options
#pragma GCC target("avx512f")

// C[MR,64] += A·B for one k block, full 64-wide column strip.  The row loops
// must unroll so the MR*4 accumulators stay in registers; GCC only does that
// when the body is straight-line intrinsics, so keep helper calls out of it.
template <int MR, bool ATRANS>
void kern_mx64_avx512(idx kb, const float* a, idx lda, const float* b, idx ldb,
                      float* c, idx ldc) {
    __m512 acc[MR][4];
#pragma GCC unroll 6
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < 4; ++j) acc[i][j] = _mm512_loadu_ps(c + i * ldc + 16 * j);
    for (idx k = 0; k < kb; ++k) {
        __m512 b0 = _mm512_loadu_ps(b + k * ldb);
        __m512 b1 = _mm512_loadu_ps(b + k * ldb + 16);
        __m512 b2 = _mm512_loadu_ps(b + k * ldb + 32);
        __m512 b3 = _mm512_loadu_ps(b + k * ldb + 48);
#pragma GCC unroll 6
        for (int i = 0; i < MR; ++i) {
            __m512 av = _mm512_set1_ps(ATRANS ? a[k * lda + i] : a[i * lda + k]);
            acc[i][0] = _mm512_fmadd_ps(av, b0, acc[i][0]);
            acc[i][1] = _mm512_fmadd_ps(av, b1, acc[i][1]);
            acc[i][2] = _mm512_fmadd_ps(av, b2, acc[i][2]);
            acc[i][3] = _mm512_fmadd_ps(av, b3, acc[i][3]);
        }
    }
#pragma GCC unroll 6
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < 4; ++j) _mm512_storeu_ps(c + i * ldc + 16 * j, acc[i][j]);
}

// C[MR,nr] += A·B for nr < 64: nv full vectors, then one vector under mtail.
template <int MR, bool ATRANS>
void kern_mxtail_avx512(idx kb, idx nv, __mmask16 mtail,
                        const float* a, idx lda, const float* b, idx ldb,
                        float* c, idx ldc) {
    __m512 acc[MR][4];
    for (int i = 0; i < MR; ++i) {
        for (idx j = 0; j < nv; ++j) acc[i][j] = _mm512_loadu_ps(c + i * ldc + 16 * j);
        if (mtail) acc[i][nv] = _mm512_maskz_loadu_ps(mtail, c + i * ldc + 16 * nv);
    }
    for (idx k = 0; k < kb; ++k) {
        __m512 bv[4];
        for (idx j = 0; j < nv; ++j) bv[j] = _mm512_loadu_ps(b + k * ldb + 16 * j);
        if (mtail) bv[nv] = _mm512_maskz_loadu_ps(mtail, b + k * ldb + 16 * nv);
        idx nt = nv + (mtail ? 1 : 0);
        for (int i = 0; i < MR; ++i) {
            __m512 av = _mm512_set1_ps(ATRANS ? a[k * lda + i] : a[i * lda + k]);
            for (idx j = 0; j < nt; ++j) acc[i][j] = _mm512_fmadd_ps(av, bv[j], acc[i][j]);
        }
    }
    for (int i = 0; i < MR; ++i) {
        for (idx j = 0; j < nv; ++j) _mm512_storeu_ps(c + i * ldc + 16 * j, acc[i][j]);
        if (mtail) _mm512_mask_storeu_ps(c + i * ldc + 16 * nv, mtail, acc[i][nv]);
    }
}

// One MR-row strip across all n columns.
template <int MR, bool ATRANS>
void rows_avx512(idx n, idx kb, const float* a, idx lda, const float* b, idx ldb,
                 float* c, idx ldc) {
    idx j0 = 0;
    for (; j0 + 64 <= n; j0 += 64)
        kern_mx64_avx512<MR, ATRANS>(kb, a, lda, b + j0, ldb, c + j0, ldc);
    if (j0 < n) {
        idx nr = n - j0;
        __mmask16 mtail = static_cast<__mmask16>((1u << (nr % 16)) - 1u);
        kern_mxtail_avx512<MR, ATRANS>(kb, nr / 16, mtail, a, lda, b + j0, ldb,
                                       c + j0, ldc);
    }
}

template <bool ATRANS>
void gemm_blocked_avx512(idx m, idx n, idx k,
                         const float* a, idx lda, const float* b, idx ldb,
                         float* c, idx ldc) {
    const idx KC = 256;
    for (idx k0 = 0; k0 < k; k0 += KC) {
        idx kb = std::min(KC, k - k0);
        const float* ab = ATRANS ? a + k0 * lda : a + k0;
        const float* bb = b + k0 * ldb;
        idx i0 = 0;
        for (; i0 + 6 <= m; i0 += 6)
            rows_avx512<6, ATRANS>(n, kb, ab + (ATRANS ? i0 : i0 * lda), lda, bb,
                                   ldb, c + i0 * ldc, ldc);
        const float* ae = ab + (ATRANS ? i0 : i0 * lda);
        float* ce = c + i0 * ldc;
        switch (m - i0) {
            case 1: rows_avx512<1, ATRANS>(n, kb, ae, lda, bb, ldb, ce, ldc); break;
            case 2: rows_avx512<2, ATRANS>(n, kb, ae, lda, bb, ldb, ce, ldc); break;
            case 3: rows_avx512<3, ATRANS>(n, kb, ae, lda, bb, ldb, ce, ldc); break;
            case 4: rows_avx512<4, ATRANS>(n, kb, ae, lda, bb, ldb, ce, ldc); break;
            case 5: rows_avx512<5, ATRANS>(n, kb, ae, lda, bb, ldb, ce, ldc); break;
            default: break;
        }
    }
}

#pragma GCC pop_options

__attribute__((target("avx512f")))
void gemm_avx512(idx m, idx n, idx k,
                 const float* a, idx lda, const float* b, idx ldb,
                 float* c, idx ldc) {
    gemm_blocked_avx512<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

// ---- AVX2 float path --------------------------------------------------------

__attribute__((target("avx2,fma")))
void kern_6x16_avx2(idx kb, const float* a, idx lda, const float* b, idx ldb,
                    float* c, idx ldc) {
    __m256 acc[6][2];
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) acc[i][j] = _mm256_loadu_ps(c + i * ldc + 8 * j);
    for (idx k = 0; k < kb; ++k) {
        __m256 b0 = _mm256_loadu_ps(b + k * ldb);
        __m256 b1 = _mm256_loadu_ps(b + k * ldb + 8);
        for (int i = 0; i < 6; ++i) {
            __m256 av = _mm256_set1_ps(a[i * lda + k]);
            acc[i][0] = _mm256_fmadd_ps(av, b0, acc[i][0]);
            acc[i][1] = _mm256_fmadd_ps(av, b1, acc[i][1]);
        }
    }
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) _mm256_storeu_ps(c + i * ldc + 8 * j, acc[i][j]);
}

__attribute__((target("avx2,fma")))
void gemm_avx2(idx m, idx n, idx k,
               const float* a, idx lda, const float* b, idx ldb,
               float* c, idx ldc) {
    const idx KC = 256;
    for (idx k0 = 0; k0 < k; k0 += KC) {
        idx kb = std::min(KC, k - k0);
        idx i0 = 0;
        for (; i0 + 6 <= m; i0 += 6) {
            idx j0 = 0;
            for (; j0 + 16 <= n; j0 += 16)
                kern_6x16_avx2(kb, a + i0 * lda + k0, lda, b + k0 * ldb + j0, ldb,
                               c + i0 * ldc + j0, ldc);
            if (j0 < n)
                edge_block<float>(6, n - j0, kb, a + i0 * lda + k0, lda,
                                  b + k0 * ldb + j0, ldb, c + i0 * ldc + j0, ldc);
        }
        if (i0 < m)
            edge_block<float>(m - i0, n, kb, a + i0 * lda + k0, lda, b + k0 * ldb, ldb,
                              c + i0 * ldc, ldc);
    }
}

// ---- NT / TN scalar paths ---------------------------------------------------

template <typename T>
void gemm_nt_scalar(idx m, idx n, idx k,
                    const T* a, idx lda, const T* b, idx ldb, T* c, idx ldc) {
    for (idx i = 0; i < m; ++i)
        for (idx j = 0; j < n; ++j) {
            T s = 0;
            const T* ar = a + i * lda;
            const T* br = b + j * ldb;
            for (idx t = 0; t < k; ++t) s += ar[t] * br[t];
            c[i * ldc + j] += s;
        }
}

template <typename T>
void gemm_tn_scalar(idx m, idx n, idx k,
                    const T* a, idx lda, const T* b, idx ldb, T* c, idx ldc) {
    // rank-1 updates: C += a_row^T * b_row, per k
    for (idx t = 0; t < k; ++t) {
        const T* ar = a + t * lda;
        const T* br = b + t * ldb;
        for (idx i = 0; i < m; ++i) {
            T av = ar[i];
            T* crow = c + i * ldc;
            for (idx j = 0; j < n; ++j) crow[j] += av * br[j];
        }
    }
}

// ---- NT AVX-512: 4x4 output tile, 16-wide dot products ----------------------

__attribute__((target("avx512f")))
void kern_nt_4x4_avx512(idx kb, const float* a, idx lda, const float* b, idx ldb,
                        float* c, idx ldc) {
    __m512 acc[4][4];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) acc[i][j] = _mm512_setzero_ps();
    idx t = 0;
    for (; t + 16 <= kb; t += 16) {
        __m512 av[4], bv[4];
        for (int i = 0; i < 4; ++i) av[i] = _mm512_loadu_ps(a + i * lda + t);
        for (int j = 0; j < 4; ++j) bv[j] = _mm512_loadu_ps(b + j * ldb + t);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                acc[i][j] = _mm512_fmadd_ps(av[i], bv[j], acc[i][j]);
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            float s = _mm512_reduce_add_ps(acc[i][j]);
            for (idx r = t; r < kb; ++r) s += a[i * lda + r] * b[j * ldb + r];
            c[i * ldc + j] += s;
        }
}

__attribute__((target("avx512f")))
void gemm_nt_avx512(idx m, idx n, idx k,
                    const float* a, idx lda, const float* b, idx ldb,
                    float* c, idx ldc) {
    idx i0 = 0;
    for (; i0 + 4 <= m; i0 += 4) {
        idx j0 = 0;
        for (; j0 + 4 <= n; j0 += 4)
            kern_nt_4x4_avx512(k, a + i0 * lda, lda, b + j0 * ldb, ldb,
                               c + i0 * ldc + j0, ldc);
        if (j0 < n)
            gemm_nt_scalar<float>(4, n - j0, k, a + i0 * lda, lda, b + j0 * ldb, ldb,
                                  c + i0 * ldc + j0, ldc);
    }
    if (i0 < m) gemm_nt_scalar<float>(m - i0, n, k, a + i0 * lda, lda, b, ldb,
                                      c + i0 * ldc, ldc);
}

// ---- TN AVX-512: the shared kernels with A read transposed ------------------

__attribute__((target("avx512f")))
void gemm_tn_avx512(idx m, idx n, idx k,
                    const float* a, idx lda, const float* b, idx ldb,
                    float* c, idx ldc) {
    gemm_blocked_avx512<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

enum class Isa { avx512, avx2, scalar };

Isa detect_isa() {
    if (__builtin_cpu_supports("avx512f")) return Isa::avx512;
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
    return Isa::scalar;
}

Isa isa() {
    static Isa v = detect_isa();
    return v;
}

template <typename T>
void zero_region(T* c, idx m, idx n, idx ldc) {
    for (idx i = 0; i < m; ++i) std::memset(c + i * ldc, 0, sizeof(T) * n);
}

} // namespace

template <>
void gemm<float>(std::size_t m, std::size_t n, std::size_t k,
                 const float* a, std::size_t lda,
                 const float* b, std::size_t ldb,
                 float* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    switch (isa()) {
        case Isa::avx512:
            gemm_avx512((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
            break;
        case Isa::avx2:
            gemm_avx2((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
            break;
        case Isa::scalar:
            gemm_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
            break;
    }
}

template <>
void gemm<double>(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, std::size_t lda,
                  const double* b, std::size_t ldb,
                  double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    gemm_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
}

template <>
void gemm_nt<float>(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    if (isa() == Isa::avx512)
        gemm_nt_avx512((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
    else
        gemm_nt_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
}

template <>
void gemm_nt<double>(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    gemm_nt_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
}

template <>
void gemm_tn<float>(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    if (isa() == Isa::avx512)
        gemm_tn_avx512((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
    else
        gemm_tn_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
}

template <>
void gemm_tn<double>(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) zero_region(c, (idx)m, (idx)n, (idx)ldc);
    if (m == 0 || n == 0 || k == 0) return;
    gemm_tn_scalar((idx)m, (idx)n, (idx)k, a, (idx)lda, b, (idx)ldb, c, (idx)ldc);
}

const char* gemm_isa() {
    switch (isa()) {
        case Isa::avx512: return "avx512";
        case Isa::avx2: return "avx2";
        default: return "scalar";
    }
}

} // namespace dvrm
