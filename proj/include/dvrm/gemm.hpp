#pragma once

#include <cstddef>

namespace dvrm {

/// C[M,N] = A[M,K] * B[K,N] (or += when accumulate), all row-major with leading
/// dimensions lda/ldb/ldc. Single-threaded and deterministic for a given ISA;
/// buffers must not alias. The float path dispatches at runtime to an AVX-512
/// or AVX2 microkernel when available.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda,
          const T* b, std::size_t ldb,
          T* c, std::size_t ldc, bool accumulate);

/// C[M,N] (+)= A[M,K] * B[N,K]^T. B is stored row-major [N,K]; each output is a
/// dot product of an A row with a B row.
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const T* a, std::size_t lda,
             const T* b, std::size_t ldb,
             T* c, std::size_t ldc, bool accumulate);

/// C[M,N] (+)= A[K,M]^T * B[K,N]. A is stored row-major [K,M].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const T* a, std::size_t lda,
             const T* b, std::size_t ldb,
             T* c, std::size_t ldc, bool accumulate);

/// Name of the float kernel selected on this machine: "avx512", "avx2", "scalar".
const char* gemm_isa();

} // namespace dvrm
