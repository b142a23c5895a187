#pragma once

namespace bgsnetd::kernels {

enum class Trans { No, Yes };

/// C = beta * C + op(A) * op(B), all row-major. op(A) is m x k, op(B) is k x n.
/// `lda`/`ldb`/`ldc` are the row strides of the matrices as stored (before op).
///
/// Work is split over disjoint tiles of C and every element accumulates over k in the same
/// order, so results are bitwise independent of thread count and of n (batch size).
template <typename T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc);

}  // namespace bgsnetd::kernels
