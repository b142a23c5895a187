#include "bgsnetd/kernels/gemm.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

namespace bgsnetd::kernels {

namespace {

template <typename T>
struct Blocking;

// Register tile MR x NR; NR spans two 512-bit vectors.
template <>
struct Blocking<float> {
    static constexpr int MR = 8, NR = 32, KC = 256, NC = 2048;
};
template <>
struct Blocking<double> {
    static constexpr int MR = 8, NR = 16, KC = 256, NC = 1024;
};

template <typename T>
struct Strided {
    const T* p;
    std::ptrdiff_t rs;  // stride between rows of op(X)
    std::ptrdiff_t cs;  // stride between columns of op(X)
    T operator()(std::ptrdiff_t r, std::ptrdiff_t c) const { return p[r * rs + c * cs]; }
};

template <typename T>
Strided<T> view(Trans t, const T* p, int ld)
{
    return t == Trans::No ? Strided<T>{p, ld, 1} : Strided<T>{p, 1, ld};
}

// Copies rows [k0, k0 + kc) and columns [j0, j0 + w) of X into a kc x W panel, zero-filling
// columns past w.
template <typename T, int W>
void pack_panel(const Strided<T>& x, int k0, int j0, int kc, int w, T* __restrict dst)
{
    if (x.cs == 1) {
        for (int p = 0; p < kc; ++p) {
            const T* src = x.p + (k0 + p) * x.rs + j0;
            T* d = dst + p * W;
            int j = 0;
            for (; j < w; ++j) {
                d[j] = src[j];
            }
            for (; j < W; ++j) {
                d[j] = T(0);
            }
        }
        return;
    }
    for (int j = 0; j < W; ++j) {
        if (j < w) {
            const T* src = x.p + (j0 + j) * x.cs + k0 * x.rs;
            for (int p = 0; p < kc; ++p) {
                dst[p * W + j] = src[p * x.rs];
            }
        } else {
            for (int p = 0; p < kc; ++p) {
                dst[p * W + j] = T(0);
            }
        }
    }
}

template <typename T, int MR, int NR>
inline void micro_kernel(int kc, const T* __restrict a, const T* __restrict b, T* __restrict c, int ldc, int mr, int nr)
{
    T acc[MR][NR] = {};
    for (int p = 0; p < kc; ++p) {
        const T* bp = b + p * NR;
        const T* ap = a + p * MR;
#pragma GCC unroll 8
        for (int i = 0; i < MR; ++i) {
            const T av = ap[i];
#pragma omp simd
            for (int j = 0; j < NR; ++j) {
                acc[i][j] += av * bp[j];
            }
        }
    }
    if (mr == MR && nr == NR) {
        for (int i = 0; i < MR; ++i) {
            T* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
#pragma omp simd
            for (int j = 0; j < NR; ++j) {
                ci[j] += acc[i][j];
            }
        }
    } else {
        for (int i = 0; i < mr; ++i) {
            T* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int j = 0; j < nr; ++j) {
                ci[j] += acc[i][j];
            }
        }
    }
}

}  // namespace

template <typename T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc)
{
    using B = Blocking<T>;
    constexpr int MR = B::MR, NR = B::NR, KC = B::KC, NC = B::NC;
    if (m <= 0 || n <= 0) {
        return;
    }

#pragma omp parallel for schedule(static) if (static_cast<long long>(m) * n > 16384)
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == T(0)) {
            std::fill(ci, ci + n, T(0));
        } else if (beta != T(1)) {
            for (int j = 0; j < n; ++j) {
                ci[j] *= beta;
            }
        }
    }
    if (k <= 0) {
        return;
    }

    // Both operands are packed as panels of op(X) indexed (k, j): B directly, A through its transpose.
    const Strided<T> At = view(ta == Trans::No ? Trans::Yes : Trans::No, a, lda);
    const Strided<T> Bm = view(tb, b, ldb);
    const int m_slivers = (m + MR - 1) / MR;
    // Reused across calls from the same thread; concurrent callers each get their own buffers.
    thread_local std::vector<T> packed_a;
    thread_local std::vector<T> packed_b;
    const int n_slivers_max = (std::min(NC, n) + NR - 1) / NR;
    packed_a.resize(std::max(packed_a.size(), static_cast<std::size_t>(m_slivers) * MR * KC));
    packed_b.resize(std::max(packed_b.size(), static_cast<std::size_t>(KC) * n_slivers_max * NR));
    // Worker threads must use the calling thread's buffers, not their own thread_local copies.
    T* const pa = packed_a.data();
    T* const pb = packed_b.data();

    for (int jc = 0; jc < n; jc += NC) {
        const int nc = std::min(NC, n - jc);
        const int n_slivers = (nc + NR - 1) / NR;
        for (int pc = 0; pc < k; pc += KC) {
            const int kc = std::min(KC, k - pc);
            const bool big = static_cast<long long>(m) * nc * kc > 32768;

#pragma omp parallel if (big)
            {
#pragma omp for schedule(static) nowait
                for (int s = 0; s < n_slivers; ++s) {
                    const int j0 = s * NR;
                    const int nr = std::min(NR, nc - j0);
                    T* dst = pb + static_cast<std::ptrdiff_t>(s) * NR * kc;
                    pack_panel<T, NR>(Bm, pc, jc + j0, kc, nr, dst);
                }
#pragma omp for schedule(static)
                for (int s = 0; s < m_slivers; ++s) {
                    const int i0 = s * MR;
                    const int mr = std::min(MR, m - i0);
                    T* dst = pa + static_cast<std::ptrdiff_t>(s) * MR * kc;
                    pack_panel<T, MR>(At, pc, i0, kc, mr, dst);
                }
#pragma omp for collapse(2) schedule(static)
                for (int sj = 0; sj < n_slivers; ++sj) {
                    for (int si = 0; si < m_slivers; ++si) {
                        const int j0 = sj * NR;
                        const int i0 = si * MR;
                        micro_kernel<T, MR, NR>(kc, pa + static_cast<std::ptrdiff_t>(si) * MR * kc,
                                                pb + static_cast<std::ptrdiff_t>(sj) * NR * kc,
                                                c + static_cast<std::ptrdiff_t>(i0) * ldc + jc + j0, ldc,
                                                std::min(MR, m - i0), std::min(NR, nc - j0));
                    }
                }
            }
        }
    }
}

template void gemm<float>(Trans, Trans, int, int, int, const float*, int, const float*, int, float, float*, int);
template void gemm<double>(Trans, Trans, int, int, int, const double*, int, const double*, int, double, double*, int);

}  // namespace bgsnetd::kernels
