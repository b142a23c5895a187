#pragma once

// Serial direct-loop kernels. They share no code with the GEMM path and exist so tests and the
// benchmark can check the parallel kernels against an independent formulation.

#include <cstddef>

#include "bgsnetd/kernels/gemm.hpp"

namespace bgsnetd::kernels::reference {

template <typename T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc)
{
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            for (int p = 0; p < k; ++p) {
                const T av = ta == Trans::No ? a[i * lda + p] : a[p * lda + i];
                const T bv = tb == Trans::No ? b[p * ldb + j] : b[j * ldb + p];
                acc += av * bv;
            }
            c[i * ldc + j] = (beta == T(0) ? T(0) : beta * c[i * ldc + j]) + acc;
        }
    }
}

/// y[n,o,y,x] = b[o] + sum_{c,ky,kx} w[o,c,ky,kx] * x[n,c,y+ky-1,x+kx-1] (zero outside).
template <typename T>
void conv3x3_forward(const T* x, int batch, int in_ch, int h, int w, const T* weight, const T* bias, int out_ch, T* y)
{
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out_ch; ++o) {
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    T acc = bias[o];
                    for (int i = 0; i < in_ch; ++i) {
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sr = r + ky - 1;
                                const int sc = c + kx - 1;
                                if (sr < 0 || sr >= h || sc < 0 || sc >= w) {
                                    continue;
                                }
                                acc += weight[((o * in_ch + i) * 3 + ky) * 3 + kx] *
                                       x[((static_cast<std::ptrdiff_t>(n) * in_ch + i) * h + sr) * w + sc];
                            }
                        }
                    }
                    y[((static_cast<std::ptrdiff_t>(n) * out_ch + o) * h + r) * w + c] = acc;
                }
            }
        }
    }
}

template <typename T>
void conv3x3_backward(const T* x, const T* grad_y, int batch, int in_ch, int h, int w, const T* weight, int out_ch,
                      T* grad_x, T* grad_w, T* grad_b)
{
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(batch) * in_ch * h * w; ++k) {
        grad_x[k] = 0;
    }
    for (int k = 0; k < out_ch * in_ch * 9; ++k) {
        grad_w[k] = 0;
    }
    for (int o = 0; o < out_ch; ++o) {
        grad_b[o] = 0;
    }
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out_ch; ++o) {
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    const T g = grad_y[((static_cast<std::ptrdiff_t>(n) * out_ch + o) * h + r) * w + c];
                    grad_b[o] += g;
                    for (int i = 0; i < in_ch; ++i) {
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sr = r + ky - 1;
                                const int sc = c + kx - 1;
                                if (sr < 0 || sr >= h || sc < 0 || sc >= w) {
                                    continue;
                                }
                                const std::ptrdiff_t xi = ((static_cast<std::ptrdiff_t>(n) * in_ch + i) * h + sr) * w + sc;
                                const int wi = ((o * in_ch + i) * 3 + ky) * 3 + kx;
                                grad_w[wi] += g * x[xi];
                                grad_x[xi] += g * weight[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// y[n,o] = b[o] + sum_i w[o,i] * x[n,i]
template <typename T>
void dense_forward(const T* x, int batch, int in, const T* weight, const T* bias, int out, T* y)
{
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out; ++o) {
            T acc = bias[o];
            for (int i = 0; i < in; ++i) {
                acc += weight[o * in + i] * x[n * in + i];
            }
            y[n * out + o] = acc;
        }
    }
}

template <typename T>
void dense_backward(const T* x, const T* grad_y, int batch, int in, const T* weight, int out, T* grad_x, T* grad_w,
                    T* grad_b)
{
    for (int o = 0; o < out; ++o) {
        grad_b[o] = 0;
        for (int i = 0; i < in; ++i) {
            grad_w[o * in + i] = 0;
        }
    }
    for (int n = 0; n < batch; ++n) {
        for (int i = 0; i < in; ++i) {
            T acc = 0;
            for (int o = 0; o < out; ++o) {
                acc += grad_y[n * out + o] * weight[o * in + i];
            }
            grad_x[n * in + i] = acc;
        }
        for (int o = 0; o < out; ++o) {
            const T g = grad_y[n * out + o];
            grad_b[o] += g;
            for (int i = 0; i < in; ++i) {
                grad_w[o * in + i] += g * x[n * in + i];
            }
        }
    }
}

}  // namespace bgsnetd::kernels::reference
