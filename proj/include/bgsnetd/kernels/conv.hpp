#pragma once

#include <cstddef>

namespace bgsnetd::kernels {

// 3x3, stride 1, zero padding 1 convolution lowered to GEMM.
// `cols` has (channels * 9) rows and (batch * height * width) columns; column index is
// n * H * W + y * W + x, row index is c * 9 + ky * 3 + kx.

template <typename T>
void im2col3x3(const T* x, int batch, int channels, int height, int width, T* cols)
{
    const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(height) * width;
    const std::ptrdiff_t ncols = batch * hw;
    const int rows = channels * 9;
#pragma omp parallel for schedule(static) if (ncols * rows > 65536)
    for (int r = 0; r < rows; ++r) {
        const int c = r / 9;
        const int dy = (r % 9) / 3 - 1;
        const int dx = r % 3 - 1;
        T* out = cols + r * ncols;
        for (int n = 0; n < batch; ++n) {
            const T* plane = x + (static_cast<std::ptrdiff_t>(n) * channels + c) * hw;
            for (int y = 0; y < height; ++y) {
                const int sy = y + dy;
                T* dst = out + n * hw + static_cast<std::ptrdiff_t>(y) * width;
                if (sy < 0 || sy >= height) {
                    for (int xx = 0; xx < width; ++xx) {
                        dst[xx] = T(0);
                    }
                    continue;
                }
                const T* src = plane + static_cast<std::ptrdiff_t>(sy) * width;
                for (int xx = 0; xx < width; ++xx) {
                    const int sx = xx + dx;
                    dst[xx] = (sx < 0 || sx >= width) ? T(0) : src[sx];
                }
            }
        }
    }
}

/// Adjoint of im2col3x3: scatters column gradients back onto the (zeroed) input gradient.
template <typename T>
void col2im3x3(const T* cols, int batch, int channels, int height, int width, T* x)
{
    const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(height) * width;
    const std::ptrdiff_t ncols = batch * hw;
#pragma omp parallel for collapse(2) schedule(static) if (ncols * channels * 9 > 65536)
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
            T* plane = x + (static_cast<std::ptrdiff_t>(n) * channels + c) * hw;
            for (std::ptrdiff_t p = 0; p < hw; ++p) {
                plane[p] = T(0);
            }
            for (int kk = 0; kk < 9; ++kk) {
                const int dy = kk / 3 - 1;
                const int dx = kk % 3 - 1;
                const T* src = cols + static_cast<std::ptrdiff_t>(c * 9 + kk) * ncols + n * hw;
                for (int y = 0; y < height; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= height) {
                        continue;
                    }
                    const T* srow = src + static_cast<std::ptrdiff_t>(y) * width;
                    T* drow = plane + static_cast<std::ptrdiff_t>(sy) * width;
                    for (int xx = 0; xx < width; ++xx) {
                        const int sx = xx + dx;
                        if (sx >= 0 && sx < width) {
                            drow[sx] += srow[xx];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace bgsnetd::kernels
