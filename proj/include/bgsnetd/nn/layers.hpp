#pragma once

// Layer kernels with hand-written forward and backward passes.
//
// Tensors are NCHW (conv path) or NF (dense path). Every forward takes an optional cache; the
// matching backward consumes it and throws DataError if it was produced by a different layer or
// for a different input shape.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bgsnetd/kernels/conv.hpp"
#include "bgsnetd/kernels/gemm.hpp"
#include "bgsnetd/nn/tensor.hpp"

namespace bgsnetd::nn {

enum class Mode { Train, Eval };

inline void stale_cache(const char* layer)
{
    throw DataError(std::string("stale cache passed to ") + layer + " backward");
}

// ---------------------------------------------------------------------------------------------
// Convolution: 3x3 kernel, stride 1, zero padding 1.

template <typename T>
struct ConvLayer {
    Tensor<T> weight;  // out x in x 3 x 3
    Tensor<T> bias;    // out

    ConvLayer() = default;
    ConvLayer(std::size_t in, std::size_t out) : weight({out, in, 3, 3}), bias({out}) {}

    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t out_channels() const { return weight.dim(0); }
};

template <typename T>
struct ConvCache {
    const ConvLayer<T>* layer = nullptr;
    Shape input_shape;
    std::vector<T> cols;  // im2col of the input
};

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvLayer<T>& layer, ConvCache<T>* cache = nullptr)
{
    if (x.rank() != 4 || x.dim(1) != layer.in_channels()) {
        throw DataError("conv2d: input " + shape_string(x.shape) + " does not match " +
                        std::to_string(layer.in_channels()) + " input channels");
    }
    const int n = static_cast<int>(x.dim(0));
    const int c = static_cast<int>(x.dim(1));
    const int h = static_cast<int>(x.dim(2));
    const int w = static_cast<int>(x.dim(3));
    const int o = static_cast<int>(layer.out_channels());
    const int hw = h * w;
    const int ncols = n * hw;
    const int krows = c * 9;

    // Without a cache the column buffer is per-thread scratch reused across calls.
    thread_local std::vector<T> scratch;
    std::vector<T> owned;
    std::vector<T>& cols = cache ? owned : scratch;
    cols.resize(static_cast<std::size_t>(krows) * ncols);
    kernels::im2col3x3(x.ptr(), n, c, h, w, cols.data());

    Tensor<T> y({x.dim(0), static_cast<std::size_t>(o), x.dim(2), x.dim(3)});
    if (n == 1) {
        // Channel-major GEMM output already has the NCHW layout of a single sample.
        kernels::gemm<T>(kernels::Trans::No, kernels::Trans::No, o, ncols, krows, layer.weight.ptr(), krows,
                         cols.data(), ncols, T(0), y.ptr(), ncols);
        for (int oc = 0; oc < o; ++oc) {
            T* dst = y.ptr() + static_cast<std::ptrdiff_t>(oc) * hw;
            const T bias = layer.bias[oc];
            for (int p = 0; p < hw; ++p) {
                dst[p] += bias;
            }
        }
        if (cache) {
            cache->layer = &layer;
            cache->input_shape = x.shape;
            cache->cols = std::move(owned);
        }
        return y;
    }
    std::vector<T> flat(static_cast<std::size_t>(o) * ncols);
    kernels::gemm<T>(kernels::Trans::No, kernels::Trans::No, o, ncols, krows, layer.weight.ptr(), krows, cols.data(),
                     ncols, T(0), flat.data(), ncols);
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<long long>(o) * ncols > 65536)
    for (int b = 0; b < n; ++b) {
        for (int oc = 0; oc < o; ++oc) {
            const T* src = flat.data() + static_cast<std::ptrdiff_t>(oc) * ncols + static_cast<std::ptrdiff_t>(b) * hw;
            T* dst = y.ptr() + (static_cast<std::ptrdiff_t>(b) * o + oc) * hw;
            const T bias = layer.bias[oc];
            for (int p = 0; p < hw; ++p) {
                dst[p] = src[p] + bias;
            }
        }
    }
    if (cache) {
        cache->layer = &layer;
        cache->input_shape = x.shape;
        cache->cols = std::move(owned);
    }
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const ConvCache<T>& cache, const ConvLayer<T>& layer,
                             bool need_input_grad = true)
{
    if (cache.layer != &layer || cache.input_shape.size() != 4) {
        stale_cache("conv2d");
    }
    const int n = static_cast<int>(cache.input_shape[0]);
    const int c = static_cast<int>(cache.input_shape[1]);
    const int h = static_cast<int>(cache.input_shape[2]);
    const int w = static_cast<int>(cache.input_shape[3]);
    const int o = static_cast<int>(layer.out_channels());
    require_shape(grad_out, {cache.input_shape[0], layer.out_channels(), cache.input_shape[2], cache.input_shape[3]},
                  "conv2d grad_out");
    const int hw = h * w;
    const int ncols = n * hw;
    const int krows = c * 9;

    std::vector<T> flat(static_cast<std::size_t>(o) * ncols);
    ConvGrads<T> g{Tensor<T>(), Tensor<T>(layer.weight.shape), Tensor<T>(layer.bias.shape)};
#pragma omp parallel for schedule(static) if (static_cast<long long>(o) * ncols > 65536)
    for (int oc = 0; oc < o; ++oc) {
        T sum = 0;
        for (int b = 0; b < n; ++b) {
            const T* src = grad_out.ptr() + (static_cast<std::ptrdiff_t>(b) * o + oc) * hw;
            T* dst = flat.data() + static_cast<std::ptrdiff_t>(oc) * ncols + static_cast<std::ptrdiff_t>(b) * hw;
            for (int p = 0; p < hw; ++p) {
                dst[p] = src[p];
                sum += src[p];
            }
        }
        g.bias[oc] = sum;
    }
    kernels::gemm<T>(kernels::Trans::No, kernels::Trans::Yes, o, krows, ncols, flat.data(), ncols, cache.cols.data(),
                     ncols, T(0), g.weight.ptr(), krows);
    if (need_input_grad) {
        std::vector<T> dcols(static_cast<std::size_t>(krows) * ncols);
        kernels::gemm<T>(kernels::Trans::Yes, kernels::Trans::No, krows, ncols, o, layer.weight.ptr(), krows,
                         flat.data(), ncols, T(0), dcols.data(), ncols);
        g.input = Tensor<T>(cache.input_shape);
        kernels::col2im3x3(dcols.data(), n, c, h, w, g.input.ptr());
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Elementwise activations. The caches keep the activation output, which is all backward needs.

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x)
{
    Tensor<T> y(x.shape);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        y[k] = x[k] > T(0) ? x[k] : T(0);
    }
    return y;
}

/// `activation` may be either the ReLU input or its output; both are positive on the same set.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& activation)
{
    require_shape(grad_out, activation.shape, "relu grad_out");
    Tensor<T> g(grad_out.shape);
    const auto n = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        g[k] = activation[k] > T(0) ? grad_out[k] : T(0);
    }
    return g;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x)
{
    Tensor<T> y(x.shape);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (n > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        y[k] = T(1) / (T(1) + std::exp(-x[k]));
    }
    return y;
}

/// Takes the sigmoid *output*.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& output)
{
    require_shape(grad_out, output.shape, "sigmoid grad_out");
    Tensor<T> g(grad_out.shape);
    const auto n = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        g[k] = grad_out[k] * output[k] * (T(1) - output[k]);
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Batch normalization over dimension 1 (channels for NCHW, units for NF).

template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t features, double mom = 0.1, double eps = 1e-5)
        : gamma({features}, T(1)),
          beta({features}, T(0)),
          running_mean({features}, T(0)),
          running_var({features}, T(1)),
          momentum(mom),
          epsilon(eps)
    {
    }

    std::size_t features() const { return gamma.size(); }
};

template <typename T>
struct BatchNormCache {
    const BatchNormLayer<T>* layer = nullptr;
    Mode mode = Mode::Train;
    Shape input_shape;
    Tensor<T> xhat;
    std::vector<T> inv_std;
};

template <typename T>
struct BatchNormGrads {
    Tensor<T> input;
    Tensor<T> gamma;
    Tensor<T> beta;
};

namespace detail {

struct BnGeometry {
    std::size_t batch;
    std::size_t features;
    std::size_t inner;  // spatial extent per feature per sample (1 for NF)
};

inline BnGeometry bn_geometry(const Shape& s)
{
    BnGeometry g{s.at(0), s.at(1), 1};
    for (std::size_t k = 2; k < s.size(); ++k) {
        g.inner *= s[k];
    }
    return g;
}

}  // namespace detail

/// In train mode normalizes with the batch statistics and updates the running statistics of
/// `layer` (running variance uses the unbiased batch variance). In eval mode uses the running
/// statistics and leaves `layer` untouched.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNormLayer<T>& layer, Mode mode,
                            BatchNormCache<T>* cache = nullptr)
{
    if (x.rank() < 2 || x.dim(1) != layer.features()) {
        throw DataError("batchnorm: input " + shape_string(x.shape) + " does not match " +
                        std::to_string(layer.features()) + " features");
    }
    const detail::BnGeometry geo = detail::bn_geometry(x.shape);
    const std::size_t m = geo.batch * geo.inner;
    if (mode == Mode::Train && m < 2) {
        throw DataError("batchnorm: train mode needs at least 2 values per feature (batch of size 1)");
    }
    Tensor<T> y(x.shape);
    Tensor<T> xhat(x.shape);
    std::vector<T> inv_std(geo.features);

#pragma omp parallel for schedule(static) if (x.size() > 65536)
    for (std::size_t f = 0; f < geo.features; ++f) {
        T mean;
        T var;
        if (mode == Mode::Train) {
            double sum = 0;
            for (std::size_t b = 0; b < geo.batch; ++b) {
                const T* p = x.ptr() + (b * geo.features + f) * geo.inner;
                for (std::size_t i = 0; i < geo.inner; ++i) {
                    sum += p[i];
                }
            }
            const double mu = sum / static_cast<double>(m);
            double sq = 0;
            for (std::size_t b = 0; b < geo.batch; ++b) {
                const T* p = x.ptr() + (b * geo.features + f) * geo.inner;
                for (std::size_t i = 0; i < geo.inner; ++i) {
                    const double d = p[i] - mu;
                    sq += d * d;
                }
            }
            const double biased = sq / static_cast<double>(m);
            const double unbiased = sq / static_cast<double>(m - 1);
            layer.running_mean[f] =
                static_cast<T>((1.0 - layer.momentum) * layer.running_mean[f] + layer.momentum * mu);
            layer.running_var[f] =
                static_cast<T>((1.0 - layer.momentum) * layer.running_var[f] + layer.momentum * unbiased);
            mean = static_cast<T>(mu);
            var = static_cast<T>(biased);
        } else {
            mean = layer.running_mean[f];
            var = layer.running_var[f];
        }
        const T is = T(1) / std::sqrt(var + static_cast<T>(layer.epsilon));
        inv_std[f] = is;
        const T gm = layer.gamma[f];
        const T bt = layer.beta[f];
        for (std::size_t b = 0; b < geo.batch; ++b) {
            const std::size_t off = (b * geo.features + f) * geo.inner;
            for (std::size_t i = 0; i < geo.inner; ++i) {
                const T xh = (x[off + i] - mean) * is;
                xhat[off + i] = xh;
                y[off + i] = gm * xh + bt;
            }
        }
    }
    if (cache) {
        cache->layer = &layer;
        cache->mode = mode;
        cache->input_shape = x.shape;
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormCache<T>& cache,
                                     const BatchNormLayer<T>& layer)
{
    if (cache.layer != &layer) {
        stale_cache("batchnorm");
    }
    require_shape(grad_out, cache.input_shape, "batchnorm grad_out");
    const detail::BnGeometry geo = detail::bn_geometry(cache.input_shape);
    const T m = static_cast<T>(geo.batch * geo.inner);
    BatchNormGrads<T> g{Tensor<T>(cache.input_shape), Tensor<T>(layer.gamma.shape), Tensor<T>(layer.beta.shape)};

#pragma omp parallel for schedule(static) if (grad_out.size() > 65536)
    for (std::size_t f = 0; f < geo.features; ++f) {
        T sum_g = 0;
        T sum_gx = 0;
        for (std::size_t b = 0; b < geo.batch; ++b) {
            const std::size_t off = (b * geo.features + f) * geo.inner;
            for (std::size_t i = 0; i < geo.inner; ++i) {
                sum_g += grad_out[off + i];
                sum_gx += grad_out[off + i] * cache.xhat[off + i];
            }
        }
        g.beta[f] = sum_g;
        g.gamma[f] = sum_gx;
        const T scale = layer.gamma[f] * cache.inv_std[f];
        for (std::size_t b = 0; b < geo.batch; ++b) {
            const std::size_t off = (b * geo.features + f) * geo.inner;
            for (std::size_t i = 0; i < geo.inner; ++i) {
                if (cache.mode == Mode::Train) {
                    g.input[off + i] = scale / m * (m * grad_out[off + i] - sum_g - cache.xhat[off + i] * sum_gx);
                } else {
                    g.input[off + i] = scale * grad_out[off + i];
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// 2x2 max pooling, stride 2.

struct PoolCache {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// Ties resolve to the first element in row-major scan order of the 2x2 block.
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, PoolCache* cache = nullptr)
{
    if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
        throw DataError("maxpool2: spatial extent must be even, got " + shape_string(x.shape));
    }
    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::size_t h = x.dim(2);
    const std::size_t w = x.dim(3);
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    Tensor<T> y({x.dim(0), x.dim(1), oh, ow});
    std::vector<std::uint32_t> argmax(y.size());
#pragma omp parallel for schedule(static) if (x.size() > 65536)
    for (std::size_t p = 0; p < planes; ++p) {
        const std::size_t in_off = p * h * w;
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                std::size_t best = in_off + 2 * r * w + 2 * c;
                const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                for (std::size_t k : cand) {
                    if (x[k] > x[best]) {
                        best = k;
                    }
                }
                const std::size_t o = (p * oh + r) * ow + c;
                y[o] = x[best];
                argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    if (cache) {
        cache->input_shape = x.shape;
        cache->argmax = std::move(argmax);
    }
    return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const PoolCache& cache)
{
    if (grad_out.size() != cache.argmax.size()) {
        stale_cache("maxpool2");
    }
    Tensor<T> g(cache.input_shape);
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
        g[cache.argmax[k]] += grad_out[k];
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Fully connected layer: y = x W^T + b, x is N x in.

template <typename T>
struct DenseLayer {
    Tensor<T> weight;  // out x in
    Tensor<T> bias;    // out

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }
};

template <typename T>
struct DenseCache {
    const DenseLayer<T>* layer = nullptr;
    Tensor<T> input;
};

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseLayer<T>& layer, DenseCache<T>* cache = nullptr)
{
    if (x.rank() != 2 || x.dim(1) != layer.in_features()) {
        throw DataError("dense: input " + shape_string(x.shape) + " does not match " +
                        std::to_string(layer.in_features()) + " inputs");
    }
    const int n = static_cast<int>(x.dim(0));
    const int in = static_cast<int>(layer.in_features());
    const int out = static_cast<int>(layer.out_features());
    Tensor<T> y({x.dim(0), layer.out_features()});
    kernels::gemm<T>(kernels::Trans::No, kernels::Trans::Yes, n, out, in, x.ptr(), in, layer.weight.ptr(), in, T(0),
                     y.ptr(), out);
    for (int b = 0; b < n; ++b) {
        T* row = y.ptr() + static_cast<std::ptrdiff_t>(b) * out;
        for (int o = 0; o < out; ++o) {
            row[o] += layer.bias[o];
        }
    }
    if (cache) {
        cache->layer = &layer;
        cache->input = x;
    }
    return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const DenseCache<T>& cache, const DenseLayer<T>& layer)
{
    if (cache.layer != &layer) {
        stale_cache("dense");
    }
    const int n = static_cast<int>(cache.input.dim(0));
    const int in = static_cast<int>(layer.in_features());
    const int out = static_cast<int>(layer.out_features());
    require_shape(grad_out, {cache.input.dim(0), layer.out_features()}, "dense grad_out");
    DenseGrads<T> g{Tensor<T>(cache.input.shape), Tensor<T>(layer.weight.shape), Tensor<T>(layer.bias.shape)};
    kernels::gemm<T>(kernels::Trans::Yes, kernels::Trans::No, out, in, n, grad_out.ptr(), out, cache.input.ptr(), in,
                     T(0), g.weight.ptr(), in);
    kernels::gemm<T>(kernels::Trans::No, kernels::Trans::No, n, in, out, grad_out.ptr(), out, layer.weight.ptr(), in,
                     T(0), g.input.ptr(), in);
    for (int o = 0; o < out; ++o) {
        T sum = 0;
        for (int b = 0; b < n; ++b) {
            sum += grad_out[static_cast<std::size_t>(b) * out + o];
        }
        g.bias[o] = sum;
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Binary cross entropy over a batch of probabilities.

inline constexpr double kBceClamp = 1e-7;

template <typename T>
struct BceResult {
    double loss = 0;
    std::vector<T> grad;  // d loss / d y
};

/// Predictions are clamped to [1e-7, 1 - 1e-7]; the gradient is evaluated at the clamped value.
template <typename T>
BceResult<T> bce_loss(std::span<const T> y, std::span<const T> target)
{
    if (y.size() != target.size() || y.empty()) {
        throw DataError("bce_loss: prediction/target size mismatch or empty batch");
    }
    const double n = static_cast<double>(y.size());
    BceResult<T> r;
    r.grad.resize(y.size());
    double sum = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double p = std::clamp(static_cast<double>(y[k]), kBceClamp, 1.0 - kBceClamp);
        const double t = target[k];
        sum += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        r.grad[k] = static_cast<T>(-(t / p - (1.0 - t) / (1.0 - p)) / n);
    }
    r.loss = -sum / n;
    return r;
}

}  // namespace bgsnetd::nn
