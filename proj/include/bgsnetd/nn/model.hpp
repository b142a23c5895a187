#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bgsnetd/nn/layers.hpp"

namespace bgsnetd::nn {

/// Where the 1-D batch norm sits relative to the sigmoid in the two hidden dense layers.
enum class MlpOrder : std::uint8_t { DenseSigmoidBn = 0, DenseBnSigmoid = 1 };

/// Hyper-parameters of the three-block CNN + MLP. `standard()` is the full-size 2x40x40 network,
/// `thumbnail()` the same layer stack at toy size for gradient checks.
struct ModelSpec {
    int in_channels = 2;
    int patch_size = 40;
    std::array<int, 3> conv_widths{24, 48, 96};
    std::array<int, 2> hidden{1200, 600};
    MlpOrder mlp_order = MlpOrder::DenseSigmoidBn;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    static ModelSpec standard() { return {}; }
    static ModelSpec thumbnail()
    {
        ModelSpec s;
        s.patch_size = 8;
        s.conv_widths = {4, 8, 16};
        s.hidden = {8, 4};
        return s;
    }

    int flat_features() const
    {
        const int side = patch_size / 8;
        return conv_widths[2] * side * side;
    }

    void validate() const
    {
        if (patch_size < 8 || patch_size % 8 != 0) {
            throw ConfigError("model patch size must be a positive multiple of 8 (three 2x2 poolings)");
        }
        if (in_channels < 1) {
            throw ConfigError("model needs at least one input channel");
        }
        for (int w : conv_widths) {
            if (w < 1) throw ConfigError("conv width must be positive");
        }
        for (int h : hidden) {
            if (h < 1) throw ConfigError("hidden width must be positive");
        }
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <typename T>
class Model {
public:
    Model() : Model(ModelSpec::standard()) {}

    explicit Model(const ModelSpec& spec) : spec_(spec)
    {
        spec.validate();
        int in = spec.in_channels;
        for (int b = 0; b < 3; ++b) {
            conv[b] = ConvLayer<T>(in, spec.conv_widths[b]);
            conv_bn[b] = BatchNormLayer<T>(spec.conv_widths[b], spec.bn_momentum, spec.bn_epsilon);
            in = spec.conv_widths[b];
        }
        const int sizes[4] = {spec.flat_features(), spec.hidden[0], spec.hidden[1], 1};
        for (int d = 0; d < 3; ++d) {
            dense[d] = DenseLayer<T>(sizes[d], sizes[d + 1]);
        }
        for (int d = 0; d < 2; ++d) {
            dense_bn[d] = BatchNormLayer<T>(spec.hidden[d], spec.bn_momentum, spec.bn_epsilon);
        }
    }

    Model(const Model&) = default;
    Model(Model&&) noexcept = default;
    // Assignment keeps the object identity but changes its contents, so caches taken before must go stale.
    Model& operator=(const Model& other)
    {
        const std::uint64_t v = std::max(version_, other.version_) + 1;
        spec_ = other.spec_;
        conv = other.conv;
        conv_bn = other.conv_bn;
        dense = other.dense;
        dense_bn = other.dense_bn;
        version_ = v;
        return *this;
    }
    Model& operator=(Model&& other) noexcept
    {
        const std::uint64_t v = std::max(version_, other.version_) + 1;
        spec_ = other.spec_;
        conv = std::move(other.conv);
        conv_bn = std::move(other.conv_bn);
        dense = std::move(other.dense);
        dense_bn = std::move(other.dense_bn);
        version_ = v;
        return *this;
    }

    const ModelSpec& spec() const noexcept { return spec_; }

    /// Trainable tensors in manifest order: per conv block weight, bias, gamma, beta; per dense
    /// layer weight, bias and (hidden layers) gamma, beta.
    std::vector<Tensor<T>*> parameters()
    {
        std::vector<Tensor<T>*> out;
        for (int b = 0; b < 3; ++b) {
            out.insert(out.end(), {&conv[b].weight, &conv[b].bias, &conv_bn[b].gamma, &conv_bn[b].beta});
        }
        for (int d = 0; d < 3; ++d) {
            out.insert(out.end(), {&dense[d].weight, &dense[d].bias});
            if (d < 2) {
                out.insert(out.end(), {&dense_bn[d].gamma, &dense_bn[d].beta});
            }
        }
        return out;
    }
    std::vector<const Tensor<T>*> parameters() const
    {
        auto p = const_cast<Model*>(this)->parameters();
        return {p.begin(), p.end()};
    }

    /// Every tensor that defines the model, with a stable name, in checkpoint order.
    std::vector<std::pair<std::string, Tensor<T>*>> named_state()
    {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        auto add_bn = [&](const std::string& prefix, BatchNormLayer<T>& bn) {
            out.emplace_back(prefix + ".gamma", &bn.gamma);
            out.emplace_back(prefix + ".beta", &bn.beta);
            out.emplace_back(prefix + ".running_mean", &bn.running_mean);
            out.emplace_back(prefix + ".running_var", &bn.running_var);
        };
        for (int b = 0; b < 3; ++b) {
            const std::string p = "conv" + std::to_string(b + 1);
            out.emplace_back(p + ".weight", &conv[b].weight);
            out.emplace_back(p + ".bias", &conv[b].bias);
            add_bn(p + ".bn", conv_bn[b]);
        }
        for (int d = 0; d < 3; ++d) {
            const std::string p = "fc" + std::to_string(d + 1);
            out.emplace_back(p + ".weight", &dense[d].weight);
            out.emplace_back(p + ".bias", &dense[d].bias);
            if (d < 2) {
                add_bn(p + ".bn", dense_bn[d]);
            }
        }
        return out;
    }
    std::vector<std::pair<std::string, const Tensor<T>*>> named_state() const
    {
        auto s = const_cast<Model*>(this)->named_state();
        return {s.begin(), s.end()};
    }

    /// Bumped whenever parameters change; forward caches remember the version they saw.
    std::uint64_t version() const noexcept { return version_; }
    void touch() noexcept { ++version_; }

    friend bool operator==(const Model& a, const Model& b)
    {
        if (a.spec_ != b.spec_) return false;
        const auto sa = a.named_state();
        const auto sb = b.named_state();
        for (std::size_t k = 0; k < sa.size(); ++k) {
            if (*sa[k].second != *sb[k].second) return false;
        }
        return true;
    }

    std::array<ConvLayer<T>, 3> conv;
    std::array<BatchNormLayer<T>, 3> conv_bn;
    std::array<DenseLayer<T>, 3> dense;
    std::array<BatchNormLayer<T>, 2> dense_bn;

private:
    ModelSpec spec_;
    std::uint64_t version_ = 0;
};

/// Conv: He normal (std sqrt(2 / fan_in)). Dense: Xavier uniform (+-sqrt(6 / (fan_in + fan_out))).
/// Biases 0, gamma 1, beta 0, running stats (0, 1).
template <typename T>
Model<T> init_model(const ModelSpec& spec, std::uint64_t seed)
{
    Model<T> m(spec);
    std::mt19937_64 rng(seed);
    for (auto& c : m.conv) {
        const double fan_in = static_cast<double>(c.in_channels() * 9);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (T& v : c.weight.data) {
            v = static_cast<T>(dist(rng));
        }
    }
    for (auto& d : m.dense) {
        const double limit = std::sqrt(6.0 / static_cast<double>(d.in_features() + d.out_features()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (T& v : d.weight.data) {
            v = static_cast<T>(dist(rng));
        }
    }
    return m;
}

/// Gradients in the order of Model::parameters().
template <typename T>
using Gradients = std::vector<Tensor<T>>;

struct TraceEntry {
    std::string layer;
    Shape shape;
};

template <typename T>
struct ModelCache {
    std::uint64_t version = 0;
    const Model<T>* model = nullptr;
    Mode mode = Mode::Train;
    std::array<ConvCache<T>, 3> conv;
    std::array<Tensor<T>, 3> relu_out;
    std::array<BatchNormCache<T>, 3> conv_bn;
    std::array<PoolCache, 3> pool;
    Shape pooled_shape;
    std::array<DenseCache<T>, 3> dense;
    std::array<Tensor<T>, 3> sigmoid_out;
    std::array<BatchNormCache<T>, 2> dense_bn;
};

namespace detail {

template <typename T>
Tensor<T> forward_impl(Model<T>& model, const Tensor<T>& x, Mode mode, ModelCache<T>* cache,
                       std::vector<TraceEntry>* trace)
{
    const ModelSpec& spec = model.spec();
    const auto p = static_cast<std::size_t>(spec.patch_size);
    if (x.rank() != 4 || x.dim(1) != static_cast<std::size_t>(spec.in_channels) || x.dim(2) != p || x.dim(3) != p) {
        throw DataError("model input " + shape_string(x.shape) + " does not match N x " +
                        std::to_string(spec.in_channels) + " x " + std::to_string(p) + " x " + std::to_string(p));
    }
    auto record = [&](const std::string& name, const Tensor<T>& t) {
        if (trace) trace->push_back({name, t.shape});
    };
    if (cache) {
        cache->version = model.version();
        cache->model = &model;
        cache->mode = mode;
    }

    Tensor<T> h = x;
    for (int b = 0; b < 3; ++b) {
        const std::string name = "conv" + std::to_string(b + 1);
        h = conv2d_forward(h, model.conv[b], cache ? &cache->conv[b] : nullptr);
        record(name + ".conv", h);
        h = relu_forward(h);
        if (cache) cache->relu_out[b] = h;
        h = batchnorm_forward(h, model.conv_bn[b], mode, cache ? &cache->conv_bn[b] : nullptr);
        h = maxpool2_forward(h, cache ? &cache->pool[b] : nullptr);
        record(name, h);
    }
    const std::size_t n = h.dim(0);
    if (cache) cache->pooled_shape = h.shape;
    h.shape = {n, h.size() / n};
    record("flatten", h);

    for (int d = 0; d < 3; ++d) {
        const std::string name = "fc" + std::to_string(d + 1);
        h = dense_forward(h, model.dense[d], cache ? &cache->dense[d] : nullptr);
        const bool hidden = d < 2;
        if (hidden && spec.mlp_order == MlpOrder::DenseBnSigmoid) {
            h = batchnorm_forward(h, model.dense_bn[d], mode, cache ? &cache->dense_bn[d] : nullptr);
            h = sigmoid_forward(h);
            if (cache) cache->sigmoid_out[d] = h;
        } else {
            h = sigmoid_forward(h);
            if (cache) cache->sigmoid_out[d] = h;
            if (hidden) {
                h = batchnorm_forward(h, model.dense_bn[d], mode, cache ? &cache->dense_bn[d] : nullptr);
            }
        }
        record(name, h);
    }
    h.shape = {n};
    return h;
}

}  // namespace detail

/// Full forward pass returning one foreground probability per sample. Train mode uses batch
/// statistics and updates the running statistics; eval mode leaves the model unchanged.
template <typename T>
Tensor<T> model_forward(Model<T>& model, const Tensor<T>& x, Mode mode, ModelCache<T>* cache = nullptr,
                        std::vector<TraceEntry>* trace = nullptr)
{
    return detail::forward_impl(model, x, mode, cache, trace);
}

/// Eval-mode forward on a shared model. The convolutional stage runs one sample at a time so its
/// working set stays in cache; the result is bit-identical to model_forward in eval mode.
template <typename T>
Tensor<T> model_predict(const Model<T>& model, const Tensor<T>& x, std::vector<TraceEntry>* trace = nullptr)
{
    // Eval mode reads running statistics only, so the const_cast never results in a write.
    Model<T>& m = const_cast<Model<T>&>(model);
    const ModelSpec& spec = model.spec();
    const auto p = static_cast<std::size_t>(spec.patch_size);
    if (trace || x.rank() != 4 || x.dim(0) < 2) {
        return detail::forward_impl<T>(m, x, Mode::Eval, nullptr, trace);
    }
    require_shape(x, {x.dim(0), static_cast<std::size_t>(spec.in_channels), p, p}, "model input");
    const std::size_t n = x.dim(0);
    const std::size_t per_sample = x.size() / n;
    const auto flat = static_cast<std::size_t>(spec.flat_features());
    Tensor<T> h({n, flat});

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        Tensor<T> s({1, x.dim(1), p, p});
        std::copy_n(x.ptr() + i * per_sample, per_sample, s.ptr());
        for (int b = 0; b < 3; ++b) {
            s = conv2d_forward(s, m.conv[b]);
            s = relu_forward(s);
            s = batchnorm_forward(s, m.conv_bn[b], Mode::Eval);
            s = maxpool2_forward(s);
        }
        std::copy(s.data.begin(), s.data.end(), h.ptr() + i * flat);
    }

    for (int d = 0; d < 3; ++d) {
        h = dense_forward(h, m.dense[d]);
        const bool hidden = d < 2;
        if (hidden && spec.mlp_order == MlpOrder::DenseBnSigmoid) {
            h = sigmoid_forward(batchnorm_forward(h, m.dense_bn[d], Mode::Eval));
        } else {
            h = sigmoid_forward(h);
            if (hidden) h = batchnorm_forward(h, m.dense_bn[d], Mode::Eval);
        }
    }
    h.shape = {n};
    return h;
}

template <typename T>
Gradients<T> model_backward(const Model<T>& model, const ModelCache<T>& cache, std::span<const T> grad_probs)
{
    if (cache.model != &model || cache.version != model.version()) {
        stale_cache("model");
    }
    const ModelSpec& spec = model.spec();
    const std::size_t n = cache.pooled_shape.at(0);
    if (grad_probs.size() != n) {
        throw DataError("model_backward: gradient size does not match the cached batch");
    }

    // Filled back to front, then emitted in parameters() order.
    std::array<ConvGrads<T>, 3> gconv;
    std::array<BatchNormGrads<T>, 3> gconv_bn;
    std::array<DenseGrads<T>, 3> gdense;
    std::array<BatchNormGrads<T>, 2> gdense_bn;

    Tensor<T> g({n, 1}, std::vector<T>(grad_probs.begin(), grad_probs.end()));
    for (int d = 2; d >= 0; --d) {
        const bool hidden = d < 2;
        if (hidden && spec.mlp_order == MlpOrder::DenseBnSigmoid) {
            g = sigmoid_backward(g, cache.sigmoid_out[d]);
            gdense_bn[d] = batchnorm_backward(g, cache.dense_bn[d], model.dense_bn[d]);
            g = std::move(gdense_bn[d].input);
        } else {
            if (hidden) {
                gdense_bn[d] = batchnorm_backward(g, cache.dense_bn[d], model.dense_bn[d]);
                g = std::move(gdense_bn[d].input);
            }
            g = sigmoid_backward(g, cache.sigmoid_out[d]);
        }
        gdense[d] = dense_backward(g, cache.dense[d], model.dense[d]);
        g = std::move(gdense[d].input);
    }
    g.shape = cache.pooled_shape;
    for (int b = 2; b >= 0; --b) {
        g = maxpool2_backward(g, cache.pool[b]);
        gconv_bn[b] = batchnorm_backward(g, cache.conv_bn[b], model.conv_bn[b]);
        g = relu_backward(gconv_bn[b].input, cache.relu_out[b]);
        gconv[b] = conv2d_backward(g, cache.conv[b], model.conv[b], b > 0);
        g = std::move(gconv[b].input);
    }

    Gradients<T> out;
    for (int b = 0; b < 3; ++b) {
        out.push_back(std::move(gconv[b].weight));
        out.push_back(std::move(gconv[b].bias));
        out.push_back(std::move(gconv_bn[b].gamma));
        out.push_back(std::move(gconv_bn[b].beta));
    }
    for (int d = 0; d < 3; ++d) {
        out.push_back(std::move(gdense[d].weight));
        out.push_back(std::move(gdense[d].bias));
        if (d < 2) {
            out.push_back(std::move(gdense_bn[d].gamma));
            out.push_back(std::move(gdense_bn[d].beta));
        }
    }
    return out;
}

/// Packs samples (each in_channels * P * P values) into an N x C x P x P batch tensor.
template <typename T, typename Range>
Tensor<T> make_batch(const ModelSpec& spec, const Range& patches)
{
    const std::size_t plane = static_cast<std::size_t>(spec.in_channels) * spec.patch_size * spec.patch_size;
    Tensor<T> x({static_cast<std::size_t>(std::size(patches)), static_cast<std::size_t>(spec.in_channels),
                 static_cast<std::size_t>(spec.patch_size), static_cast<std::size_t>(spec.patch_size)});
    std::size_t k = 0;
    for (const auto& p : patches) {
        if (std::size(p) != plane) {
            throw DataError("patch size does not match the model input");
        }
        std::copy(std::begin(p), std::end(p), x.data.begin() + static_cast<std::ptrdiff_t>(k * plane));
        ++k;
    }
    return x;
}

}  // namespace bgsnetd::nn
