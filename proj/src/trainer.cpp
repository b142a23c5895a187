#include "bgsnetd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace bgsnetd {

void TrainConfig::validate() const
{
    if (!(learning_rate >= 0.0)) {
        throw ConfigError("learning_rate must be non-negative");
    }
    if (batch_size < 2) {
        throw ConfigError("batch_size must be at least 2 (batch norm needs two samples)");
    }
    if (epochs < 0) {
        throw ConfigError("epochs must be non-negative");
    }
    if (!(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0)) {
        throw ConfigError("rmsprop_rho must lie in [0, 1)");
    }
    if (!(rmsprop_epsilon > 0.0)) {
        throw ConfigError("rmsprop_epsilon must be positive");
    }
}

std::string TrainHistory::to_csv() const
{
    std::ostringstream out;
    out.precision(10);
    out << "epoch,mean_loss,accuracy,seconds\n";
    for (const EpochStats& e : epochs) {
        out << e.epoch << ',' << e.mean_loss << ',' << e.accuracy << ',' << e.seconds << '\n';
    }
    return out.str();
}

template <typename T>
void rmsprop_step(std::span<nn::Tensor<T>* const> params, const nn::Gradients<T>& grads, nn::RmspropState<T>& state,
                  const TrainConfig& cfg)
{
    if (params.size() != grads.size() || params.size() != state.accumulators.size()) {
        throw DataError("rmsprop_step: parameter, gradient and state counts differ");
    }
    const T rho = static_cast<T>(cfg.rmsprop_rho);
    const T lr = static_cast<T>(cfg.learning_rate);
    const T eps = static_cast<T>(cfg.rmsprop_epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
        nn::Tensor<T>& p = *params[k];
        const nn::Tensor<T>& g = grads[k];
        nn::Tensor<T>& acc = state.accumulators[k];
        nn::require_shape(g, p.shape, "rmsprop gradient");
        nn::require_shape(acc, p.shape, "rmsprop accumulator");
        const auto n = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for simd schedule(static) if (n > 65536)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const T gi = g[i];
            const T a = rho * acc[i] + (T(1) - rho) * gi * gi;
            acc[i] = a;
            p[i] -= lr * gi / (std::sqrt(a) + eps);
        }
    }
}

namespace {

template <typename T>
nn::Tensor<T> gather_batch(const nn::ModelSpec& spec, std::span<const PatchSample> data,
                           std::span<const std::size_t> idx, std::vector<T>& targets)
{
    const std::size_t plane = static_cast<std::size_t>(spec.in_channels) * spec.patch_size * spec.patch_size;
    nn::Tensor<T> x({idx.size(), static_cast<std::size_t>(spec.in_channels), static_cast<std::size_t>(spec.patch_size),
                     static_cast<std::size_t>(spec.patch_size)});
    targets.resize(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const PatchSample& s = data[idx[b]];
        if (s.data.size() != plane) {
            throw DataError("training sample size does not match the model input");
        }
        std::copy(s.data.begin(), s.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
        targets[b] = static_cast<T>(s.label);
    }
    return x;
}

}  // namespace

template <typename T>
TrainResult<T> train_from(nn::Model<T> model, nn::RmspropState<T> state, std::span<const PatchSample> dataset,
                          const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    cfg.validate();
    if (dataset.empty()) {
        throw DataError("cannot train on an empty dataset");
    }
    if (dataset.size() < 2) {
        throw DataError("training needs at least 2 samples for batch norm");
    }
    if (state.empty()) {
        state = nn::RmspropState<T>::zeros_like(model);
    }
    TrainResult<T> result{std::move(model), std::move(state), {}};
    const std::size_t n_fg = static_cast<std::size_t>(std::count_if(
        dataset.begin(), dataset.end(), [](const PatchSample& s) { return s.label == 1; }));
    if (n_fg == 0 || n_fg == dataset.size()) {
        result.history.warnings.push_back("training set contains a single class (" +
                                          std::string(n_fg == 0 ? "background" : "foreground") + " only)");
    }

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    auto params = result.model.parameters();
    std::vector<T> targets;
    double best = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        if (cfg.shuffle) {
            std::shuffle(order.begin(), order.end(), rng);
        }
        double loss_sum = 0;
        std::size_t correct = 0;
        std::size_t seen = 0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            if (end - begin < 2) {
                break;
            }
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            const nn::Tensor<T> x = gather_batch<T>(result.model.spec(), dataset, idx, targets);
            nn::ModelCache<T> cache;
            const nn::Tensor<T> probs = nn::model_forward(result.model, x, nn::Mode::Train, &cache);
            const auto bce = nn::bce_loss<T>(probs.data, targets);
            const nn::Gradients<T> grads = nn::model_backward<T>(result.model, cache, bce.grad);
            rmsprop_step<T>(params, grads, result.optimizer, cfg);
            result.model.touch();

            loss_sum += bce.loss;
            ++batches;
            for (std::size_t b = 0; b < idx.size(); ++b) {
                correct += (probs[b] >= T(0.5)) == (targets[b] > T(0.5));
            }
            seen += idx.size();
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        stats.accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.epochs.push_back(stats);
        if (on_epoch) {
            on_epoch(stats);
        }
        if (cfg.early_stop_patience > 0) {
            if (stats.mean_loss < best - 1e-4) {
                best = stats.mean_loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= cfg.early_stop_patience) {
                break;
            }
        }
    }
    return result;
}

template <typename T>
TrainResult<T> train(std::span<const PatchSample> dataset, const TrainConfig& cfg, const nn::ModelSpec& spec,
                     const EpochCallback& on_epoch)
{
    nn::Model<T> model = nn::init_model<T>(spec, cfg.seed);
    return train_from<T>(std::move(model), {}, dataset, cfg, on_epoch);
}

template void rmsprop_step<float>(std::span<nn::Tensor<float>* const>, const nn::Gradients<float>&,
                                  nn::RmspropState<float>&, const TrainConfig&);
template void rmsprop_step<double>(std::span<nn::Tensor<double>* const>, const nn::Gradients<double>&,
                                   nn::RmspropState<double>&, const TrainConfig&);
template TrainResult<float> train<float>(std::span<const PatchSample>, const TrainConfig&, const nn::ModelSpec&,
                                         const EpochCallback&);
template TrainResult<double> train<double>(std::span<const PatchSample>, const TrainConfig&, const nn::ModelSpec&,
                                           const EpochCallback&);
template TrainResult<float> train_from<float>(nn::Model<float>, nn::RmspropState<float>,
                                              std::span<const PatchSample>, const TrainConfig&, const EpochCallback&);
template TrainResult<double> train_from<double>(nn::Model<double>, nn::RmspropState<double>,
                                                std::span<const PatchSample>, const TrainConfig&,
                                                const EpochCallback&);

}  // namespace bgsnetd
