#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgsnetd/nn/checkpoint.hpp"
#include "bgsnetd/nn/model.hpp"
#include "bgsnetd/patches.hpp"

namespace bgsnetd {

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 150;
    int epochs = 10;
    double rmsprop_rho = 0.9;
    double rmsprop_epsilon = 1e-8;
    std::uint64_t seed = 1;
    bool shuffle = true;
    int early_stop_patience = 0;  // 0 disables early stopping

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0;
    double accuracy = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::vector<std::string> warnings;

    /// CSV with header `epoch,mean_loss,accuracy,seconds`.
    std::string to_csv() const;
};

/// acc <- rho * acc + (1 - rho) * g^2;  p <- p - lr * g / (sqrt(acc) + eps), elementwise.
template <typename T>
void rmsprop_step(std::span<nn::Tensor<T>* const> params, const nn::Gradients<T>& grads, nn::RmspropState<T>& state,
                  const TrainConfig& cfg);

template <typename T>
struct TrainResult {
    nn::Model<T> model;
    nn::RmspropState<T> optimizer;
    TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Seeded initialisation, then per epoch: shuffle, batches of batch_size (a final batch of fewer
/// than 2 samples is dropped), train-mode forward, BCE loss, backward, one RMSprop step per batch.
template <typename T>
TrainResult<T> train(std::span<const PatchSample> dataset, const TrainConfig& cfg,
                     const nn::ModelSpec& spec = nn::ModelSpec::standard(), const EpochCallback& on_epoch = {});

/// Continues training from an existing model and optimizer state.
template <typename T>
TrainResult<T> train_from(nn::Model<T> model, nn::RmspropState<T> state, std::span<const PatchSample> dataset,
                          const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace bgsnetd
