#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bgsnetd/nn/model.hpp"

namespace bgsnetd::nn {

/// RMSprop squared-gradient accumulators, one per Model::parameters() entry.
template <typename T>
struct RmspropState {
    std::vector<Tensor<T>> accumulators;

    static RmspropState zeros_like(const Model<T>& model)
    {
        RmspropState s;
        for (const Tensor<T>* p : model.parameters()) {
            s.accumulators.emplace_back(p->shape);
        }
        return s;
    }
    bool empty() const noexcept { return accumulators.empty(); }
    friend bool operator==(const RmspropState&, const RmspropState&) = default;
};

enum class Precision : std::uint8_t { Float32 = 0, Float64 = 1 };

template <typename T>
constexpr Precision precision_of()
{
    return sizeof(T) == 4 ? Precision::Float32 : Precision::Float64;
}

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
    Model<T> model;
    RmspropState<T> optimizer;
    Precision stored_precision = precision_of<T>();
};

/// Layout (little-endian): "BGSN", u32 version, u8 precision, model spec, tensor manifest
/// (name, rank, extents), tensor data in manifest order, then the optimizer accumulators.
template <typename T>
void save_checkpoint(const Model<T>& model, const RmspropState<T>& state, const std::filesystem::path& path);

/// Validates magic, version and every tensor shape against the architecture implied by the stored
/// spec (and against `expected` when given). Values stored in the other precision are converted.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelSpec>& expected = {});

/// Reads only the precision flag of a checkpoint.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace bgsnetd::nn
