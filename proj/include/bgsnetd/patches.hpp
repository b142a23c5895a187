#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bgsnetd/depth_io.hpp"

namespace bgsnetd {

struct PatchOrigin {
    std::uint32_t frame = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Two stacked T x T windows: channel 0 from the normalized frame, channel 1 from the normalized background.
struct PatchSample {
    std::vector<float> data;  // 2 * T * T, channel-major
    std::uint8_t label = 0;   // 1 = foreground
    PatchOrigin origin;
    friend bool operator==(const PatchSample&, const PatchSample&) = default;
};

struct SamplingConfig {
    int patch_size = 40;
    std::size_t max_samples_per_frame = 100;
    double fg_fraction = 0.5;
    int stride = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Copies the window centred at (row, col) into `out` (size 2*T*T). The centre pixel sits at window
/// offset (T/2, T/2); coordinates outside the image replicate the nearest edge pixel.
void extract_patch(const NormalizedFrame& frame, const NormalizedFrame& bg, int row, int col, int patch_size,
                   std::span<float> out);
std::vector<float> extract_patch(const NormalizedFrame& frame, const NormalizedFrame& bg, int row, int col,
                                 int patch_size);

/// 1 for foreground, 0 for background or shadow, nullopt for pixels that must not be used.
std::optional<std::uint8_t> label_from_gt(GtLabel gt) noexcept;

/// Samples labelled patches from `frame_ids` (all frames when empty). Deterministic for a fixed seed.
std::vector<PatchSample> generate_training_set(const VideoSequence& seq, const NormalizedFrame& bg,
                                               std::span<const NormalizedFrame> frames, const SamplingConfig& cfg,
                                               std::span<const std::size_t> frame_ids = {});

struct PatchDataset {
    int patch_size = 40;
    std::vector<PatchSample> samples;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const PatchDataset& ds, const std::filesystem::path& path);
PatchDataset load_dataset(const std::filesystem::path& path);

}  // namespace bgsnetd
