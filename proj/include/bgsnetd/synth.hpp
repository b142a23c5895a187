#pragma once

#include <cstdint>
#include <optional>

#include "bgsnetd/depth_io.hpp"

namespace bgsnetd {

struct Rect {
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;

    bool contains(int r, int c) const noexcept { return r >= row && r < row + height && c >= col && c < col + width; }
};

/// Planar background with one square object moving horizontally (wrapping at the right edge).
struct SynthConfig {
    int width = 64;
    int height = 64;
    int frame_count = 120;
    std::uint16_t bg_depth_mm = 3000;
    std::uint16_t object_depth_mm = 2000;
    int object_size_px = 16;
    double velocity_px_per_frame = 1.0;
    std::optional<int> object_row;  // top row of the object; vertically centred when unset
    double absent_rate = 0.02;      // per-pixel, per-frame dropout probability
    int edge_noise_px = 0;          // object outline in the depth image jitters by up to this many pixels
    double depth_noise_mm = 0.0;    // Gaussian sensor noise on valid pixels
    std::optional<Rect> out_of_range_rect;  // background pixels never measured (always 0)
    std::optional<Rect> far_rect;           // static background region at far_depth_mm
    std::uint16_t far_depth_mm = 0;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Deterministic for a fixed config. Ground truth marks the object Foreground and a one pixel ring
/// around it Unknown; jitter, dropouts and noise only affect the depth frames.
VideoSequence generate(const SynthConfig& cfg);

/// 64x64, 120 frames, 2% dropouts.
SynthConfig default_synth_config();

/// Object 60 mm in front of a 2000 mm background, plus a far strip that widens the scene's depth range.
SynthConfig camouflage_config();

/// Near background, distant wall and a shallow object with heavy dropouts.
SynthConfig wide_range_config();

}  // namespace bgsnetd
