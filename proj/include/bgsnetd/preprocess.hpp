#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bgsnetd/depth_io.hpp"

namespace bgsnetd {

/// Depth range of a sequence. `min_valid` ignores absent (zero) pixels, `max` does not need to.
struct DepthStats {
    std::uint16_t min_valid = 0;
    std::uint16_t max = 0;

    /// Associative merge used when stats are reduced over frames in parallel.
    DepthStats merged(const DepthStats& other) const;

    friend bool operator==(const DepthStats&, const DepthStats&) = default;
};

struct NormConfig {
    double alpha = 10.0;  // millimetres
    void validate() const;
};

DepthStats compute_depth_stats(std::span<const DepthFrame> frames);
DepthStats compute_depth_stats(const VideoSequence& seq);

/// Extended min-max normalization. Absent pixels map to exactly 0, valid pixels to
/// (x - (min - alpha)) / (max - (min - alpha)), clamped to [0, 1].
double normalize_depth(std::uint16_t x, const DepthStats& stats, const NormConfig& cfg);
NormalizedFrame normalize_frame(const DepthFrame& frame, const DepthStats& stats, const NormConfig& cfg);

/// Plain x / 65535 scaling with no absent-pixel treatment. Used for the "original data" ablation arm.
NormalizedFrame scale_raw_frame(const DepthFrame& frame);

/// Per-pixel mean over frames counting only nonzero observations, rounded to the nearest millimetre.
/// Pixels with no valid observation stay 0.
DepthFrame extract_background(std::span<const DepthFrame> frames);
DepthFrame extract_background(const VideoSequence& seq);

struct PreprocessOptions {
    NormConfig norm;
    bool enabled = true;          // false -> raw/65535 scaling
    bool stats_from_training_frames = false;
    std::size_t training_frames = 0;  // used when stats_from_training_frames is set
};

struct PreprocessedSequence {
    DepthFrame background_raw;
    DepthStats stats;
    NormalizedFrame background;
    std::vector<NormalizedFrame> frames;
};

/// Background extracted on raw depth, then background and every frame normalized with one shared DepthStats.
PreprocessedSequence preprocess_sequence(const VideoSequence& seq, const PreprocessOptions& opt);

std::string stats_to_json(const DepthStats& stats, const NormConfig& cfg);
std::pair<DepthStats, NormConfig> stats_from_json(const std::string& text);

}  // namespace bgsnetd
