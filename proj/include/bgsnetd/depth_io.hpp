#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bgsnetd/grid.hpp"

namespace bgsnetd {

struct VideoSequence {
    std::string name;
    std::vector<DepthFrame> frames;
    std::vector<GtFrame> gt;     // empty, or one per frame
    std::optional<MaskFrame> roi;  // FG = inside the region of interest

    int width() const { return frames.empty() ? 0 : frames.front().width; }
    int height() const { return frames.empty() ? 0 : frames.front().height; }
    bool has_gt() const { return !gt.empty(); }

    /// Throws DataError unless all frames, gt and roi share one shape and |gt| is 0 or |frames|.
    void validate() const;
};

// Ground-truth byte codes (CDnet / SBM-RGBD convention).
inline constexpr std::uint8_t kCodeBackground = 0;
inline constexpr std::uint8_t kCodeShadow = 50;
inline constexpr std::uint8_t kCodeOutsideRoi = 85;
inline constexpr std::uint8_t kCodeUnknown = 170;
inline constexpr std::uint8_t kCodeForeground = 255;

std::optional<GtLabel> decode_gt(std::uint8_t code) noexcept;
std::uint8_t encode_gt(GtLabel label) noexcept;

DepthFrame load_depth_frame(const std::filesystem::path& path);
void save_depth_frame(const DepthFrame& frame, const std::filesystem::path& path);

GtFrame load_groundtruth(const std::filesystem::path& path);
void save_groundtruth(const GtFrame& gt, const std::filesystem::path& path);

MaskFrame load_mask(const std::filesystem::path& path);
void save_mask(const MaskFrame& mask, const std::filesystem::path& path);

/// Raw 8-bit grey image (P5, maxval 255).
Grid<std::uint8_t> load_gray8(const std::filesystem::path& path);
void save_gray8(const Grid<std::uint8_t>& img, const std::filesystem::path& path);

/// Layout: `dir/depth/NNNNNN.pgm`, optional `dir/gt/NNNNNN.pgm`, optional `dir/ROI.pgm`.
VideoSequence load_sequence(const std::filesystem::path& dir);
void save_sequence(const VideoSequence& seq, const std::filesystem::path& dir);

/// Zero-padded six digit frame file name, e.g. 12 -> "000012.pgm".
std::string frame_file_name(std::size_t index);

}  // namespace bgsnetd
