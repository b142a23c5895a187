#include "bgsnetd/patches.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "bgsnetd/binary_io.hpp"

namespace bgsnetd {

void SamplingConfig::validate() const
{
    if (patch_size < 4 || patch_size % 2 != 0) {
        throw ConfigError("patch size must be even and at least 4");
    }
    if (!(fg_fraction >= 0.0 && fg_fraction <= 1.0)) {
        throw ConfigError("fg_fraction must lie in [0, 1]");
    }
    if (stride < 1) {
        throw ConfigError("sampling stride must be at least 1");
    }
    if (max_samples_per_frame == 0) {
        throw ConfigError("max_samples_per_frame must be positive");
    }
}

void extract_patch(const NormalizedFrame& frame, const NormalizedFrame& bg, int row, int col, int patch_size,
                   std::span<float> out)
{
    require_same_shape(frame, bg, "patch frame and background");
    if (row < 0 || row >= frame.height || col < 0 || col >= frame.width) {
        throw DataError("patch centre outside the frame");
    }
    const std::size_t plane = static_cast<std::size_t>(patch_size) * patch_size;
    if (out.size() != 2 * plane) {
        throw DataError("patch buffer has the wrong size");
    }
    const int half = patch_size / 2;
    float* in_dst = out.data();
    float* bg_dst = out.data() + plane;
    for (int dr = 0; dr < patch_size; ++dr) {
        const int r = std::clamp(row - half + dr, 0, frame.height - 1);
        const double* in_row = &frame(r, 0);
        const double* bg_row = &bg(r, 0);
        const int c0 = col - half;
        if (c0 >= 0 && c0 + patch_size <= frame.width) {
            for (int dc = 0; dc < patch_size; ++dc) {
                in_dst[dc] = static_cast<float>(in_row[c0 + dc]);
                bg_dst[dc] = static_cast<float>(bg_row[c0 + dc]);
            }
        } else {
            for (int dc = 0; dc < patch_size; ++dc) {
                const int c = std::clamp(c0 + dc, 0, frame.width - 1);
                in_dst[dc] = static_cast<float>(in_row[c]);
                bg_dst[dc] = static_cast<float>(bg_row[c]);
            }
        }
        in_dst += patch_size;
        bg_dst += patch_size;
    }
}

std::vector<float> extract_patch(const NormalizedFrame& frame, const NormalizedFrame& bg, int row, int col,
                                 int patch_size)
{
    std::vector<float> out(2 * static_cast<std::size_t>(patch_size) * patch_size);
    extract_patch(frame, bg, row, col, patch_size, out);
    return out;
}

std::optional<std::uint8_t> label_from_gt(GtLabel gt) noexcept
{
    switch (gt) {
        case GtLabel::Foreground: return 1;
        case GtLabel::Background:
        case GtLabel::Shadow: return 0;
        case GtLabel::Unknown:
        case GtLabel::OutsideRoi: return std::nullopt;
    }
    return std::nullopt;
}

namespace {

std::vector<PatchOrigin> sample_frame(const VideoSequence& seq, std::size_t f, const SamplingConfig& cfg)
{
    std::vector<PatchOrigin> fg;
    std::vector<PatchOrigin> bg;
    const GtFrame& gt = seq.gt[f];
    for (int r = 0; r < gt.height; r += cfg.stride) {
        for (int c = 0; c < gt.width; c += cfg.stride) {
            if (seq.roi && (*seq.roi)(r, c) == Mask::BG) {
                continue;
            }
            const auto label = label_from_gt(gt(r, c));
            if (!label) {
                continue;
            }
            PatchOrigin o{static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
            (*label ? fg : bg).push_back(o);
        }
    }

    std::seed_seq seeds{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(f)};
    std::mt19937_64 rng(seeds);
    std::shuffle(fg.begin(), fg.end(), rng);
    std::shuffle(bg.begin(), bg.end(), rng);

    const std::size_t budget = std::min(cfg.max_samples_per_frame, fg.size() + bg.size());
    std::size_t want_fg = static_cast<std::size_t>(std::llround(cfg.fg_fraction * static_cast<double>(budget)));
    std::size_t n_fg = std::min(want_fg, fg.size());
    std::size_t n_bg = std::min(budget - n_fg, bg.size());
    // Best effort: whichever class is scarce, the other one fills the remaining budget.
    n_fg = std::min(fg.size(), budget - n_bg);

    std::vector<PatchOrigin> picked(fg.begin(), fg.begin() + static_cast<std::ptrdiff_t>(n_fg));
    picked.insert(picked.end(), bg.begin(), bg.begin() + static_cast<std::ptrdiff_t>(n_bg));
    std::sort(picked.begin(), picked.end(), [](const PatchOrigin& a, const PatchOrigin& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    return picked;
}

}  // namespace

std::vector<PatchSample> generate_training_set(const VideoSequence& seq, const NormalizedFrame& bg,
                                               std::span<const NormalizedFrame> frames, const SamplingConfig& cfg,
                                               std::span<const std::size_t> frame_ids)
{
    cfg.validate();
    if (!seq.has_gt()) {
        throw DataError("sequence '" + seq.name + "' has no ground truth to sample from");
    }
    if (frames.size() != seq.frames.size()) {
        throw DataError("normalized frame count does not match the sequence");
    }
    std::vector<std::size_t> ids(frame_ids.begin(), frame_ids.end());
    if (ids.empty()) {
        ids.resize(seq.frames.size());
        for (std::size_t k = 0; k < ids.size(); ++k) {
            ids[k] = k;
        }
    }
    for (std::size_t f : ids) {
        if (f >= seq.frames.size()) {
            throw DataError("training frame index out of range");
        }
        require_same_shape(frames[f], bg, "normalized frame and background");
    }

    std::vector<std::vector<PatchOrigin>> per_frame(ids.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(ids.size()); ++k) {
        per_frame[k] = sample_frame(seq, ids[k], cfg);
    }

    std::vector<PatchSample> out;
    for (const auto& origins : per_frame) {
        for (const PatchOrigin& o : origins) {
            PatchSample s;
            s.origin = o;
            s.label = *label_from_gt(seq.gt[o.frame](static_cast<int>(o.row), static_cast<int>(o.col)));
            s.data = extract_patch(frames[o.frame], bg, static_cast<int>(o.row), static_cast<int>(o.col),
                                   cfg.patch_size);
            out.push_back(std::move(s));
        }
    }
    if (out.empty()) {
        throw DataError("empty dataset: no labelled pixels in the selected frames");
    }
    return out;
}

void save_dataset(const PatchDataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const std::size_t plane = 2 * static_cast<std::size_t>(ds.patch_size) * ds.patch_size;
    BinaryWriter w(out);
    w.bytes("BGSD", 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.patch_size));
    w.u64(ds.samples.size());
    for (const PatchSample& s : ds.samples) {
        if (s.data.size() != plane) {
            throw DataError("patch sample has the wrong size for the dataset patch size");
        }
        w.u8(s.label);
        w.u32(s.origin.frame);
        w.u32(s.origin.row);
        w.u32(s.origin.col);
        for (float v : s.data) {
            w.f32(v);
        }
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

PatchDataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    BinaryReader r(in, path.string());
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "BGSD", 4) != 0) {
        throw ParseError(ParseErrorKind::BadMagic, "not a patch dataset (bad magic): " + path.string());
    }
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw ParseError(ParseErrorKind::BadVersion, "unsupported dataset version " + std::to_string(version));
    }
    PatchDataset ds;
    ds.patch_size = static_cast<int>(r.u32());
    const std::uint64_t count = r.u64();
    const std::size_t plane = 2 * static_cast<std::size_t>(ds.patch_size) * ds.patch_size;
    ds.samples.resize(count);
    for (PatchSample& s : ds.samples) {
        s.label = r.u8();
        s.origin.frame = r.u32();
        s.origin.row = r.u32();
        s.origin.col = r.u32();
        s.data.resize(plane);
        for (float& v : s.data) {
            v = r.f32();
        }
    }
    return ds;
}

}  // namespace bgsnetd
