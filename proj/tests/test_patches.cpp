#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "bgsnetd/patches.hpp"
#include "support.hpp"

using namespace bgsnetd;
using testsupport::TempDir;

namespace {

NormalizedFrame ramp(int w, int h, double offset = 0.0)
{
    NormalizedFrame f(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f(r, c) = offset + r * 1000.0 + c;
    }
    return f;
}

// Scene with a foreground block at rows/cols [4, 8) on every frame, plus an Unknown ring.
VideoSequence labelled_scene(int frames, int w = 16, int h = 12)
{
    VideoSequence seq;
    for (int f = 0; f < frames; ++f) {
        seq.frames.emplace_back(w, h, std::uint16_t{1000});
        GtFrame gt(w, h, GtLabel::Background);
        for (int r = 3; r < 9; ++r) {
            for (int c = 3; c < 9; ++c) {
                const bool inner = r >= 4 && r < 8 && c >= 4 && c < 8;
                gt(r, c) = inner ? GtLabel::Foreground : GtLabel::Unknown;
            }
        }
        gt(0, 0) = GtLabel::Shadow;
        gt(h - 1, w - 1) = GtLabel::OutsideRoi;
        seq.gt.push_back(gt);
    }
    return seq;
}

std::vector<NormalizedFrame> normalized_frames(const VideoSequence& seq)
{
    std::vector<NormalizedFrame> out;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) out.push_back(ramp(seq.width(), seq.height(), 0.5 * f));
    return out;
}

}  // namespace

TEST(ExtractPatch, InteriorIsDirectCopy)
{
    const NormalizedFrame f = ramp(64, 64);
    const NormalizedFrame bg = ramp(64, 64, 0.25);
    const int t = 40;
    const std::vector<float> p = extract_patch(f, bg, 32, 30, t);
    ASSERT_EQ(p.size(), 2u * t * t);
    for (int dr = 0; dr < t; ++dr) {
        for (int dc = 0; dc < t; ++dc) {
            EXPECT_EQ(p[dr * t + dc], static_cast<float>(f(32 - 20 + dr, 30 - 20 + dc)));
            EXPECT_EQ(p[t * t + dr * t + dc], static_cast<float>(bg(32 - 20 + dr, 30 - 20 + dc)));
        }
    }
}

TEST(ExtractPatch, CentreSitsAtHalfPatch)
{
    const NormalizedFrame f = ramp(64, 64);
    const int t = 40;
    for (auto [r, c] : {std::pair{0, 0}, std::pair{63, 63}, std::pair{17, 45}}) {
        const std::vector<float> p = extract_patch(f, f, r, c, t);
        EXPECT_EQ(p[(t / 2) * t + t / 2], static_cast<float>(f(r, c)));
    }
}

TEST(ExtractPatch, CornerReplicatesEdges)
{
    const NormalizedFrame f = ramp(64, 64);
    const int t = 40;
    const std::vector<float> p = extract_patch(f, f, 0, 0, t);
    for (int dr = 0; dr < t; ++dr) {
        for (int dc = 0; dc < t; ++dc) {
            const int r = std::max(0, dr - 20);
            const int c = std::max(0, dc - 20);
            EXPECT_EQ(p[dr * t + dc], static_cast<float>(f(r, c))) << dr << "," << dc;
        }
    }
}

TEST(ExtractPatch, ConstantFrameGivesConstantPatch)
{
    const NormalizedFrame f(9, 7, 0.375);
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 9; ++c) {
            const std::vector<float> p = extract_patch(f, f, r, c, 8);
            EXPECT_TRUE(std::all_of(p.begin(), p.end(), [](float v) { return v == 0.375f; }));
        }
    }
}

TEST(ExtractPatch, Errors)
{
    const NormalizedFrame f(8, 8, 0.5);
    const NormalizedFrame g(8, 9, 0.5);
    EXPECT_THROW(extract_patch(f, g, 1, 1, 4), DataError);
    EXPECT_THROW(extract_patch(f, f, 8, 0, 4), DataError);
    std::vector<float> small(5);
    EXPECT_THROW(extract_patch(f, f, 0, 0, 4, small), DataError);
}

TEST(Labels, CodeToTarget)
{
    EXPECT_EQ(label_from_gt(GtLabel::Foreground), std::optional<std::uint8_t>(1));
    EXPECT_EQ(label_from_gt(GtLabel::Background), std::optional<std::uint8_t>(0));
    EXPECT_EQ(label_from_gt(GtLabel::Shadow), std::optional<std::uint8_t>(0));
    EXPECT_FALSE(label_from_gt(GtLabel::Unknown).has_value());
    EXPECT_FALSE(label_from_gt(GtLabel::OutsideRoi).has_value());
}

TEST(TrainingSet, LabelsFollowGroundTruthAndSkipExclusions)
{
    const VideoSequence seq = labelled_scene(3);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 1000;
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    // All labelled pixels: 16*12 minus the 6x6 block's 20 Unknown ring pixels minus one OutsideRoi.
    EXPECT_EQ(samples.size(), 3u * (16 * 12 - 20 - 1));
    for (const PatchSample& s : samples) {
        const GtLabel g = seq.gt[s.origin.frame](s.origin.row, s.origin.col);
        ASSERT_TRUE(label_from_gt(g).has_value());
        EXPECT_EQ(s.label, *label_from_gt(g));
        EXPECT_EQ(s.data, extract_patch(frames[s.origin.frame], frames[0], s.origin.row, s.origin.col, 8));
    }
}

TEST(TrainingSet, BalancesClassesWithinBudget)
{
    const VideoSequence seq = labelled_scene(2);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 20;
    cfg.fg_fraction = 0.5;
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    ASSERT_EQ(samples.size(), 40u);
    EXPECT_EQ(std::count_if(samples.begin(), samples.end(), [](const PatchSample& s) { return s.label == 1; }), 20);
}

TEST(TrainingSet, ScarceClassIsFilledByTheOther)
{
    const VideoSequence seq = labelled_scene(1);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 60;
    cfg.fg_fraction = 0.5;  // only 16 foreground pixels exist
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    ASSERT_EQ(samples.size(), 60u);
    EXPECT_EQ(std::count_if(samples.begin(), samples.end(), [](const PatchSample& s) { return s.label == 1; }), 16);
}

TEST(TrainingSet, AllBackgroundIsBestEffort)
{
    VideoSequence seq = labelled_scene(1);
    std::fill(seq.gt[0].data.begin(), seq.gt[0].data.end(), GtLabel::Background);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 30;
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    EXPECT_EQ(samples.size(), 30u);
    EXPECT_TRUE(std::all_of(samples.begin(), samples.end(), [](const PatchSample& s) { return s.label == 0; }));
}

TEST(TrainingSet, UnknownOnlyFrameContributesNothing)
{
    VideoSequence seq = labelled_scene(2);
    std::fill(seq.gt[1].data.begin(), seq.gt[1].data.end(), GtLabel::Unknown);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    EXPECT_FALSE(samples.empty());
    EXPECT_TRUE(std::all_of(samples.begin(), samples.end(), [](const PatchSample& s) { return s.origin.frame == 0; }));

    const std::vector<std::size_t> only_unknown{1};
    EXPECT_THROW(generate_training_set(seq, frames[0], frames, cfg, only_unknown), DataError);
}

TEST(TrainingSet, RoiExcludesPixels)
{
    VideoSequence seq = labelled_scene(1);
    seq.roi = MaskFrame(16, 12, Mask::BG);
    for (int r = 0; r < 12; ++r) (*seq.roi)(r, 5) = Mask::FG;
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 1000;
    const auto samples = generate_training_set(seq, frames[0], frames, cfg);
    EXPECT_FALSE(samples.empty());
    for (const PatchSample& s : samples) EXPECT_EQ(s.origin.col, 5u);
}

TEST(TrainingSet, DeterministicForFixedSeed)
{
    const VideoSequence seq = labelled_scene(4);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.max_samples_per_frame = 10;
    const auto a = generate_training_set(seq, frames[0], frames, cfg);
    const auto b = generate_training_set(seq, frames[0], frames, cfg);
    EXPECT_EQ(a, b);
    cfg.seed = 2;
    const auto c = generate_training_set(seq, frames[0], frames, cfg);
    EXPECT_NE(a, c);
}

TEST(TrainingSet, FrameSubsetAndStride)
{
    const VideoSequence seq = labelled_scene(4);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    cfg.stride = 2;
    cfg.max_samples_per_frame = 1000;
    const std::vector<std::size_t> ids{1, 3};
    const auto samples = generate_training_set(seq, frames[0], frames, cfg, ids);
    for (const PatchSample& s : samples) {
        EXPECT_TRUE(s.origin.frame == 1 || s.origin.frame == 3);
        EXPECT_EQ(s.origin.row % 2, 0u);
        EXPECT_EQ(s.origin.col % 2, 0u);
    }
}

TEST(SamplingConfig, Validation)
{
    SamplingConfig c;
    c.patch_size = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.fg_fraction = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.stride = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DatasetFile, RoundTrip)
{
    TempDir dir;
    const VideoSequence seq = labelled_scene(2);
    const auto frames = normalized_frames(seq);
    SamplingConfig cfg;
    cfg.patch_size = 8;
    PatchDataset ds{8, generate_training_set(seq, frames[0], frames, cfg)};
    save_dataset(ds, dir / "d.bgsd");
    const PatchDataset back = load_dataset(dir / "d.bgsd");
    EXPECT_EQ(back.patch_size, 8);
    EXPECT_EQ(back.samples, ds.samples);
}

TEST(DatasetFile, CorruptionDetected)
{
    TempDir dir;
    PatchDataset ds{4, {PatchSample{std::vector<float>(32, 0.5f), 1, {0, 1, 2}}}};
    save_dataset(ds, dir / "d.bgsd");
    const auto size = std::filesystem::file_size(dir / "d.bgsd");
    std::filesystem::resize_file(dir / "d.bgsd", size - 3);
    try {
        load_dataset(dir / "d.bgsd");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseErrorKind::Truncated);
    }
    {
        std::ofstream out(dir / "x.bgsd", std::ios::binary);
        out << "NOPE";
    }
    try {
        load_dataset(dir / "x.bgsd");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseErrorKind::BadMagic);
    }
}
