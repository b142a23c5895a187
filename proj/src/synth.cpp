#include "bgsnetd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bgsnetd {

void SynthConfig::validate() const
{
    if (width < 1 || height < 1 || frame_count < 1) {
        throw ConfigError("synthetic scene needs positive width, height and frame count");
    }
    if (object_size_px < 1 || object_size_px > width || object_size_px > height) {
        throw ConfigError("object does not fit inside the frame");
    }
    if (object_row && (*object_row < 0 || *object_row + object_size_px > height)) {
        throw ConfigError("object row places the object outside the frame");
    }
    if (!(absent_rate >= 0.0 && absent_rate < 1.0)) {
        throw ConfigError("absent_rate must lie in [0, 1)");
    }
    if (bg_depth_mm == 0 || object_depth_mm == 0) {
        throw ConfigError("background and object depths must be nonzero");
    }
    if (far_rect && far_depth_mm == 0) {
        throw ConfigError("far_rect needs a nonzero far_depth_mm");
    }
    if (edge_noise_px < 0 || depth_noise_mm < 0.0) {
        throw ConfigError("noise parameters must be non-negative");
    }
}

namespace {

int wrap(int v, int n)
{
    const int m = v % n;
    return m < 0 ? m + n : m;
}

}  // namespace

VideoSequence generate(const SynthConfig& cfg)
{
    cfg.validate();
    VideoSequence seq;
    seq.name = "synthetic";
    seq.frames.resize(static_cast<std::size_t>(cfg.frame_count));
    seq.gt.resize(static_cast<std::size_t>(cfg.frame_count));
    const int size = cfg.object_size_px;
    const int top = cfg.object_row.value_or((cfg.height - size) / 2);

#pragma omp parallel for schedule(static)
    for (int f = 0; f < cfg.frame_count; ++f) {
        std::seed_seq seeds{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                            static_cast<std::uint32_t>(f)};
        std::mt19937_64 rng(seeds);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> jitter(-cfg.edge_noise_px, cfg.edge_noise_px);
        std::normal_distribution<double> noise(0.0, cfg.depth_noise_mm > 0 ? cfg.depth_noise_mm : 1.0);

        const int left = static_cast<int>(std::floor(cfg.velocity_px_per_frame * f));
        auto in_object = [&](int r, int c) {
            return r >= top && r < top + size && wrap(c - left, cfg.width) < size;
        };

        // Per-row / per-column outline jitter of the rendered object.
        std::vector<int> row_shift(static_cast<std::size_t>(cfg.height), 0);
        std::vector<int> col_shift(static_cast<std::size_t>(cfg.width), 0);
        if (cfg.edge_noise_px > 0) {
            for (int& v : row_shift) v = jitter(rng);
            for (int& v : col_shift) v = jitter(rng);
        }

        DepthFrame depth(cfg.width, cfg.height);
        GtFrame gt(cfg.width, cfg.height, GtLabel::Background);
        for (int r = 0; r < cfg.height; ++r) {
            for (int c = 0; c < cfg.width; ++c) {
                if (in_object(r, c)) {
                    gt(r, c) = GtLabel::Foreground;
                } else {
                    bool ring = false;
                    for (int dr = -1; dr <= 1 && !ring; ++dr) {
                        for (int dc = -1; dc <= 1 && !ring; ++dc) {
                            const int rr = r + dr;
                            if (rr >= 0 && rr < cfg.height && in_object(rr, wrap(c + dc, cfg.width))) {
                                ring = true;
                            }
                        }
                    }
                    if (ring) {
                        gt(r, c) = GtLabel::Unknown;
                    }
                }

                const bool rendered_object =
                    in_object(std::clamp(r + col_shift[c], 0, cfg.height - 1), wrap(c + row_shift[r], cfg.width));
                double d;
                if (rendered_object) {
                    d = cfg.object_depth_mm;
                } else if (cfg.out_of_range_rect && cfg.out_of_range_rect->contains(r, c)) {
                    d = 0;
                } else if (cfg.far_rect && cfg.far_rect->contains(r, c)) {
                    d = cfg.far_depth_mm;
                } else {
                    d = cfg.bg_depth_mm;
                }
                if (d > 0 && cfg.depth_noise_mm > 0) {
                    d = std::clamp(std::round(d + noise(rng)), 1.0, 65535.0);
                }
                if (d > 0 && cfg.absent_rate > 0 && unit(rng) < cfg.absent_rate) {
                    d = 0;
                }
                depth(r, c) = static_cast<std::uint16_t>(d);
            }
        }
        seq.frames[f] = std::move(depth);
        seq.gt[f] = std::move(gt);
    }
    return seq;
}

SynthConfig default_synth_config()
{
    return SynthConfig{};
}

SynthConfig camouflage_config()
{
    SynthConfig cfg;
    cfg.width = 48;
    cfg.height = 48;
    cfg.frame_count = 60;
    cfg.bg_depth_mm = 2000;
    cfg.object_depth_mm = 1940;
    cfg.object_size_px = 12;
    cfg.object_row = 24;
    cfg.velocity_px_per_frame = 1.0;
    cfg.absent_rate = 0.02;
    cfg.depth_noise_mm = 8.0;
    cfg.far_rect = Rect{0, 0, 8, 48};
    cfg.far_depth_mm = 6000;
    cfg.seed = 7;
    return cfg;
}

SynthConfig wide_range_config()
{
    SynthConfig cfg;
    cfg.width = 48;
    cfg.height = 48;
    cfg.frame_count = 60;
    cfg.bg_depth_mm = 1500;
    cfg.object_depth_mm = 1200;
    cfg.object_size_px = 12;
    cfg.object_row = 24;
    cfg.velocity_px_per_frame = 1.0;
    cfg.absent_rate = 0.08;
    cfg.depth_noise_mm = 10.0;
    cfg.far_rect = Rect{0, 0, 10, 48};
    cfg.far_depth_mm = 9000;
    cfg.seed = 11;
    return cfg;
}

}  // namespace bgsnetd
