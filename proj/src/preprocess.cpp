#include "bgsnetd/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace bgsnetd {

DepthStats DepthStats::merged(const DepthStats& other) const
{
    DepthStats out;
    if (min_valid == 0) {
        out.min_valid = other.min_valid;
    } else if (other.min_valid == 0) {
        out.min_valid = min_valid;
    } else {
        out.min_valid = std::min(min_valid, other.min_valid);
    }
    out.max = std::max(max, other.max);
    return out;
}

void NormConfig::validate() const
{
    if (!(alpha > 0.0)) {
        throw ConfigError("alpha must be positive");
    }
}

DepthStats compute_depth_stats(std::span<const DepthFrame> frames)
{
    DepthStats total;
#pragma omp parallel
    {
        DepthStats local;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(frames.size()); ++f) {
            std::uint16_t lo = std::numeric_limits<std::uint16_t>::max();
            std::uint16_t hi = 0;
            bool any = false;
            for (std::uint16_t v : frames[f].data) {
                hi = std::max(hi, v);
                if (v != 0) {
                    lo = std::min(lo, v);
                    any = true;
                }
            }
            local = local.merged(DepthStats{any ? lo : std::uint16_t{0}, hi});
        }
#pragma omp critical
        total = total.merged(local);
    }
    if (total.min_valid == 0) {
        throw DataError("no valid depth: every pixel of the sequence is absent");
    }
    return total;
}

DepthStats compute_depth_stats(const VideoSequence& seq)
{
    return compute_depth_stats(std::span<const DepthFrame>(seq.frames));
}

double normalize_depth(std::uint16_t x, const DepthStats& stats, const NormConfig& cfg)
{
    if (x == 0) {
        return 0.0;
    }
    const double lo = static_cast<double>(stats.min_valid) - cfg.alpha;
    const double v = (static_cast<double>(x) - lo) / (static_cast<double>(stats.max) - lo);
    return std::clamp(v, 0.0, 1.0);
}

NormalizedFrame normalize_frame(const DepthFrame& frame, const DepthStats& stats, const NormConfig& cfg)
{
    cfg.validate();
    if (stats.min_valid == 0 || stats.min_valid > stats.max) {
        throw DataError("degenerate depth stats");
    }
    NormalizedFrame out(frame.width, frame.height);
    for (std::size_t k = 0; k < frame.size(); ++k) {
        out.data[k] = normalize_depth(frame.data[k], stats, cfg);
    }
    return out;
}

NormalizedFrame scale_raw_frame(const DepthFrame& frame)
{
    NormalizedFrame out(frame.width, frame.height);
    std::transform(frame.data.begin(), frame.data.end(), out.data.begin(),
                   [](std::uint16_t v) { return static_cast<double>(v) / 65535.0; });
    return out;
}

DepthFrame extract_background(std::span<const DepthFrame> frames)
{
    if (frames.empty()) {
        throw DataError("cannot extract a background from an empty sequence");
    }
    const DepthFrame& first = frames.front();
    for (const DepthFrame& f : frames) {
        require_same_shape(f, first, "background frames differ in size");
    }
    DepthFrame bg(first.width, first.height);
    const auto n = static_cast<std::ptrdiff_t>(bg.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        std::uint64_t sum = 0;
        std::uint64_t count = 0;
        for (const DepthFrame& f : frames) {
            const std::uint16_t v = f.data[k];
            sum += v;
            count += v != 0;
        }
        // Integer round-half-up of sum / count.
        bg.data[k] = count == 0 ? 0 : static_cast<std::uint16_t>((2 * sum + count) / (2 * count));
    }
    return bg;
}

DepthFrame extract_background(const VideoSequence& seq)
{
    return extract_background(std::span<const DepthFrame>(seq.frames));
}

PreprocessedSequence preprocess_sequence(const VideoSequence& seq, const PreprocessOptions& opt)
{
    seq.validate();
    opt.norm.validate();
    PreprocessedSequence out;
    out.background_raw = extract_background(seq);

    std::span<const DepthFrame> stat_frames(seq.frames);
    if (opt.stats_from_training_frames) {
        if (opt.training_frames == 0 || opt.training_frames > seq.frames.size()) {
            throw ConfigError("training frame count out of range for stats");
        }
        stat_frames = stat_frames.first(opt.training_frames);
    }
    out.stats = compute_depth_stats(stat_frames);

    auto convert = [&](const DepthFrame& f) {
        return opt.enabled ? normalize_frame(f, out.stats, opt.norm) : scale_raw_frame(f);
    };
    out.background = convert(out.background_raw);
    out.frames.resize(seq.frames.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(seq.frames.size()); ++k) {
        out.frames[k] = convert(seq.frames[k]);
    }
    return out;
}

std::string stats_to_json(const DepthStats& stats, const NormConfig& cfg)
{
    nlohmann::json j{{"min_valid", stats.min_valid}, {"max", stats.max}, {"alpha", cfg.alpha}};
    return j.dump(2) + "\n";
}

std::pair<DepthStats, NormConfig> stats_from_json(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        DepthStats s{j.at("min_valid").get<std::uint16_t>(), j.at("max").get<std::uint16_t>()};
        NormConfig cfg{j.at("alpha").get<double>()};
        if (s.min_valid == 0 || s.min_valid > s.max) {
            throw DataError("stats document violates 0 < min_valid <= max");
        }
        return {s, cfg};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ParseErrorKind::MalformedHeader, std::string("bad stats JSON: ") + e.what());
    }
}

}  // namespace bgsnetd
