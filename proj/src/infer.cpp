#include "bgsnetd/infer.hpp"

#include <algorithm>
#include <cmath>

#include "bgsnetd/patches.hpp"

namespace bgsnetd {

void InferConfig::validate() const
{
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("threshold must lie strictly between 0 and 1");
    }
    if (pixel_batch == 0) {
        throw ConfigError("pixel_batch must be positive");
    }
}

MaskFrame threshold_map(const ProbabilityMap& prob, double threshold)
{
    MaskFrame mask(prob.width, prob.height);
    std::transform(prob.data.begin(), prob.data.end(), mask.data.begin(),
                   [threshold](double p) { return p >= threshold ? Mask::FG : Mask::BG; });
    return mask;
}

template <typename T>
Prediction predict_frame(const nn::Model<T>& model, const NormalizedFrame& frame, const NormalizedFrame& bg,
                         const InferConfig& cfg)
{
    cfg.validate();
    require_same_shape(frame, bg, "prediction frame and background");
    const nn::ModelSpec& spec = model.spec();
    if (spec.in_channels != 2) {
        throw DataError("prediction needs a 2-channel model");
    }
    const int t = spec.patch_size;
    const std::size_t plane = 2 * static_cast<std::size_t>(t) * t;

    std::vector<std::size_t> pixels;
    for (int r = 0; r < frame.height; ++r) {
        for (int c = 0; c < frame.width; ++c) {
            if (!cfg.fast_stride2 || (r % 2 == 0 && c % 2 == 0)) {
                pixels.push_back(static_cast<std::size_t>(r) * frame.width + c);
            }
        }
    }

    Prediction out;
    out.probability = ProbabilityMap(frame.width, frame.height);
    for (std::size_t begin = 0; begin < pixels.size(); begin += cfg.pixel_batch) {
        const std::size_t end = std::min(pixels.size(), begin + cfg.pixel_batch);
        const std::size_t n = end - begin;
        nn::Tensor<T> x({n, 2, static_cast<std::size_t>(t), static_cast<std::size_t>(t)});
#pragma omp parallel
        {
            std::vector<float> patch(plane);
#pragma omp for schedule(static)
            for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n); ++b) {
                const std::size_t p = pixels[begin + b];
                extract_patch(frame, bg, static_cast<int>(p / frame.width), static_cast<int>(p % frame.width), t,
                              patch);
                std::copy(patch.begin(), patch.end(), x.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
            }
        }
        const nn::Tensor<T> probs = nn::model_predict(model, x);
        for (std::size_t b = 0; b < n; ++b) {
            out.probability.data[pixels[begin + b]] = static_cast<double>(probs[b]);
        }
        out.evaluations += n;
    }
    if (cfg.fast_stride2) {
        for (int r = 0; r < frame.height; ++r) {
            for (int c = 0; c < frame.width; ++c) {
                out.probability(r, c) = out.probability(r & ~1, c & ~1);
            }
        }
    }
    out.mask = threshold_map(out.probability, cfg.threshold);
    return out;
}

MaskFrame predict_baseline_avg(const NormalizedFrame& frame, const NormalizedFrame& bg, double tau)
{
    require_same_shape(frame, bg, "baseline frame and background");
    MaskFrame mask(frame.width, frame.height);
    for (std::size_t k = 0; k < frame.size(); ++k) {
        const double a = frame.data[k];
        const double b = bg.data[k];
        mask.data[k] = (a != 0.0 && b != 0.0 && std::abs(a - b) > tau) ? Mask::FG : Mask::BG;
    }
    return mask;
}

DepthFrame probability_to_u16(const ProbabilityMap& prob)
{
    DepthFrame out(prob.width, prob.height);
    std::transform(prob.data.begin(), prob.data.end(), out.data.begin(), [](double p) {
        return static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
    });
    return out;
}

template Prediction predict_frame<float>(const nn::Model<float>&, const NormalizedFrame&, const NormalizedFrame&,
                                         const InferConfig&);
template Prediction predict_frame<double>(const nn::Model<double>&, const NormalizedFrame&, const NormalizedFrame&,
                                          const InferConfig&);

}  // namespace bgsnetd
