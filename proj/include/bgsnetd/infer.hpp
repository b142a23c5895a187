#pragma once

#include <cstddef>
#include <cstdint>

#include "bgsnetd/grid.hpp"
#include "bgsnetd/nn/model.hpp"

namespace bgsnetd {

using ProbabilityMap = Grid<double>;

struct InferConfig {
    double threshold = 0.5;
    std::size_t pixel_batch = 256;
    bool fast_stride2 = false;  // score even rows/cols only and copy to the 2x2 neighbourhood

    void validate() const;
};

struct Prediction {
    ProbabilityMap probability;
    MaskFrame mask;
    std::size_t evaluations = 0;  // number of patches scored
};

/// Scores the 2-channel patch around every pixel with the eval-mode model.
template <typename T>
Prediction predict_frame(const nn::Model<T>& model, const NormalizedFrame& frame, const NormalizedFrame& bg,
                         const InferConfig& cfg);

/// FG exactly where probability >= threshold.
MaskFrame threshold_map(const ProbabilityMap& prob, double threshold);

/// Frame-differencing baseline: FG where both pixels are valid (nonzero) and |frame - bg| > tau.
MaskFrame predict_baseline_avg(const NormalizedFrame& frame, const NormalizedFrame& bg, double tau);

/// probability * 65535, rounded, for inspection as a 16-bit PGM.
DepthFrame probability_to_u16(const ProbabilityMap& prob);

}  // namespace bgsnetd
