#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bgsnetd/grid.hpp"
#include "bgsnetd/nn/tensor.hpp"

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "bgsnetd")
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    operator const fs::path&() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

template <typename T>
void fill_uniform(bgsnetd::nn::Tensor<T>& t, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    for (T& v : t.data) v = static_cast<T>(d(rng));
}

/// Values uniform in +-[margin, 1]: no element sits within `margin` of a ReLU kink.
inline void fill_away_from_zero(bgsnetd::nn::Tensor<double>& t, std::mt19937_64& rng, double margin = 1e-3)
{
    std::uniform_real_distribution<double> mag(margin, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.data) v = sign(rng) ? mag(rng) : -mag(rng);
}

/// Distinct values: a random permutation of a spaced grid, so max-pool winners are unambiguous
/// under a perturbation of h.
inline void fill_distinct(bgsnetd::nn::Tensor<double>& t, std::mt19937_64& rng, double spacing = 1e-3)
{
    std::vector<double> v(t.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (static_cast<double>(k) - v.size() / 2.0) * spacing;
    std::shuffle(v.begin(), v.end(), rng);
    t.data = v;
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients, whose finite difference is
/// dominated by rounding, from reporting huge relative errors.
inline double rel_error(double analytic, double numeric, double floor = 1e-7)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
    double max_rel = 0;
    std::size_t checked = 0;
    std::size_t worst_index = 0;
};

/// Central differences of `loss` with respect to `values[i]` for each i in `indices`, compared with
/// `analytic[i]`. `values` is perturbed in place and restored.
inline GradCheck check_gradient(std::vector<double>& values, std::span<const double> analytic,
                                const std::function<double()>& loss, std::span<const std::size_t> indices,
                                double h = 1e-5)
{
    GradCheck r;
    for (std::size_t i : indices) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss();
        values[i] = saved - h;
        const double down = loss();
        values[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double e = rel_error(analytic[i], numeric);
        if (e > r.max_rel) {
            r.max_rel = e;
            r.worst_index = i;
        }
        ++r.checked;
    }
    return r;
}

inline std::vector<std::size_t> all_indices(std::size_t n)
{
    std::vector<std::size_t> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = k;
    return v;
}

inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::mt19937_64& rng)
{
    std::vector<std::size_t> v = all_indices(n);
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(std::min(count, n));
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// ---------------------------------------------------------------------------------------------
// Independent oracles, written from the formulas rather than from the library code.

/// x* = (x - (min - alpha)) / (max - (min - alpha)); absent (0) stays 0.
inline double normalization_oracle(std::uint16_t x, std::uint16_t min_valid, std::uint16_t max, double alpha)
{
    if (x == 0) return 0.0;
    const double lo = static_cast<double>(min_valid) - alpha;
    return (static_cast<double>(x) - lo) / (static_cast<double>(max) - lo);
}

/// Per-pixel mean of the nonzero samples, rounded half up; 0 when a pixel is never valid.
inline bgsnetd::DepthFrame background_oracle(const std::vector<bgsnetd::DepthFrame>& frames)
{
    const int w = frames.at(0).width;
    const int h = frames.at(0).height;
    bgsnetd::DepthFrame out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            long double sum = 0;
            long count = 0;
            for (const auto& f : frames) {
                if (f(r, c) != 0) {
                    sum += f(r, c);
                    ++count;
                }
            }
            out(r, c) = count == 0 ? 0 : static_cast<std::uint16_t>(std::floor(sum / count + 0.5L));
        }
    }
    return out;
}

}  // namespace testsupport
