#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bgsnetd/error.hpp"

namespace bgsnetd {

/// Row-major 2-D image. `data.size() == width * height` always.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
    Grid(int w, int h, std::vector<T> values) : width(w), height(h), data(std::move(values))
    {
        if (data.size() != static_cast<std::size_t>(w) * h) {
            throw DataError("grid data length does not match width*height");
        }
    }

    std::size_t size() const noexcept { return data.size(); }
    T& operator()(int row, int col) noexcept { return data[static_cast<std::size_t>(row) * width + col]; }
    const T& operator()(int row, int col) const noexcept { return data[static_cast<std::size_t>(row) * width + col]; }

    bool same_shape(const auto& other) const noexcept { return width == other.width && height == other.height; }

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Millimetre distances; 0 means the sensor returned no measurement.
using DepthFrame = Grid<std::uint16_t>;

/// Normalized depth in [0,1]; 0 is reserved for absent pixels.
using NormalizedFrame = Grid<double>;

enum class Mask : std::uint8_t { BG = 0, FG = 1 };
using MaskFrame = Grid<Mask>;

enum class GtLabel : std::uint8_t { Background, Shadow, OutsideRoi, Unknown, Foreground };
using GtFrame = Grid<GtLabel>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw DataError(std::string("dimension mismatch: ") + what);
    }
}

}  // namespace bgsnetd
