#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "bgsnetd/error.hpp"

namespace bgsnetd::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s)
{
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        out += (k ? "x" : "") + std::to_string(s[k]);
    }
    return out;
}

/// Dense row-major tensor. Invariant: data.size() == product of shape extents.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values))
    {
        if (data.size() != shape_size(shape)) {
            throw DataError("tensor data length does not match shape " + shape_string(shape));
        }
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim(std::size_t k) const { return shape.at(k); }
    std::size_t rank() const noexcept { return shape.size(); }
    T* ptr() noexcept { return data.data(); }
    const T* ptr() const noexcept { return data.data(); }
    T& operator[](std::size_t k) noexcept { return data[k]; }
    const T& operator[](std::size_t k) const noexcept { return data[k]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what)
{
    if (t.shape != expected) {
        throw DataError(std::string("shape mismatch for ") + what + ": got " + shape_string(t.shape) + ", expected " +
                        shape_string(expected));
    }
}

}  // namespace bgsnetd::nn
