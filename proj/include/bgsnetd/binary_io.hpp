#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "bgsnetd/error.hpp"

namespace bgsnetd {

// Little-endian scalar encoding shared by the dataset and checkpoint formats.

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

private:
    template <typename U>
    void le(U v)
    {
        unsigned char buf[sizeof(U)];
        for (std::size_t k = 0; k < sizeof(U); ++k) {
            buf[k] = static_cast<unsigned char>(v >> (8 * k));
        }
        bytes(buf, sizeof(U));
    }

    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    void bytes(void* p, std::size_t n)
    {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw ParseError(ParseErrorKind::Truncated, "corrupt or truncated file: " + source_);
        }
    }
    std::uint8_t u8()
    {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

    /// True when the stream has no bytes left.
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    template <typename U>
    U le()
    {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U v = 0;
        for (std::size_t k = 0; k < sizeof(U); ++k) {
            v |= static_cast<U>(buf[k]) << (8 * k);
        }
        return v;
    }

    std::istream& in_;
    std::string source_;
};

}  // namespace bgsnetd
