#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rectiwarp::detail {

// Explicit little-endian (de)serialization, independent of host byte order.

inline void put_u32le(std::ostream &os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff),
                           static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff),
                           static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

inline std::uint32_t get_u32le(std::istream &is, const std::string &what) {
    unsigned char bytes[4];
    if (!is.read(reinterpret_cast<char *>(bytes), 4)) {
        throw std::runtime_error(what + ": truncated file");
    }
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f32le(std::ostream &os, float v) {
    put_u32le(os, std::bit_cast<std::uint32_t>(v));
}

inline float get_f32le(std::istream &is, const std::string &what) {
    return std::bit_cast<float>(get_u32le(is, what));
}

} // namespace rectiwarp::detail
