#include "rectiwarp/flow_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace rectiwarp {

namespace {
constexpr char kMagic[4] = {'P', 'I', 'E', 'H'};
}

FlowField read_flow(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("read_flow: cannot open '" + path + "'");
    }
    char magic[4];
    if (!is.read(magic, 4) || magic[0] != kMagic[0] || magic[1] != kMagic[1] ||
        magic[2] != kMagic[2] || magic[3] != kMagic[3]) {
        throw std::runtime_error("read_flow: bad magic in '" + path + "'");
    }
    const std::uint32_t w = detail::get_u32le(is, "read_flow");
    const std::uint32_t h = detail::get_u32le(is, "read_flow");
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
        throw std::runtime_error("read_flow: implausible dimensions in '" + path + "'");
    }
    FlowField flow(static_cast<int>(w), static_cast<int>(h));
    for (Point2 &v : flow.vectors) {
        v.x = detail::get_f32le(is, "read_flow");
        v.y = detail::get_f32le(is, "read_flow");
        if (!v.finite()) {
            throw std::runtime_error("read_flow: non-finite vector in '" + path + "'");
        }
    }
    return flow;
}

void write_flow(const FlowField &flow, const std::string &path) {
    if (flow.width <= 0 || flow.height <= 0) {
        throw std::invalid_argument("write_flow: empty flow");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw std::runtime_error("write_flow: cannot open '" + path + "'");
    }
    os.write(kMagic, 4);
    detail::put_u32le(os, static_cast<std::uint32_t>(flow.width));
    detail::put_u32le(os, static_cast<std::uint32_t>(flow.height));
    for (const Point2 &v : flow.vectors) {
        detail::put_f32le(os, static_cast<float>(v.x));
        detail::put_f32le(os, static_cast<float>(v.y));
    }
    if (!os.flush()) {
        throw std::runtime_error("write_flow: write failed for '" + path + "'");
    }
}

} // namespace rectiwarp
