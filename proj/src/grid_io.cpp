#include "rectiwarp/grid_io.hpp"

#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace rectiwarp {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'S', 'G'};
constexpr std::uint32_t kKindControl = 0;
constexpr std::uint32_t kKindSampling = 1;

void write_grid(const std::string &path, std::uint32_t kind, std::uint32_t d0,
                std::uint32_t d1, const std::vector<Point2> &points) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw std::runtime_error("write grid: cannot open '" + path + "'");
    }
    os.write(kMagic, 4);
    detail::put_u32le(os, kind);
    detail::put_u32le(os, d0);
    detail::put_u32le(os, d1);
    for (const Point2 &p : points) {
        detail::put_f32le(os, static_cast<float>(p.x));
        detail::put_f32le(os, static_cast<float>(p.y));
    }
    if (!os.flush()) {
        throw std::runtime_error("write grid: write failed for '" + path + "'");
    }
}

struct RawGrid {
    std::uint32_t d0 = 0;
    std::uint32_t d1 = 0;
    std::vector<Point2> points;
};

RawGrid read_grid(const std::string &path, std::uint32_t expected_kind) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("read grid: cannot open '" + path + "'");
    }
    char magic[4];
    if (!is.read(magic, 4) || magic[0] != kMagic[0] || magic[1] != kMagic[1] ||
        magic[2] != kMagic[2] || magic[3] != kMagic[3]) {
        throw std::runtime_error("read grid: bad magic in '" + path + "'");
    }
    const std::uint32_t kind = detail::get_u32le(is, "read grid");
    if (kind != expected_kind) {
        throw std::runtime_error("read grid: unexpected grid kind in '" + path + "'");
    }
    RawGrid g;
    g.d0 = detail::get_u32le(is, "read grid");
    g.d1 = detail::get_u32le(is, "read grid");
    if (g.d0 == 0 || g.d1 == 0 || g.d0 > (1u << 20) || g.d1 > (1u << 20)) {
        throw std::runtime_error("read grid: implausible dimensions in '" + path + "'");
    }
    g.points.resize(static_cast<std::size_t>(g.d0) * g.d1);
    for (Point2 &p : g.points) {
        p.x = detail::get_f32le(is, "read grid");
        p.y = detail::get_f32le(is, "read grid");
    }
    return g;
}

} // namespace

ControlGrid read_control_grid(const std::string &path) {
    RawGrid g = read_grid(path, kKindControl);
    return ControlGrid(static_cast<int>(g.d0), static_cast<int>(g.d1),
                       std::move(g.points));
}

void write_control_grid(const ControlGrid &grid, const std::string &path) {
    write_grid(path, kKindControl, static_cast<std::uint32_t>(grid.cols),
               static_cast<std::uint32_t>(grid.rows), grid.points);
}

SamplingGrid read_sampling_grid(const std::string &path) {
    RawGrid g = read_grid(path, kKindSampling);
    SamplingGrid s(static_cast<int>(g.d0), static_cast<int>(g.d1));
    s.coords = std::move(g.points);
    return s;
}

void write_sampling_grid(const SamplingGrid &grid, const std::string &path) {
    write_grid(path, kKindSampling, static_cast<std::uint32_t>(grid.width),
               static_cast<std::uint32_t>(grid.height), grid.coords);
}

} // namespace rectiwarp
