#include "rectiwarp/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace rectiwarp {

unsigned quantize_unit(double v, unsigned maxval) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    // nearbyint under the default rounding mode is round-half-even.
    return static_cast<unsigned>(std::nearbyint(clamped * maxval));
}

namespace {

std::string lower_extension(const std::string &path) {
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// ---------------------------------------------------------------- PGM/PPM

int pnm_token(std::istream &is, const std::string &path) {
    // Skips whitespace and '#' comment lines, then reads one integer.
    for (;;) {
        const int c = is.peek();
        if (c == EOF) {
            throw std::runtime_error("read_image: truncated header in '" + path + "'");
        }
        if (std::isspace(c)) {
            is.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(is, line);
            continue;
        }
        break;
    }
    int value = 0;
    if (!(is >> value)) {
        throw std::runtime_error("read_image: bad header in '" + path + "'");
    }
    return value;
}

Image read_pnm(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("read_image: cannot open '" + path + "'");
    }
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
        throw std::runtime_error("read_image: not a binary PGM/PPM: '" + path + "'");
    }
    const int channels = m1 == '6' ? 3 : 1;
    const int w = pnm_token(is, path);
    const int h = pnm_token(is, path);
    const int maxval = pnm_token(is, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw std::runtime_error("read_image: bad dimensions in '" + path + "'");
    }
    is.get(); // single whitespace separating header from pixel data

    Image img(w, h, channels);
    const std::size_t samples = img.data.size();
    const int bytes_per = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(samples * bytes_per);
    if (!is.read(reinterpret_cast<char *>(raw.data()),
                 static_cast<std::streamsize>(raw.size()))) {
        throw std::runtime_error("read_image: truncated pixel data in '" + path + "'");
    }
    const double inv = 1.0 / maxval;
    for (std::size_t i = 0; i < samples; ++i) {
        unsigned v;
        if (bytes_per == 1) {
            v = raw[i];
        } else {
            v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
        }
        img.data[i] = v * inv;
    }
    return img;
}

void write_pnm(const Image &img, const std::string &path, int bit_depth) {
    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw std::runtime_error("write_image: cannot open '" + path + "'");
    }
    os << (img.channels == 3 ? "P6" : "P5") << "\n"
       << img.width << " " << img.height << "\n"
       << maxval << "\n";
    std::vector<unsigned char> raw;
    raw.reserve(img.data.size() * (bit_depth / 8));
    for (double v : img.data) {
        const unsigned q = quantize_unit(v, maxval);
        if (bit_depth == 16) {
            raw.push_back(static_cast<unsigned char>((q >> 8) & 0xff)); // MSB first
        }
        raw.push_back(static_cast<unsigned char>(q & 0xff));
    }
    os.write(reinterpret_cast<const char *>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
    if (!os.flush()) {
        throw std::runtime_error("write_image: write failed for '" + path + "'");
    }
}

// -------------------------------------------------------------------- PNG

struct FileCloser {
    std::FILE *fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

Image read_png_file(const std::string &path) {
    FileCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) {
        throw std::runtime_error("read_image: cannot open '" + path + "'");
    }
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_image: corrupt PNG '" + path + "'");
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    const png_byte in_color = png_get_color_type(png, info);
    const png_byte in_depth = png_get_bit_depth(png, info);
    if (in_color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (in_color == PNG_COLOR_TYPE_GRAY && in_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (in_color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if ((depth != 8 && depth != 16) || (channels != 1 && channels != 3) || w == 0 ||
        h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_image: unsupported PNG layout in '" + path + "'");
    }

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    const std::size_t row_samples = static_cast<std::size_t>(w) * channels;
    std::vector<png_byte> row(row_samples * (depth / 8));
    const double inv = depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t i = 0; i < row_samples; ++i) {
            unsigned v;
            if (depth == 8) {
                v = row[i];
            } else {
                v = (static_cast<unsigned>(row[2 * i]) << 8) | row[2 * i + 1];
            }
            img.data[static_cast<std::size_t>(y) * row_samples + i] = v * inv;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png_file(const Image &img, const std::string &path, int bit_depth) {
    FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) {
        throw std::runtime_error("write_image: cannot open '" + path + "'");
    }
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("write_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_image: libpng write error for '" + path + "'");
    }
    png_init_io(png, file.fp);
    const int color_type =
        img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    const std::size_t row_samples =
        static_cast<std::size_t>(img.width) * img.channels;
    std::vector<png_byte> row(row_samples * (bit_depth / 8));
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < row_samples; ++i) {
            const unsigned q =
                quantize_unit(img.data[static_cast<std::size_t>(y) * row_samples + i],
                              maxval);
            if (bit_depth == 8) {
                row[i] = static_cast<png_byte>(q);
            } else {
                row[2 * i] = static_cast<png_byte>((q >> 8) & 0xff); // network order
                row[2 * i + 1] = static_cast<png_byte>(q & 0xff);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

Image read_image(const std::string &path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_png_file(path);
    if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
    throw std::invalid_argument("read_image: unsupported extension in '" + path +
                                "' (expected .png, .pgm or .ppm)");
}

void write_image(const Image &img, const std::string &path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) {
        throw std::invalid_argument("write_image: bit depth must be 8 or 16");
    }
    if (img.width <= 0 || img.height <= 0) {
        throw std::invalid_argument("write_image: empty image");
    }
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_png_file(img, path, bit_depth);
        return;
    }
    if (ext == ".pgm" || ext == ".ppm") {
        if ((ext == ".pgm" && img.channels != 1) ||
            (ext == ".ppm" && img.channels != 3)) {
            throw std::invalid_argument(
                "write_image: channel count does not match the PNM flavor");
        }
        write_pnm(img, path, bit_depth);
        return;
    }
    throw std::invalid_argument("write_image: unsupported extension in '" + path +
                                "' (expected .png, .pgm or .ppm)");
}

Mask read_mask(const std::string &path) {
    const Image img = read_image(path);
    Mask mask(img.width, img.height, 0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            mask.at(x, y) = img.at(x, y, 0) > 0.0 ? 1 : 0;
        }
    }
    return mask;
}

void write_mask(const Mask &mask, const std::string &path) {
    Image img(mask.width, mask.height, 1, 0.0);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        img.data[i] = mask.data[i] ? 1.0 : 0.0;
    }
    write_image(img, path, 8);
}

} // namespace rectiwarp
