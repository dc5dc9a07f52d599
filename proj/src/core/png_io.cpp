#include "objpred/core/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace objpred {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw IoError("cannot open '" + path.string() + "' (mode " + mode + ")");
    }
    return f;
}

// Writes rows of `bytes_per_row` bytes with the given PNG color type and depth.
void write_png(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::uint8_t>& rows, std::size_t bytes_per_row) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw IoError("png_create_write_struct failed for '" + path.string() + "'");
    }
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng error while writing '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rows.data() + static_cast<std::size_t>(y) * bytes_per_row));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) {
        throw IoError("flush failed for '" + path.string() + "'");
    }
}

struct RawPng {
    int width = 0;
    int height = 0;
    int color_type = 0;
    int bit_depth = 0;
    std::size_t bytes_per_row = 0;
    std::vector<std::uint8_t> rows;
};

RawPng read_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw IoError("png_create_read_struct failed for '" + path.string() + "'");
    }
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng error while reading '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    RawPng raw;
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.color_type = png_get_color_type(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    raw.bytes_per_row = png_get_rowbytes(png, info);
    raw.rows.resize(raw.bytes_per_row * static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) {
        png_read_row(png, raw.rows.data() + static_cast<std::size_t>(y) * raw.bytes_per_row, nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const Frame& frame) {
    std::vector<std::uint8_t> rows(frame.pixels.size());
    std::transform(frame.pixels.begin(), frame.pixels.end(), rows.begin(), [](float v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    });
    write_png(path, frame.width, frame.height, PNG_COLOR_TYPE_RGB, 8, rows, static_cast<std::size_t>(frame.width) * 3);
}

Frame read_png_rgb8(const std::filesystem::path& path) {
    RawPng raw = read_png(path);
    if (raw.color_type != PNG_COLOR_TYPE_RGB || raw.bit_depth != 8) {
        throw IoError("'" + path.string() + "' is not an 8-bit RGB PNG");
    }
    Frame frame(raw.height, raw.width);
    for (int y = 0; y < raw.height; ++y) {
        const std::uint8_t* row = raw.rows.data() + static_cast<std::size_t>(y) * raw.bytes_per_row;
        for (int x = 0; x < raw.width * 3; ++x) {
            frame.pixels[static_cast<std::size_t>(y) * raw.width * 3 + x] = static_cast<float>(row[x]) / 255.0f;
        }
    }
    return frame;
}

void write_png_gray16(const std::filesystem::path& path, const Gray16& image) {
    // PNG stores 16-bit samples big-endian.
    std::vector<std::uint8_t> rows(image.data.size() * 2);
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        rows[2 * i] = static_cast<std::uint8_t>(image.data[i] >> 8);
        rows[2 * i + 1] = static_cast<std::uint8_t>(image.data[i] & 0xFF);
    }
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 16, rows, static_cast<std::size_t>(image.width) * 2);
}

Gray16 read_png_gray16(const std::filesystem::path& path) {
    RawPng raw = read_png(path);
    if (raw.color_type != PNG_COLOR_TYPE_GRAY || raw.bit_depth != 16) {
        throw IoError("'" + path.string() + "' is not a 16-bit grayscale PNG");
    }
    Gray16 image{raw.height, raw.width, std::vector<std::uint16_t>(static_cast<std::size_t>(raw.height) * raw.width)};
    for (int y = 0; y < raw.height; ++y) {
        const std::uint8_t* row = raw.rows.data() + static_cast<std::size_t>(y) * raw.bytes_per_row;
        for (int x = 0; x < raw.width; ++x) {
            image.data[static_cast<std::size_t>(y) * raw.width + x] =
                static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
        }
    }
    return image;
}

}  // namespace objpred
