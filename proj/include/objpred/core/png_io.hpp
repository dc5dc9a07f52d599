#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "objpred/core/types.hpp"

namespace objpred {

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to the nearest level.
void write_png_rgb8(const std::filesystem::path& path, const Frame& frame);
Frame read_png_rgb8(const std::filesystem::path& path);

/// 16-bit single-channel PNG, row-major.
struct Gray16 {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> data;
};

void write_png_gray16(const std::filesystem::path& path, const Gray16& image);
Gray16 read_png_gray16(const std::filesystem::path& path);

}  // namespace objpred
