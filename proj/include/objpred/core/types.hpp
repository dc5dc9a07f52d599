#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace objpred {

// Error categories surfaced by the library. The CLI maps all of them to the
// runtime-error exit code; tests match on the concrete type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InvalidBox : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class MissingData : public Error {
public:
    using Error::Error;
};

class MissingCheckpoint : public Error {
public:
    using Error::Error;
};

class EmptySplit : public Error {
public:
    using Error::Error;
};

/// Axis-aligned box in continuous pixel coordinates. Pixel (col, row) covers
/// [col, col+1) x [row, row+1), so x2/y2 are exclusive edges.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    [[nodiscard]] double width() const { return x2 - x1; }
    [[nodiscard]] double height() const { return y2 - y1; }
    [[nodiscard]] double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    [[nodiscard]] double center_x() const { return 0.5 * (x1 + x2); }
    [[nodiscard]] double center_y() const { return 0.5 * (y1 + y2); }
    [[nodiscard]] bool valid() const { return x1 < x2 && y1 < y2; }

    bool operator==(const Box&) const = default;
};

double box_iou(const Box& a, const Box& b);

/// RGB image with float intensities in [0,1], stored row-major HWC.
struct Frame {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Frame() = default;
    Frame(int h, int w, float fill = 0.0f) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    [[nodiscard]] float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    [[nodiscard]] bool same_shape(const Frame& o) const { return height == o.height && width == o.width; }
    bool operator==(const Frame&) const = default;
};

/// Binary H x W mask, row-major.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool empty() const { return count() == 0; }
    bool operator==(const Mask&) const = default;
};

/// Tight bound of the on-pixels; an all-zero box for an empty mask.
Box mask_bounding_box(const Mask& mask);

double mask_iou(const Mask& a, const Mask& b);

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
    auto operator<=>(const Pixel&) const = default;
};

}  // namespace objpred
