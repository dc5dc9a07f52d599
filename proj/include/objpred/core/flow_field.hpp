#pragma once

#include <vector>

#include "objpred/core/types.hpp"

namespace objpred {

/// Dense per-pixel displacement (dx, dy) in pixels, row-major, interleaved.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<float> vectors;

    FlowField() = default;
    FlowField(int h, int w) : height(h), width(w), vectors(static_cast<std::size_t>(h) * w * 2, 0.0f) {}

    float& dx(int y, int x) { return vectors[(static_cast<std::size_t>(y) * width + x) * 2]; }
    float& dy(int y, int x) { return vectors[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
    [[nodiscard]] float dx(int y, int x) const { return vectors[(static_cast<std::size_t>(y) * width + x) * 2]; }
    [[nodiscard]] float dy(int y, int x) const { return vectors[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }

    bool operator==(const FlowField&) const = default;
};

}  // namespace objpred
