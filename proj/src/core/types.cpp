#include "objpred/core/types.hpp"

#include <algorithm>
#include <numeric>

namespace objpred {

double box_iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0 || iy <= 0) {
        return 0.0;
    }
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

Box mask_bounding_box(const Mask& mask) {
    int x_min = mask.width, y_min = mask.height, x_max = -1, y_max = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(y, x)) {
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        }
    }
    if (x_max < 0) {
        return {};
    }
    return {static_cast<double>(x_min), static_cast<double>(y_min), static_cast<double>(x_max + 1),
            static_cast<double>(y_max + 1)};
}

double mask_iou(const Mask& a, const Mask& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("mask_iou: masks differ in shape");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace objpred
