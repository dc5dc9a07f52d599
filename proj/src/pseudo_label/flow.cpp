#include "objpred/pseudo_label/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace objpred::label {

FlowField OracleFlow::estimate(const Frame& frame_t, const Frame&) const {
    if (flow_.height != frame_t.height || flow_.width != frame_t.width) {
        throw ShapeError("oracle flow does not match the frame shape");
    }
    return flow_;
}

FlowField BlockMatchingFlow::estimate(const Frame& a, const Frame& b) const {
    const int h = a.height, w = a.width;
    FlowField flow(h, w);
    auto sad = [&](int y, int x, int dy, int dx) {
        double s = 0.0;
        for (int wy = -half_window_; wy <= half_window_; ++wy) {
            for (int wx = -half_window_; wx <= half_window_; ++wx) {
                const int ya = std::clamp(y + wy, 0, h - 1), xa = std::clamp(x + wx, 0, w - 1);
                const int yb = std::clamp(ya + dy, 0, h - 1), xb = std::clamp(xa + dx, 0, w - 1);
                for (int c = 0; c < 3; ++c) {
                    s += std::fabs(a.at(ya, xa, c) - b.at(yb, xb, c));
                }
            }
        }
        return s;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = sad(y, x, 0, 0);
            int best_dx = 0, best_dy = 0;
            int best_norm = 0;
            for (int dy = -radius_; dy <= radius_; ++dy) {
                for (int dx = -radius_; dx <= radius_; ++dx) {
                    const double s = sad(y, x, dy, dx);
                    const int norm = dx * dx + dy * dy;
                    if (s < best - 1e-9 || (std::fabs(s - best) <= 1e-9 && norm < best_norm)) {
                        best = s;
                        best_dx = dx;
                        best_dy = dy;
                        best_norm = norm;
                    }
                }
            }
            flow.dx(y, x) = static_cast<float>(best_dx);
            flow.dy(y, x) = static_cast<float>(best_dy);
        }
    }
    return flow;
}

FlowField provide_flow(const Frame& frame_t, const Frame& frame_t1, const FlowSource& source) {
    if (!frame_t.same_shape(frame_t1)) {
        throw ShapeError("provide_flow: frames differ in shape (" + std::to_string(frame_t.height) + "x" +
                         std::to_string(frame_t.width) + " vs " + std::to_string(frame_t1.height) + "x" +
                         std::to_string(frame_t1.width) + ")");
    }
    FlowField flow = source.estimate(frame_t, frame_t1);
    if (flow.height != frame_t.height || flow.width != frame_t.width) {
        throw ShapeError("provide_flow: flow source returned a field of the wrong shape");
    }
    return flow;
}

}  // namespace objpred::label
