#include "objpred/pseudo_label/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace objpred::label {

Mask threshold_flow(const FlowField& flow, double fraction) {
    if (!(fraction > 0.0)) {
        throw InvalidConfig("threshold_flow: fraction must be positive");
    }
    const double threshold = fraction * std::max(flow.height, flow.width);
    Mask mask(flow.height, flow.width);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            const double dx = flow.dx(y, x), dy = flow.dy(y, x);
            mask.at(y, x) = std::sqrt(dx * dx + dy * dy) > threshold ? 1 : 0;
        }
    }
    return mask;
}

std::vector<Component> connected_components(const Mask& mask, int min_area) {
    std::vector<Component> out;
    std::vector<std::uint8_t> seen(mask.data.size(), 0);
    std::deque<Pixel> queue;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
            if (!mask.data[idx] || seen[idx]) {
                continue;
            }
            Component comp;
            seen[idx] = 1;
            queue.push_back({x, y});
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                comp.push_back(p);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx, ny = p.y + dy;
                        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) {
                            continue;
                        }
                        const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
                        if (mask.data[nidx] && !seen[nidx]) {
                            seen[nidx] = 1;
                            queue.push_back({nx, ny});
                        }
                    }
                }
            }
            if (static_cast<int>(comp.size()) >= min_area) {
                std::sort(comp.begin(), comp.end());
                out.push_back(std::move(comp));
            }
        }
    }
    return out;
}

namespace {

long long cross(const Pixel& o, const Pixel& a, const Pixel& b) {
    return static_cast<long long>(a.x - o.x) * (b.y - o.y) - static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<Pixel> convex_hull(const Component& component) {
    std::vector<Pixel> pts(component.begin(), component.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) {
        return pts;
    }
    // Andrew's monotone chain.
    std::vector<Pixel> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Pixel& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) {
            --k;
        }
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

Mask convex_hull_mask(const Component& component, int height, int width) {
    if (component.empty()) {
        throw EmptyInput("convex_hull_mask: empty component");
    }
    const std::vector<Pixel> hull = convex_hull(component);
    Mask mask(height, width);
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (const Pixel& p : hull) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width - 1);
    y1 = std::min(y1, height - 1);

    auto inside = [&](const Pixel& p) {
        if (hull.size() == 1) {
            return p == hull[0];
        }
        if (hull.size() == 2) {
            // Degenerate hull: the closed segment between the two points.
            if (cross(hull[0], hull[1], p) != 0) {
                return false;
            }
            return p.x >= std::min(hull[0].x, hull[1].x) && p.x <= std::max(hull[0].x, hull[1].x) &&
                   p.y >= std::min(hull[0].y, hull[1].y) && p.y <= std::max(hull[0].y, hull[1].y);
        }
        for (std::size_t i = 0; i < hull.size(); ++i) {
            if (cross(hull[i], hull[(i + 1) % hull.size()], p) < 0) {
                return false;
            }
        }
        return true;
    };

    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (inside({x, y})) {
                mask.at(y, x) = 1;
            }
        }
    }
    return mask;
}

Component mask_pixels(const Mask& mask) {
    Component out;
    for (int x = 0; x < mask.width; ++x) {
        for (int y = 0; y < mask.height; ++y) {
            if (mask.at(y, x)) {
                out.push_back({x, y});
            }
        }
    }
    return out;
}

AnnotationRecord annotate_pair(const Frame& frame_t, const Frame& frame_t1, const FlowSource& source,
                               const LabelConfig& config, const std::string& frame_id) {
    const FlowField flow = provide_flow(frame_t, frame_t1, source);
    const Mask moving = threshold_flow(flow, config.fraction);
    AnnotationRecord record;
    record.frame_id = frame_id;
    record.height = frame_t.height;
    record.width = frame_t.width;
    for (const Component& comp : connected_components(moving, config.min_area)) {
        Instance inst;
        inst.mask = convex_hull_mask(comp, frame_t.height, frame_t.width);
        inst.box = mask_bounding_box(inst.mask);
        record.instances.push_back(std::move(inst));
    }
    return record;
}

}  // namespace objpred::label
