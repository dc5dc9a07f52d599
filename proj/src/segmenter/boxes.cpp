#include "objpred/segmenter/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace objpred::seg {

namespace {

const double kMaxLogScale = std::log(1000.0 / 16.0);

}  // namespace

std::vector<AnchorShape> default_anchor_shapes() { return {{12.0, 10.0}, {18.0, 13.0}, {26.0, 18.0}}; }

torch::Tensor make_anchors(int64_t rows, int64_t cols, double stride, const std::vector<AnchorShape>& shapes) {
    const auto k = static_cast<int64_t>(shapes.size());
    auto anchors = torch::empty({rows * cols * k, 4}, torch::kFloat32);
    auto a = anchors.accessor<float, 2>();
    int64_t i = 0;
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            const double cx = (static_cast<double>(c) + 0.5) * stride;
            const double cy = (static_cast<double>(r) + 0.5) * stride;
            for (const AnchorShape& s : shapes) {
                a[i][0] = static_cast<float>(cx - s.width / 2);
                a[i][1] = static_cast<float>(cy - s.height / 2);
                a[i][2] = static_cast<float>(cx + s.width / 2);
                a[i][3] = static_cast<float>(cy + s.height / 2);
                ++i;
            }
        }
    }
    return anchors;
}

torch::Tensor box_iou_matrix(const torch::Tensor& a, const torch::Tensor& b) {
    const auto area_a = (a.select(1, 2) - a.select(1, 0)).clamp_min(0) * (a.select(1, 3) - a.select(1, 1)).clamp_min(0);
    const auto area_b = (b.select(1, 2) - b.select(1, 0)).clamp_min(0) * (b.select(1, 3) - b.select(1, 1)).clamp_min(0);
    const auto lt_x = torch::max(a.select(1, 0).unsqueeze(1), b.select(1, 0).unsqueeze(0));
    const auto lt_y = torch::max(a.select(1, 1).unsqueeze(1), b.select(1, 1).unsqueeze(0));
    const auto rb_x = torch::min(a.select(1, 2).unsqueeze(1), b.select(1, 2).unsqueeze(0));
    const auto rb_y = torch::min(a.select(1, 3).unsqueeze(1), b.select(1, 3).unsqueeze(0));
    const auto inter = (rb_x - lt_x).clamp_min(0) * (rb_y - lt_y).clamp_min(0);
    const auto uni = area_a.unsqueeze(1) + area_b.unsqueeze(0) - inter;
    return torch::where(uni > 0, inter / uni.clamp_min(1e-12), torch::zeros_like(inter));
}

torch::Tensor encode_boxes(const torch::Tensor& boxes, const torch::Tensor& reference) {
    const auto rw = reference.select(1, 2) - reference.select(1, 0);
    const auto rh = reference.select(1, 3) - reference.select(1, 1);
    const auto rx = reference.select(1, 0) + 0.5 * rw;
    const auto ry = reference.select(1, 1) + 0.5 * rh;
    const auto bw = boxes.select(1, 2) - boxes.select(1, 0);
    const auto bh = boxes.select(1, 3) - boxes.select(1, 1);
    const auto bx = boxes.select(1, 0) + 0.5 * bw;
    const auto by = boxes.select(1, 1) + 0.5 * bh;
    return torch::stack({(bx - rx) / rw, (by - ry) / rh, torch::log(bw / rw), torch::log(bh / rh)}, 1);
}

torch::Tensor decode_boxes(const torch::Tensor& deltas, const torch::Tensor& reference) {
    const auto rw = reference.select(1, 2) - reference.select(1, 0);
    const auto rh = reference.select(1, 3) - reference.select(1, 1);
    const auto rx = reference.select(1, 0) + 0.5 * rw;
    const auto ry = reference.select(1, 1) + 0.5 * rh;
    const auto cx = rx + deltas.select(1, 0) * rw;
    const auto cy = ry + deltas.select(1, 1) * rh;
    const auto w = rw * torch::exp(deltas.select(1, 2).clamp_max(kMaxLogScale));
    const auto h = rh * torch::exp(deltas.select(1, 3).clamp_max(kMaxLogScale));
    return torch::stack({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}, 1);
}

torch::Tensor clip_boxes(const torch::Tensor& boxes, double width, double height) {
    return torch::stack({boxes.select(1, 0).clamp(0, width), boxes.select(1, 1).clamp(0, height),
                         boxes.select(1, 2).clamp(0, width), boxes.select(1, 3).clamp(0, height)},
                        1);
}

std::vector<int64_t> nms(const torch::Tensor& boxes, const torch::Tensor& scores, double iou_threshold) {
    const auto n = boxes.size(0);
    if (n == 0) {
        return {};
    }
    const auto s = scores.detach().to(torch::kFloat64).contiguous();
    const double* sp = s.data_ptr<double>();
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return sp[a] > sp[b]; });

    const auto iou = box_iou_matrix(boxes.detach(), boxes.detach()).to(torch::kFloat64).contiguous();
    const auto ia = iou.accessor<double, 2>();
    std::vector<bool> suppressed(static_cast<std::size_t>(n), false);
    std::vector<int64_t> keep;
    for (int64_t i : order) {
        if (suppressed[static_cast<std::size_t>(i)]) {
            continue;
        }
        keep.push_back(i);
        for (int64_t j : order) {
            if (!suppressed[static_cast<std::size_t>(j)] && j != i && ia[i][j] > iou_threshold) {
                suppressed[static_cast<std::size_t>(j)] = true;
            }
        }
    }
    return keep;
}

torch::Tensor smooth_l1_sum(const torch::Tensor& input, const torch::Tensor& target, double beta) {
    const auto diff = (input - target).abs();
    return torch::where(diff < beta, 0.5 * diff * diff / beta, diff - 0.5 * beta).sum();
}

}  // namespace objpred::seg
