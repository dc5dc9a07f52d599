#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

namespace objpred::seg {

/// Anchor widths and heights in pixels; one anchor of each shape per feature cell.
struct AnchorShape {
    double width;
    double height;
};

std::vector<AnchorShape> default_anchor_shapes();

/// Anchors for a (rows x cols) feature grid with the given stride, ordered
/// row-major over cells and then by shape: [rows * cols * K, 4].
torch::Tensor make_anchors(int64_t rows, int64_t cols, double stride, const std::vector<AnchorShape>& shapes);

/// Pairwise IoU between [N, 4] and [M, 4] boxes -> [N, M].
torch::Tensor box_iou_matrix(const torch::Tensor& a, const torch::Tensor& b);

/// (dx, dy, dw, dh) regression targets of `boxes` relative to `reference`.
torch::Tensor encode_boxes(const torch::Tensor& boxes, const torch::Tensor& reference);

/// Inverse of encode_boxes; log-size deltas are clamped to keep exp() finite.
torch::Tensor decode_boxes(const torch::Tensor& deltas, const torch::Tensor& reference);

torch::Tensor clip_boxes(const torch::Tensor& boxes, double width, double height);

/// Greedy non-maximum suppression. Returns kept indices in descending score
/// order; ties keep the lower index first.
std::vector<int64_t> nms(const torch::Tensor& boxes, const torch::Tensor& scores, double iou_threshold);

/// Smooth-L1 (Huber with transition at `beta`), summed.
torch::Tensor smooth_l1_sum(const torch::Tensor& input, const torch::Tensor& target, double beta);

}  // namespace objpred::seg
