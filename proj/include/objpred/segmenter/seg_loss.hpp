#pragma once

#include <torch/torch.h>

#include "objpred/pseudo_label/labeling.hpp"
#include "objpred/segmenter/segmenter.hpp"

namespace objpred::seg {

/// Pseudo ground truth of one frame as tensors.
struct SegTargets {
    torch::Tensor boxes;  // [G, 4]
    torch::Tensor masks;  // [G, H, W] in {0, 1}

    static SegTargets from_record(const label::AnnotationRecord& record);
    [[nodiscard]] int64_t size() const { return boxes.size(0); }
};

struct SegLossBundle {
    torch::Tensor l_cls;   // box-head foreground/background log loss
    torch::Tensor l_box;   // box-head smooth-L1 on refinement deltas
    torch::Tensor l_mask;  // per-pixel BCE on 14x14 masks
    torch::Tensor l_obj;   // RPN objectness log loss
    torch::Tensor l_reg;   // RPN smooth-L1 on anchor deltas

    [[nodiscard]] torch::Tensor total() const { return l_cls + l_box + l_mask + l_obj + l_reg; }
};

struct SegLossConfig {
    double positive_iou = 0.5;
    double negative_iou = 0.3;
    double smooth_l1_beta = 1.0 / 9.0;
};

/// Log loss in which positives and negatives each contribute their mean, so a
/// frame with a handful of objects is not swamped by background. With only
/// one class present it reduces to that class's mean.
torch::Tensor balanced_log_loss(const torch::Tensor& logits, const torch::Tensor& labels);

/// Smooth-L1 between `deltas` and the encoding of `target_boxes` relative to
/// `reference`, averaged over rows (0 for no rows).
torch::Tensor box_regression_loss(const torch::Tensor& deltas, const torch::Tensor& reference,
                                  const torch::Tensor& target_boxes, double beta);

/// Binary 14x14 targets: GT masks resampled onto `boxes` and thresholded at 0.5.
torch::Tensor mask_targets(const torch::Tensor& gt_masks, const torch::Tensor& boxes);

/// Mean per-pixel BCE between mask logits and binary targets (0 for no rows).
torch::Tensor mask_loss(const torch::Tensor& logits, const torch::Tensor& targets);

/// Five-part detection loss on one image [3, H, W].
SegLossBundle seg_loss(SegmenterNetImpl& net, const torch::Tensor& image, const SegTargets& targets,
                       const SegLossConfig& config = {});

}  // namespace objpred::seg
