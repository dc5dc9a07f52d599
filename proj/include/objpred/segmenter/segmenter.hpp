#pragma once

#include <vector>

#include <torch/torch.h>

#include "objpred/core/types.hpp"
#include "objpred/segmenter/boxes.hpp"
#include "objpred/segmenter/roi_align.hpp"

namespace objpred::seg {

struct SegmenterConfig {
    int channels = 32;  // feature channels C of the backbone and of every patch
    int image_size = 64;
    int num_proposals = 16;
    int pre_nms_proposals = 128;
    double proposal_nms_iou = 0.5;
    double detection_nms_iou = 0.5;
    double score_threshold = 0.5;
    int max_detections = 8;
    std::vector<AnchorShape> anchors = default_anchor_shapes();
};

inline constexpr double kBackboneStride = 4.0;
/// RGB channels appended to the RoI features of every detection.
inline constexpr int64_t kAppearanceChannels = 3;

/// Channels of a detection's patch features for a backbone of `channels`.
constexpr int64_t patch_channels(int64_t channels) { return channels + kAppearanceChannels; }

/// One detected instance. `features` is [C + 3, 14, 14]: backbone RoI features
/// followed by the image itself sampled on the same grid. `mask` [14, 14] in (0, 1).
struct Detection {
    Box box;
    double score = 0.0;
    torch::Tensor features;
    torch::Tensor mask;
};

/// Detections of one frame as stacked tensors; gradients flow from `boxes`,
/// `features` and `masks` back into the segmenter.
struct DetectionBatch {
    torch::Tensor boxes;     // [D, 4]
    torch::Tensor scores;    // [D]
    torch::Tensor features;  // [D, C + 3, 14, 14]
    torch::Tensor masks;     // [D, 14, 14]

    [[nodiscard]] int64_t size() const { return boxes.defined() ? boxes.size(0) : 0; }
    [[nodiscard]] std::vector<Detection> to_list() const;
};

struct Proposals {
    torch::Tensor boxes;   // [N, 4], clipped, no gradient
    torch::Tensor scores;  // [N] objectness probability
};

/// Raw region-proposal outputs over every anchor.
struct RpnOutput {
    torch::Tensor anchors;      // [A, 4]
    torch::Tensor obj_logits;   // [A]
    torch::Tensor box_deltas;   // [A, 4]
};

struct HeadOutput {
    torch::Tensor cls_logits;   // [N]
    torch::Tensor box_deltas;   // [N, 4]
    torch::Tensor roi_features; // [N, C, 14, 14]
};

class SegmenterNetImpl : public torch::nn::Module {
public:
    explicit SegmenterNetImpl(SegmenterConfig config = {});

    /// [B, 3, H, W] (or [3, H, W]) -> [B, C, H/4, W/4].
    torch::Tensor backbone(const torch::Tensor& images);

    /// Region proposal network over a single [C, h, w] (or [1, C, h, w]) map.
    RpnOutput rpn(const torch::Tensor& features);

    /// Top-N proposals after NMS, padded with suppressed candidates when fewer survive.
    Proposals propose(const RpnOutput& rpn) const;

    /// Box classification and refinement for `boxes` on one feature map.
    HeadOutput box_head(const torch::Tensor& features, const torch::Tensor& boxes);

    /// 14x14 mask logits from RoI features.
    torch::Tensor mask_logits(const torch::Tensor& roi_features);

    /// Full differentiable detection pass on one image [3, H, W].
    DetectionBatch detect_batch(const torch::Tensor& image, double score_threshold);

    /// Inference-mode convenience wrapper.
    std::vector<Detection> detect(const Frame& frame, double score_threshold);
    std::vector<Detection> detect(const Frame& frame) { return detect(frame, config_.score_threshold); }

    [[nodiscard]] const SegmenterConfig& config() const { return config_; }

private:
    SegmenterConfig config_;
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr}, conv4_{nullptr};
    torch::nn::Conv2d rpn_conv_{nullptr}, rpn_obj_{nullptr}, rpn_reg_{nullptr};
    torch::nn::Linear head_fc_{nullptr}, head_cls_{nullptr}, head_reg_{nullptr};
    torch::nn::Conv2d mask1_{nullptr}, mask2_{nullptr}, mask_out_{nullptr};
};
TORCH_MODULE(SegmenterNet);

}  // namespace objpred::seg
