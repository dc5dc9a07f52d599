#include "objpred/segmenter/segmenter.hpp"

#include <algorithm>

#include "objpred/nn/tensor_util.hpp"

namespace objpred::seg {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

}  // namespace

std::vector<Detection> DetectionBatch::to_list() const {
    std::vector<Detection> out;
    for (int64_t i = 0; i < size(); ++i) {
        Detection d;
        d.box = nn::tensor_to_box(boxes[i]);
        d.score = scores[i].item<double>();
        d.features = features[i].detach();
        d.mask = masks[i].detach();
        out.push_back(std::move(d));
    }
    return out;
}

SegmenterNetImpl::SegmenterNetImpl(SegmenterConfig config) : config_(std::move(config)) {
    const int64_t c = config_.channels;
    const auto k = static_cast<int64_t>(config_.anchors.size());
    conv1_ = register_module("conv1", conv(3, 16, 3));
    conv2_ = register_module("conv2", conv(16, c, 3, 2));
    conv3_ = register_module("conv3", conv(c, c, 3));
    conv4_ = register_module("conv4", conv(c, c, 3, 2));
    rpn_conv_ = register_module("rpn_conv", conv(c, c, 3));
    rpn_obj_ = register_module("rpn_obj", conv(c, k, 1));
    rpn_reg_ = register_module("rpn_reg", conv(c, 4 * k, 1));
    const int64_t pooled = c * (kPatchSize / 2) * (kPatchSize / 2);
    head_fc_ = register_module("head_fc", torch::nn::Linear(pooled, 128));
    head_cls_ = register_module("head_cls", torch::nn::Linear(128, 1));
    head_reg_ = register_module("head_reg", torch::nn::Linear(128, 4));
    mask1_ = register_module("mask1", conv(c, 32, 3));
    mask2_ = register_module("mask2", conv(32, 32, 3));
    mask_out_ = register_module("mask_out", conv(32, 1, 1));

    torch::NoGradGuard no_grad;
    // Small regression outputs at init keep the first proposals on their anchors.
    for (auto* layer : {&rpn_reg_}) {
        (*layer)->weight.normal_(0.0, 0.01);
        (*layer)->bias.zero_();
    }
    head_reg_->weight.normal_(0.0, 0.01);
    head_reg_->bias.zero_();
}

torch::Tensor SegmenterNetImpl::backbone(const torch::Tensor& images) {
    auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
    x = torch::relu(conv1_(x));
    x = torch::relu(conv2_(x));
    x = torch::relu(conv3_(x));
    return torch::relu(conv4_(x));
}

RpnOutput SegmenterNetImpl::rpn(const torch::Tensor& features) {
    const auto fmap = features.dim() == 3 ? features.unsqueeze(0) : features;
    const auto k = static_cast<int64_t>(config_.anchors.size());
    const auto h = fmap.size(2), w = fmap.size(3);
    const auto hidden = torch::relu(rpn_conv_(fmap));
    RpnOutput out;
    // [1, K, h, w] -> [h, w, K] -> [A] so that anchors are cell-major, then shape.
    out.obj_logits = rpn_obj_(hidden)[0].permute({1, 2, 0}).reshape({-1});
    out.box_deltas = rpn_reg_(hidden)[0].view({k, 4, h, w}).permute({2, 3, 0, 1}).reshape({-1, 4});
    out.anchors = make_anchors(h, w, kBackboneStride, config_.anchors).to(fmap.scalar_type());
    return out;
}

Proposals SegmenterNetImpl::propose(const RpnOutput& rpn) const {
    torch::NoGradGuard no_grad;
    const double size = config_.image_size;
    auto boxes = clip_boxes(decode_boxes(rpn.box_deltas.detach(), rpn.anchors), size, size);
    auto scores = torch::sigmoid(rpn.obj_logits.detach());
    const auto valid = ((boxes.select(1, 2) - boxes.select(1, 0)) >= 1.0) & ((boxes.select(1, 3) - boxes.select(1, 1)) >= 1.0);
    // Degenerate boxes are pushed to the back instead of dropped so the output size stays fixed.
    scores = torch::where(valid, scores, scores - 2.0);

    const int64_t top = std::min<int64_t>(config_.pre_nms_proposals, boxes.size(0));
    const auto order = std::get<1>(scores.sort(0, true)).slice(0, 0, top);
    boxes = boxes.index_select(0, order);
    scores = scores.index_select(0, order);

    std::vector<int64_t> keep = nms(boxes, scores, config_.proposal_nms_iou);
    if (static_cast<int>(keep.size()) < config_.num_proposals) {
        std::vector<bool> taken(static_cast<std::size_t>(top), false);
        for (int64_t i : keep) {
            taken[static_cast<std::size_t>(i)] = true;
        }
        for (int64_t i = 0; i < top && static_cast<int>(keep.size()) < config_.num_proposals; ++i) {
            if (!taken[static_cast<std::size_t>(i)]) {
                keep.push_back(i);
            }
        }
    }
    keep.resize(std::min<std::size_t>(keep.size(), static_cast<std::size_t>(config_.num_proposals)));
    const auto idx = torch::tensor(keep, torch::kInt64);
    auto out_boxes = boxes.index_select(0, idx);
    // Keep every proposal usable by roi_align.
    out_boxes = torch::stack({out_boxes.select(1, 0), out_boxes.select(1, 1),
                              torch::max(out_boxes.select(1, 2), out_boxes.select(1, 0) + 1.0),
                              torch::max(out_boxes.select(1, 3), out_boxes.select(1, 1) + 1.0)},
                             1);
    return {out_boxes, scores.index_select(0, idx).clamp_min(0.0)};
}

HeadOutput SegmenterNetImpl::box_head(const torch::Tensor& features, const torch::Tensor& boxes) {
    HeadOutput out;
    out.roi_features = roi_align(features, boxes, 1.0 / kBackboneStride);
    const auto pooled = F::avg_pool2d(out.roi_features, F::AvgPool2dFuncOptions(2)).flatten(1);
    const auto hidden = torch::relu(head_fc_(pooled));
    out.cls_logits = head_cls_(hidden).squeeze(1);
    out.box_deltas = head_reg_(hidden);
    return out;
}

torch::Tensor SegmenterNetImpl::mask_logits(const torch::Tensor& roi_features) {
    auto x = torch::relu(mask1_(roi_features));
    x = torch::relu(mask2_(x));
    return mask_out_(x).squeeze(1);
}

DetectionBatch SegmenterNetImpl::detect_batch(const torch::Tensor& image, double score_threshold) {
    const auto features = backbone(image);
    const Proposals proposals = propose(rpn(features));
    const HeadOutput head = box_head(features, proposals.boxes);
    const double size = config_.image_size;
    auto refined = clip_boxes(decode_boxes(head.box_deltas, proposals.boxes), size, size);
    const auto scores = torch::sigmoid(head.cls_logits);

    const auto r = refined.detach();
    const auto area_ok = ((r.select(1, 2) - r.select(1, 0)) >= 1.0) & ((r.select(1, 3) - r.select(1, 1)) >= 1.0);
    const auto candidates = torch::nonzero((scores.detach() > score_threshold) & area_ok).flatten();

    DetectionBatch out;
    const int64_t c = patch_channels(config_.channels);
    if (candidates.numel() == 0) {
        out.boxes = torch::zeros({0, 4}, image.options());
        out.scores = torch::zeros({0}, image.options());
        out.features = torch::zeros({0, c, kPatchSize, kPatchSize}, image.options());
        out.masks = torch::zeros({0, kPatchSize, kPatchSize}, image.options());
        return out;
    }
    auto cand_boxes = refined.index_select(0, candidates);
    auto cand_scores = scores.index_select(0, candidates);
    std::vector<int64_t> keep = nms(cand_boxes.detach(), cand_scores.detach(), config_.detection_nms_iou);
    keep.resize(std::min<std::size_t>(keep.size(), static_cast<std::size_t>(config_.max_detections)));
    const auto idx = torch::tensor(keep, torch::kInt64);
    out.boxes = cand_boxes.index_select(0, idx);
    out.scores = cand_scores.index_select(0, idx);
    const auto learned = roi_align(features, out.boxes, 1.0 / kBackboneStride);
    out.masks = torch::sigmoid(mask_logits(learned));
    out.features = torch::cat({learned, roi_align(image, out.boxes, 1.0)}, 1);
    return out;
}

std::vector<Detection> SegmenterNetImpl::detect(const Frame& frame, double score_threshold) {
    torch::NoGradGuard no_grad;
    return detect_batch(nn::frame_to_tensor(frame), score_threshold).to_list();
}

}  // namespace objpred::seg
