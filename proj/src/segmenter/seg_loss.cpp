#include "objpred/segmenter/seg_loss.hpp"

#include "objpred/nn/tensor_util.hpp"

namespace objpred::seg {

namespace F = torch::nn::functional;

SegTargets SegTargets::from_record(const label::AnnotationRecord& record) {
    SegTargets t;
    std::vector<Box> boxes;
    std::vector<torch::Tensor> masks;
    for (const auto& inst : record.instances) {
        boxes.push_back(inst.box);
        masks.push_back(nn::mask_to_tensor(inst.mask));
    }
    t.boxes = nn::boxes_to_tensor(boxes);
    t.masks = masks.empty() ? torch::zeros({0, record.height, record.width}) : torch::stack(masks);
    return t;
}

torch::Tensor balanced_log_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
    const auto pos = labels > 0.5;
    const auto neg = ~pos;
    const auto per = F::binary_cross_entropy_with_logits(logits, labels,
                                                         F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone));
    const auto n_pos = pos.sum().item<int64_t>();
    const auto n_neg = neg.sum().item<int64_t>();
    if (n_pos == 0 && n_neg == 0) {
        return logits.sum() * 0.0;
    }
    if (n_pos == 0) {
        return per.masked_select(neg).mean();
    }
    if (n_neg == 0) {
        return per.masked_select(pos).mean();
    }
    return 0.5 * (per.masked_select(pos).mean() + per.masked_select(neg).mean());
}

torch::Tensor box_regression_loss(const torch::Tensor& deltas, const torch::Tensor& reference,
                                  const torch::Tensor& target_boxes, double beta) {
    if (deltas.size(0) == 0) {
        return deltas.sum() * 0.0;
    }
    const auto targets = encode_boxes(target_boxes, reference).detach();
    return smooth_l1_sum(deltas, targets, beta) / static_cast<double>(deltas.size(0));
}

torch::Tensor mask_targets(const torch::Tensor& gt_masks, const torch::Tensor& boxes) {
    torch::NoGradGuard no_grad;
    if (boxes.size(0) == 0) {
        return torch::zeros({0, kPatchSize, kPatchSize}, gt_masks.options());
    }
    std::vector<torch::Tensor> out;
    for (int64_t i = 0; i < boxes.size(0); ++i) {
        out.push_back(roi_align(gt_masks[i].unsqueeze(0), boxes.slice(0, i, i + 1), 1.0)[0][0]);
    }
    return (torch::stack(out) >= 0.5).to(gt_masks.scalar_type());
}

torch::Tensor mask_loss(const torch::Tensor& logits, const torch::Tensor& targets) {
    if (logits.size(0) == 0) {
        return logits.sum() * 0.0;
    }
    return F::binary_cross_entropy_with_logits(logits, targets);
}

SegLossBundle seg_loss(SegmenterNetImpl& net, const torch::Tensor& image, const SegTargets& targets,
                       const SegLossConfig& config) {
    const auto features = net.backbone(image);
    const RpnOutput rpn = net.rpn(features);
    const auto gt_boxes = targets.boxes.to(image.scalar_type());
    const auto gt_masks = targets.masks.to(image.scalar_type());
    const int64_t g = gt_boxes.size(0);
    SegLossBundle loss;

    // RPN: anchors labelled against the pseudo boxes.
    {
        auto labels = torch::full({rpn.anchors.size(0)}, -1.0, image.options());
        torch::Tensor matched;
        if (g > 0) {
            const auto iou = box_iou_matrix(rpn.anchors, gt_boxes);
            const auto [best, arg] = iou.max(1);
            labels = torch::where(best >= config.positive_iou, torch::ones_like(labels), labels);
            labels = torch::where(best < config.negative_iou, torch::zeros_like(labels), labels);
            matched = gt_boxes.index_select(0, arg);
        } else {
            labels.fill_(0.0);
        }
        const auto used = torch::nonzero(labels >= 0).flatten();
        loss.l_obj = balanced_log_loss(rpn.obj_logits.index_select(0, used), labels.index_select(0, used));
        const auto pos = torch::nonzero(labels > 0.5).flatten();
        if (pos.numel() > 0) {
            loss.l_reg = box_regression_loss(rpn.box_deltas.index_select(0, pos), rpn.anchors.index_select(0, pos),
                                             matched.index_select(0, pos), config.smooth_l1_beta);
        } else {
            loss.l_reg = rpn.box_deltas.sum() * 0.0;
        }
    }

    // Box and mask heads on proposals plus the pseudo boxes themselves.
    const Proposals proposals = net.propose(rpn);
    const auto rois = torch::cat({proposals.boxes.to(image.scalar_type()), gt_boxes}, 0);
    auto labels = torch::zeros({rois.size(0)}, image.options());
    torch::Tensor assigned;
    if (g > 0) {
        const auto iou = box_iou_matrix(rois, gt_boxes);
        const auto [best, arg] = iou.max(1);
        labels = torch::where(best >= config.positive_iou, torch::ones_like(labels),
                              torch::where(best < config.negative_iou, torch::zeros_like(labels), -torch::ones_like(labels)));
        assigned = arg;
    }
    const HeadOutput head = net.box_head(features, rois);
    const auto used = torch::nonzero(labels >= 0).flatten();
    loss.l_cls = balanced_log_loss(head.cls_logits.index_select(0, used), labels.index_select(0, used));

    const auto pos = torch::nonzero(labels > 0.5).flatten();
    if (pos.numel() > 0) {
        const auto pos_rois = rois.index_select(0, pos);
        const auto pos_gt = assigned.index_select(0, pos);
        loss.l_box = box_regression_loss(head.box_deltas.index_select(0, pos), pos_rois, gt_boxes.index_select(0, pos_gt),
                                         config.smooth_l1_beta);
        const auto logits = net.mask_logits(head.roi_features.index_select(0, pos));
        std::vector<torch::Tensor> tgt;
        for (int64_t i = 0; i < pos.size(0); ++i) {
            const int64_t gi = pos_gt[i].item<int64_t>();
            tgt.push_back(mask_targets(gt_masks.slice(0, gi, gi + 1), pos_rois.slice(0, i, i + 1))[0]);
        }
        loss.l_mask = mask_loss(logits, torch::stack(tgt));
    } else {
        loss.l_box = head.box_deltas.sum() * 0.0;
        loss.l_mask = head.roi_features.sum() * 0.0;
    }
    return loss;
}

}  // namespace objpred::seg
