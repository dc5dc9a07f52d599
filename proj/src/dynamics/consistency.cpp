#include "objpred/dynamics/consistency.hpp"

#include "objpred/nn/tensor_util.hpp"

namespace objpred::dyn {

torch::Tensor consistency_terms(const torch::Tensor& boxes_a, const torch::Tensor& features_a, const torch::Tensor& masks_a,
                                const torch::Tensor& boxes_b, const torch::Tensor& features_b, const torch::Tensor& masks_b,
                                double image_size) {
    const auto patch = features_a * masks_a.unsqueeze(1) - features_b * masks_b.unsqueeze(1);
    const auto box = (boxes_a - boxes_b) / image_size;
    // Patch error per element, so a 14x14 patch weighs like one box.
    return patch.pow(2).flatten(1).mean(1).sum() + box.pow(2).sum();
}

torch::Tensor consistency_loss(const Entities& predicted, const seg::DetectionBatch& detections,
                               const std::vector<int>& match, double image_size) {
    std::vector<int64_t> rows, cols;
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] >= 0) {
            rows.push_back(static_cast<int64_t>(i));
            cols.push_back(match[i]);
        }
    }
    if (rows.empty()) {
        return predicted.boxes.defined() ? predicted.boxes.sum() * 0.0 : torch::zeros({});
    }
    const auto r = torch::tensor(rows, torch::kInt64);
    const auto c = torch::tensor(cols, torch::kInt64);
    return consistency_terms(predicted.boxes.index_select(0, r), predicted.features.index_select(0, r),
                             predicted.masks.index_select(0, r), detections.boxes.index_select(0, c),
                             detections.features.index_select(0, c), detections.masks.index_select(0, c), image_size);
}

Association associate_entities(const Entities& entities, const seg::DetectionBatch& detections, double max_distance) {
    auto to_points = [](const torch::Tensor& boxes) {
        std::vector<Point2> pts;
        if (!boxes.defined()) {
            return pts;
        }
        const auto c = nn::box_centers(boxes.detach()).to(torch::kFloat64).contiguous();
        const auto a = c.accessor<double, 2>();
        for (int64_t i = 0; i < c.size(0); ++i) {
            pts.push_back({a[i][0], a[i][1]});
        }
        return pts;
    };
    return associate(to_points(entities.boxes), to_points(detections.boxes), max_distance);
}

}  // namespace objpred::dyn
