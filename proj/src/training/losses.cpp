#include "objpred/training/losses.hpp"

#include "objpred/core/types.hpp"

namespace objpred::train {

PredictionTerms prediction_loss(const torch::Tensor& final_image, const torch::Tensor& unrefined,
                                const torch::Tensor& target, const torch::Tensor& u_seg) {
    if (final_image.sizes() != target.sizes() || unrefined.sizes() != target.sizes() ||
        u_seg.sizes() != target.sizes().slice(1)) {
        throw ShapeError("prediction_loss: image, target and mask shapes differ");
    }
    PredictionTerms t;
    t.final = (final_image - target).pow(2).mean();
    t.unrefined = (unrefined - target).pow(2).mean();
    const auto on = u_seg.sum();
    const auto sq = ((final_image - target) * u_seg.unsqueeze(0)).pow(2).sum();
    const double channels = static_cast<double>(target.size(0));
    t.masked = on.item<double>() > 0 ? sq / (on * channels) : sq * 0.0;
    return t;
}

torch::Tensor LossTerms::l_pred() const { return pred.final + pred.unrefined + weights.alpha * pred.masked; }

torch::Tensor LossTerms::total() const { return l_pred() + weights.c1 * l_con + weights.c2 * l_seg; }

LossBundle LossTerms::values() const {
    LossBundle b;
    b.l_pred_final = pred.final.item<double>();
    b.l_pred_unrefined = pred.unrefined.item<double>();
    b.l_pred_masked = pred.masked.item<double>();
    b.l_con = l_con.item<double>();
    b.l_seg = l_seg.item<double>();
    b.alpha = weights.alpha;
    b.c1 = weights.c1;
    b.c2 = weights.c2;
    b.l_pred = l_pred().item<double>();
    b.total = total().item<double>();
    return b;
}

LossTerms combined_loss(PredictionTerms pred, torch::Tensor l_con, torch::Tensor l_seg, LossWeights weights) {
    if (weights.alpha < 0 || weights.c1 < 0 || weights.c2 < 0) {
        throw InvalidConfig("loss weights must be non-negative");
    }
    return {std::move(pred), std::move(l_con), std::move(l_seg), weights};
}

}  // namespace objpred::train
