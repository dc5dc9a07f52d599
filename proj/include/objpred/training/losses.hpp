#pragma once

#include <torch/torch.h>

namespace objpred::train {

struct PredictionTerms {
    torch::Tensor final;      // mean squared error of the refined frame
    torch::Tensor unrefined;  // same for the unrefined frame
    torch::Tensor masked;     // squared error over on-pixels of u_seg, averaged over those pixels and channels
};

/// Images [3, H, W]; `u_seg` is a binary [H, W] mask.
PredictionTerms prediction_loss(const torch::Tensor& final_image, const torch::Tensor& unrefined,
                                const torch::Tensor& target, const torch::Tensor& u_seg);

struct LossWeights {
    double alpha = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;
};

/// Plain numbers of a LossTerms, for logging.
struct LossBundle {
    double l_pred_final = 0.0;
    double l_pred_unrefined = 0.0;
    double l_pred_masked = 0.0;
    double l_con = 0.0;
    double l_seg = 0.0;
    double alpha = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;
    double l_pred = 0.0;
    double total = 0.0;
};

struct LossTerms {
    PredictionTerms pred;
    torch::Tensor l_con;
    torch::Tensor l_seg;
    LossWeights weights;

    /// final + unrefined + alpha * masked
    [[nodiscard]] torch::Tensor l_pred() const;
    /// l_pred + c1 * l_con + c2 * l_seg
    [[nodiscard]] torch::Tensor total() const;
    [[nodiscard]] LossBundle values() const;
};

LossTerms combined_loss(PredictionTerms pred, torch::Tensor l_con, torch::Tensor l_seg, LossWeights weights);

}  // namespace objpred::train
