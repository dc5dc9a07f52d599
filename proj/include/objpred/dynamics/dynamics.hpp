#pragma once

#include <vector>

#include <torch/torch.h>

#include "objpred/segmenter/segmenter.hpp"

namespace objpred::dyn {

enum class Origin { Segmented, Predicted };

/// Tracked objects of one sequence, stacked. Row i belongs to entity ids[i].
struct Entities {
    std::vector<int> ids;
    torch::Tensor boxes;     // [E, 4] pixels
    torch::Tensor features;  // [E, C, 14, 14]
    torch::Tensor masks;     // [E, 14, 14] in [0, 1]
    Origin origin = Origin::Segmented;

    [[nodiscard]] int64_t size() const { return static_cast<int64_t>(ids.size()); }

    /// Entities 0..D-1 initialised from a frame's detections.
    static Entities from_detections(const seg::DetectionBatch& detections);

    /// Rows reordered by `order` (ids follow their rows).
    [[nodiscard]] Entities permuted(const std::vector<int64_t>& order) const;
};

struct DynamicsConfig {
    int channels = 32;
    int latent = 128;
    int hidden = 256;
    int box_code = 32;  // part of the latent spent on the box
    int image_size = 64;
};

/// Per-entity encoder, residual latent predictor and decoder.
class DynamicsNetImpl : public torch::nn::Module {
public:
    explicit DynamicsNetImpl(DynamicsConfig config = {});

    /// Boxes normalised by image size, concatenated with mask-gated features
    /// and the mask, mapped through an affine layer and tanh: [E, latent].
    torch::Tensor encode(const torch::Tensor& boxes, const torch::Tensor& features, const torch::Tensor& masks);

    /// z + MLP(z) with four affine layers; the last one starts at zero.
    torch::Tensor predict(const torch::Tensor& z);

    struct Decoded {
        torch::Tensor boxes;     // [E, 4] pixels, positive area by construction
        torch::Tensor features;  // [E, C, 14, 14]
        torch::Tensor masks;     // [E, 14, 14] in (0, 1)
    };
    Decoded decode(const torch::Tensor& z);

    /// Closed-form start for encode and decode on a pool of detections: the
    /// patch encoder projects onto the leading principal directions of its
    /// input (feature, appearance and mask blocks rescaled to fixed variances),
    /// and the three decoders are ridge regressions on the resulting codes.
    /// predict is left untouched.
    void fit_autoencoder(const torch::Tensor& boxes, const torch::Tensor& features, const torch::Tensor& masks);

    /// encode -> predict -> decode for every entity; ids are preserved.
    Entities step(const Entities& entities);

    [[nodiscard]] const DynamicsConfig& config() const { return config_; }

private:
    DynamicsConfig config_;
    torch::nn::Linear enc_box_{nullptr}, enc_patch_{nullptr};
    torch::nn::Linear pred1_{nullptr}, pred2_{nullptr}, pred3_{nullptr}, pred4_{nullptr};
    torch::nn::Linear dec_box_{nullptr}, dec_mask_{nullptr}, dec_features_{nullptr};
};
TORCH_MODULE(DynamicsNet);

}  // namespace objpred::dyn
