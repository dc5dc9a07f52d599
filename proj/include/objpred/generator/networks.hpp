#pragma once

#include <vector>

#include <torch/torch.h>

#include "objpred/dynamics/dynamics.hpp"

namespace objpred::gen {

/// Three conv layers from a (features, mask) patch to RGB in [0, 1].
class PatchDecoderImpl : public torch::nn::Module {
public:
    explicit PatchDecoderImpl(int channels = 32, int hidden = 32);
    /// features [E, C, p, p], masks [E, p, p] -> [E, 3, p, p].
    torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& masks);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(PatchDecoder);

/// One encoder-decoder with two pooling levels and additive skips.
class HourglassImpl : public torch::nn::Module {
public:
    explicit HourglassImpl(int channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d skip0_{nullptr}, down1_{nullptr}, skip1_{nullptr}, down2_{nullptr}, bottom_{nullptr};
    torch::nn::Conv2d up1_{nullptr}, up0_{nullptr};
};
TORCH_MODULE(Hourglass);

/// Inpainting network: object and background pixels (6 channels) -> RGB in [0, 1].
class InpainterImpl : public torch::nn::Module {
public:
    explicit InpainterImpl(int channels = 32, int stacks = 2);
    /// obj, back: [3, H, W] or [B, 3, H, W].
    torch::Tensor forward(const torch::Tensor& obj, const torch::Tensor& back);

private:
    torch::nn::Conv2d stem_{nullptr}, head_{nullptr};
    std::vector<Hourglass> stacks_;
};
TORCH_MODULE(Inpainter);

/// Residual clean-up: clamp(x + R(x), 0, 1); R's last layer starts at zero.
class RefinerImpl : public torch::nn::Module {
public:
    explicit RefinerImpl(int hidden = 32);
    torch::Tensor forward(const torch::Tensor& image);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(Refiner);

/// Intermediates of one generated frame. Images are [3, H, W], masks [H, W]
/// or stacked [E, H, W].
struct CompositeSet {
    torch::Tensor obj, back, synth, unrefined, final;
    torch::Tensor back_mask, synth_mask;
    torch::Tensor dyn_masks;       // pasted predicted masks at t+1
    torch::Tensor seg_prev_masks;  // pasted masks of the entities at t
};

/// Object pixels and pasted masks: sum_i paste(m_i * F(p_i), box_i), divided by
/// max(1, sum_i paste(m_i)) where entities overlap, and paste(m_i, box_i).
std::pair<torch::Tensor, torch::Tensor> compose_objects(PatchDecoderImpl& decoder, const dyn::Entities& entities,
                                                        int64_t height, int64_t width);

struct Generator {
    PatchDecoder decoder;
    Inpainter inpainter;
    Refiner refiner;

    explicit Generator(int channels = 32);

    /// Builds frame t+1 from frame t, the pasted masks of the entities at t
    /// and the predicted entities at t+1.
    CompositeSet generate(const torch::Tensor& prev_image, const torch::Tensor& seg_prev_masks,
                          const dyn::Entities& predicted);

    [[nodiscard]] std::vector<torch::Tensor> parameters() const;
    void to(torch::ScalarType dtype);
};

}  // namespace objpred::gen
