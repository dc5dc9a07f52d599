#pragma once

#include <torch/torch.h>

namespace objpred::gen {

/// Places 14x14 patches into image coordinates. `patches` is [E, K, p, p],
/// `boxes` [E, 4]; returns [E, K, H, W]. Pixel centres inside a box read the
/// patch bilinearly (edge-clamped), everything else is 0. Differentiable in
/// the patch values. Throws InvalidBox for a box with non-positive area.
torch::Tensor gamma_paste(const torch::Tensor& patches, const torch::Tensor& boxes, int64_t height, int64_t width);

/// Same for single-channel masks: [E, p, p] -> [E, H, W].
torch::Tensor gamma_paste_masks(const torch::Tensor& masks, const torch::Tensor& boxes, int64_t height, int64_t width);

/// Bilinear crop of `image` [K, H, W] over `boxes` onto a p x p grid: [E, K, p, p].
torch::Tensor crop_resize(const torch::Tensor& image, const torch::Tensor& boxes, int64_t size);

/// clamp(1 - sum(prev seg masks) - sum(dyn masks), 0, 1). Mask stacks are [E, H, W].
torch::Tensor background_mask(const torch::Tensor& seg_prev_masks, const torch::Tensor& dyn_masks, int64_t height,
                              int64_t width);

/// M_back * I_prev with the mask broadcast over channels.
torch::Tensor background_pixels(const torch::Tensor& back_mask, const torch::Tensor& prev_image);

/// clamp(1 - M_back - sum(dyn masks), 0, 1).
torch::Tensor synthetic_mask(const torch::Tensor& back_mask, const torch::Tensor& dyn_masks);

/// clamp(I_back + I_obj + I_synth, 0, 1).
torch::Tensor compose_unrefined(const torch::Tensor& back, const torch::Tensor& obj, const torch::Tensor& synth);

/// Sum over the leading dimension, or zeros [H, W] for an empty stack.
torch::Tensor sum_masks(const torch::Tensor& masks, int64_t height, int64_t width, const torch::TensorOptions& options);

}  // namespace objpred::gen
