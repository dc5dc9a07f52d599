#include "objpred/generator/compositing.hpp"

#include "objpred/core/types.hpp"
#include "objpred/segmenter/roi_align.hpp"

namespace objpred::gen {

namespace F = torch::nn::functional;

torch::Tensor gamma_paste(const torch::Tensor& patches, const torch::Tensor& boxes, int64_t height, int64_t width) {
    if (patches.dim() != 4 || boxes.dim() != 2 || boxes.size(1) != 4 || patches.size(0) != boxes.size(0)) {
        throw ShapeError("gamma_paste: expected patches [E, K, p, p] and boxes [E, 4]");
    }
    const auto e = patches.size(0);
    if (e == 0) {
        return torch::zeros({0, patches.size(1), height, width}, patches.options());
    }
    const auto b = boxes.to(patches.scalar_type());
    {
        const auto d = b.detach();
        if (((d.select(1, 2) - d.select(1, 0)) <= 0).any().item<bool>() ||
            ((d.select(1, 3) - d.select(1, 1)) <= 0).any().item<bool>()) {
            throw InvalidBox("gamma_paste: box with non-positive area");
        }
    }
    const auto opts = patches.options();
    const auto xs = (torch::arange(width, opts) + 0.5).view({1, 1, width});
    const auto ys = (torch::arange(height, opts) + 0.5).view({1, height, 1});
    const auto x1 = b.select(1, 0).view({e, 1, 1}), y1 = b.select(1, 1).view({e, 1, 1});
    const auto bw = (b.select(1, 2) - b.select(1, 0)).view({e, 1, 1});
    const auto bh = (b.select(1, 3) - b.select(1, 1)).view({e, 1, 1});
    // Normalised patch coordinates in [-1, 1) for pixel centres inside the box.
    const auto gx = (2.0 * (xs - x1) / bw - 1.0).expand({e, height, width});
    const auto gy = (2.0 * (ys - y1) / bh - 1.0).expand({e, height, width});
    const auto inside = ((gx >= -1.0) & (gx < 1.0) & (gy >= -1.0) & (gy < 1.0)).detach().to(patches.scalar_type());
    const auto grid = torch::stack({gx, gy}, 3);
    const auto sampled = F::grid_sample(
        patches, grid, F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
    return sampled * inside.unsqueeze(1);
}

torch::Tensor gamma_paste_masks(const torch::Tensor& masks, const torch::Tensor& boxes, int64_t height, int64_t width) {
    return gamma_paste(masks.unsqueeze(1), boxes, height, width).squeeze(1);
}

torch::Tensor crop_resize(const torch::Tensor& image, const torch::Tensor& boxes, int64_t size) {
    return seg::roi_align(image, boxes.to(image.scalar_type()), 1.0, size);
}

torch::Tensor sum_masks(const torch::Tensor& masks, int64_t height, int64_t width, const torch::TensorOptions& options) {
    if (!masks.defined() || masks.size(0) == 0) {
        return torch::zeros({height, width}, options);
    }
    return masks.sum(0);
}

torch::Tensor background_mask(const torch::Tensor& seg_prev_masks, const torch::Tensor& dyn_masks, int64_t height,
                              int64_t width) {
    const auto opts = seg_prev_masks.defined() ? seg_prev_masks.options() : dyn_masks.options();
    return (1.0 - sum_masks(seg_prev_masks, height, width, opts) - sum_masks(dyn_masks, height, width, opts)).clamp(0.0, 1.0);
}

torch::Tensor background_pixels(const torch::Tensor& back_mask, const torch::Tensor& prev_image) {
    if (back_mask.sizes() != prev_image.sizes().slice(1)) {
        throw ShapeError("background_pixels: mask and image sizes differ");
    }
    return back_mask.unsqueeze(0) * prev_image;
}

torch::Tensor synthetic_mask(const torch::Tensor& back_mask, const torch::Tensor& dyn_masks) {
    return (1.0 - back_mask - sum_masks(dyn_masks, back_mask.size(0), back_mask.size(1), back_mask.options())).clamp(0.0, 1.0);
}

torch::Tensor compose_unrefined(const torch::Tensor& back, const torch::Tensor& obj, const torch::Tensor& synth) {
    return (back + obj + synth).clamp(0.0, 1.0);
}

}  // namespace objpred::gen
