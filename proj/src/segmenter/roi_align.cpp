#include "objpred/segmenter/roi_align.hpp"

#include "objpred/core/types.hpp"

namespace objpred::seg {

namespace F = torch::nn::functional;

torch::Tensor roi_sample_points(const torch::Tensor& boxes, int64_t out_size) {
    const auto opts = boxes.options();
    const auto steps = (torch::arange(out_size, opts) + 0.5) / static_cast<double>(out_size);  // [out]
    const auto x1 = boxes.select(1, 0).unsqueeze(1), y1 = boxes.select(1, 1).unsqueeze(1);
    const auto w = (boxes.select(1, 2) - boxes.select(1, 0)).unsqueeze(1);
    const auto h = (boxes.select(1, 3) - boxes.select(1, 1)).unsqueeze(1);
    const auto xs = x1 + steps.unsqueeze(0) * w;  // [N, out]
    const auto ys = y1 + steps.unsqueeze(0) * h;
    const auto n = boxes.size(0);
    return torch::stack({xs.unsqueeze(1).expand({n, out_size, out_size}), ys.unsqueeze(2).expand({n, out_size, out_size})},
                        3);
}

torch::Tensor roi_align(const torch::Tensor& features, const torch::Tensor& boxes, double spatial_scale,
                        int64_t out_size) {
    const auto fmap = features.dim() == 4 ? features : features.unsqueeze(0);
    if (fmap.dim() != 4 || fmap.size(0) != 1) {
        throw ShapeError("roi_align: features must be [C, h, w] or [1, C, h, w]");
    }
    if (boxes.dim() != 2 || boxes.size(1) != 4) {
        throw ShapeError("roi_align: boxes must be [N, 4]");
    }
    const auto n = boxes.size(0);
    if (n == 0) {
        return torch::zeros({0, fmap.size(1), out_size, out_size}, fmap.options());
    }
    {
        const auto b = boxes.detach();
        const bool degenerate = ((b.select(1, 2) - b.select(1, 0)) <= 0).any().item<bool>() ||
                                ((b.select(1, 3) - b.select(1, 1)) <= 0).any().item<bool>();
        if (degenerate) {
            throw InvalidBox("roi_align: box with non-positive area");
        }
    }
    const double h = static_cast<double>(fmap.size(2));
    const double w = static_cast<double>(fmap.size(3));
    // grid_sample (align_corners=false) reads index u at normalised 2(u + 0.5)/w - 1.
    const auto pts = roi_sample_points(boxes.to(fmap.scalar_type()), out_size);
    const auto gx = pts.select(3, 0) * (2.0 * spatial_scale / w) - 1.0;
    const auto gy = pts.select(3, 1) * (2.0 * spatial_scale / h) - 1.0;
    const auto grid = torch::stack({gx, gy}, 3);  // [N, out, out, 2]
    const auto input = fmap.expand({n, fmap.size(1), fmap.size(2), fmap.size(3)});
    return F::grid_sample(input, grid,
                          F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
}

}  // namespace objpred::seg
