#pragma once

#include <torch/torch.h>

namespace objpred::seg {

inline constexpr int64_t kPatchSize = 14;

/// Bilinear RoI sampling. `features` is [C, h, w] (or [1, C, h, w]); `boxes`
/// are [N, 4] image-space (x1, y1, x2, y2). Samples sit at the centres of an
/// out_size x out_size grid over each box, mapped to feature space as
/// u = x * spatial_scale - 0.5; reads past the border clamp to the edge.
/// Differentiable in both `features` and `boxes`. Returns [N, C, out, out].
/// Throws InvalidBox for a box with non-positive width or height.
torch::Tensor roi_align(const torch::Tensor& features, const torch::Tensor& boxes, double spatial_scale,
                        int64_t out_size = kPatchSize);

/// Image-space sampling positions used by roi_align, [N, out, out, 2] as (x, y).
torch::Tensor roi_sample_points(const torch::Tensor& boxes, int64_t out_size = kPatchSize);

}  // namespace objpred::seg
