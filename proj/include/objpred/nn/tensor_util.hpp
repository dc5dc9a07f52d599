#pragma once

#include <torch/torch.h>

#include "objpred/core/types.hpp"

namespace objpred::nn {

/// HWC frame -> float tensor [3, H, W].
torch::Tensor frame_to_tensor(const Frame& frame);

/// Tensor [3, H, W] -> frame, clamped to [0, 1].
Frame tensor_to_frame(const torch::Tensor& image);

/// Binary mask -> float tensor [H, W].
torch::Tensor mask_to_tensor(const Mask& mask);

/// Boxes as a float tensor [N, 4].
torch::Tensor boxes_to_tensor(const std::vector<Box>& boxes);
Box tensor_to_box(const torch::Tensor& box);

/// Centre of each row of a [N, 4] box tensor as [N, 2].
torch::Tensor box_centers(const torch::Tensor& boxes);

/// Throws ShapeError unless `t` has exactly `dims` dimensions.
void expect_dims(const torch::Tensor& t, int64_t dims, const char* what);

/// splitmix64 finaliser, used to derive per-step seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace objpred::nn
