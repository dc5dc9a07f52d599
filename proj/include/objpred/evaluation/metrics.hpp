#pragma once

#include <memory>

#include <torch/torch.h>

#include "objpred/core/types.hpp"

namespace objpred::eval {

/// Mean over pixels and channels of the squared difference.
double mse(const Frame& pred, const Frame& target);
double mse(const torch::Tensor& pred, const torch::Tensor& target);

/// Pluggable perceptual distance between two [3, H, W] images.
class PerceptualMetric {
public:
    virtual ~PerceptualMetric() = default;
    [[nodiscard]] virtual double distance(const torch::Tensor& a, const torch::Tensor& b) const = 0;
};

/// Three random conv layers with a fixed seed. At every layer the features
/// are normalised across channels per pixel; the distance is the mean over
/// layers and pixels of (1 - cosine similarity).
class RandomConvPerceptual final : public PerceptualMetric {
public:
    explicit RandomConvPerceptual(std::uint64_t seed = 1234);
    [[nodiscard]] double distance(const torch::Tensor& a, const torch::Tensor& b) const override;

private:
    std::vector<torch::Tensor> weights_;
    std::vector<torch::Tensor> biases_;
};

double perceptual(const Frame& pred, const Frame& target, const PerceptualMetric& metric);

}  // namespace objpred::eval
