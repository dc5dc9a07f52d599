#include "objpred/evaluation/metrics.hpp"

#include "objpred/nn/tensor_util.hpp"

namespace objpred::eval {

namespace F = torch::nn::functional;

double mse(const Frame& pred, const Frame& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("mse: frame shapes differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        const double d = static_cast<double>(pred.pixels[i]) - target.pixels[i];
        sum += d * d;
    }
    return pred.pixels.empty() ? 0.0 : sum / static_cast<double>(pred.pixels.size());
}

double mse(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes()) {
        throw ShapeError("mse: tensor shapes differ");
    }
    return (pred.to(torch::kFloat64) - target.to(torch::kFloat64)).pow(2).mean().item<double>();
}

RandomConvPerceptual::RandomConvPerceptual(std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    const int64_t channels[] = {3, 16, 32, 32};
    for (int i = 0; i < 3; ++i) {
        const double scale = std::sqrt(2.0 / (channels[i] * 9.0));
        weights_.push_back(at::normal(0.0, scale, {channels[i + 1], channels[i], 3, 3}, gen, torch::kFloat64));
        biases_.push_back(at::normal(0.0, 0.1, {channels[i + 1]}, gen, torch::kFloat64));
    }
}

double RandomConvPerceptual::distance(const torch::Tensor& a, const torch::Tensor& b) const {
    if (a.sizes() != b.sizes()) {
        throw ShapeError("perceptual: image shapes differ");
    }
    torch::NoGradGuard no_grad;
    auto x = torch::stack({a, b}).to(torch::kFloat64);
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        x = torch::relu(F::conv2d(x, weights_[i], F::Conv2dFuncOptions().bias(biases_[i]).padding(1).stride(i == 0 ? 1 : 2)));
        const auto unit = x / (x.pow(2).sum(1, true).sqrt() + 1e-10);
        total += (0.5 * (unit[0] - unit[1]).pow(2).sum(0)).mean().item<double>();
    }
    return total / static_cast<double>(weights_.size());
}

double perceptual(const Frame& pred, const Frame& target, const PerceptualMetric& metric) {
    return metric.distance(nn::frame_to_tensor(pred), nn::frame_to_tensor(target));
}

}  // namespace objpred::eval
