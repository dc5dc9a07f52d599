#include "objpred/nn/tensor_util.hpp"

#include <string>

namespace objpred::nn {

torch::Tensor frame_to_tensor(const Frame& frame) {
    auto t = torch::from_blob(const_cast<float*>(frame.pixels.data()), {frame.height, frame.width, 3}, torch::kFloat32);
    return t.permute({2, 0, 1}).contiguous().clone();
}

Frame tensor_to_frame(const torch::Tensor& image) {
    expect_dims(image, 3, "tensor_to_frame");
    const auto hwc = image.detach().to(torch::kFloat32).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
    Frame f(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)));
    std::copy_n(hwc.data_ptr<float>(), f.pixels.size(), f.pixels.begin());
    return f;
}

torch::Tensor mask_to_tensor(const Mask& mask) {
    auto t = torch::empty({mask.height, mask.width}, torch::kFloat32);
    float* p = t.data_ptr<float>();
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        p[i] = mask.data[i] ? 1.0f : 0.0f;
    }
    return t;
}

torch::Tensor boxes_to_tensor(const std::vector<Box>& boxes) {
    auto t = torch::empty({static_cast<int64_t>(boxes.size()), 4}, torch::kFloat32);
    auto a = t.accessor<float, 2>();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        a[i][0] = static_cast<float>(boxes[i].x1);
        a[i][1] = static_cast<float>(boxes[i].y1);
        a[i][2] = static_cast<float>(boxes[i].x2);
        a[i][3] = static_cast<float>(boxes[i].y2);
    }
    return t;
}

Box tensor_to_box(const torch::Tensor& box) {
    const auto b = box.detach().to(torch::kFloat64).contiguous();
    const double* p = b.data_ptr<double>();
    return {p[0], p[1], p[2], p[3]};
}

torch::Tensor box_centers(const torch::Tensor& boxes) {
    return torch::stack({(boxes.select(1, 0) + boxes.select(1, 2)) * 0.5, (boxes.select(1, 1) + boxes.select(1, 3)) * 0.5},
                        1);
}

void expect_dims(const torch::Tensor& t, int64_t dims, const char* what) {
    if (t.dim() != dims) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(dims) + "-d tensor, got " +
                         std::to_string(t.dim()) + "-d");
    }
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace objpred::nn
