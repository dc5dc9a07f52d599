#include "objpred/generator/networks.hpp"

#include "objpred/generator/compositing.hpp"

namespace objpred::gen {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3(int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor batched(const torch::Tensor& x) { return x.dim() == 3 ? x.unsqueeze(0) : x; }

}  // namespace

PatchDecoderImpl::PatchDecoderImpl(int channels, int hidden) {
    conv1_ = register_module("conv1", conv3(channels + 1, hidden));
    conv2_ = register_module("conv2", conv3(hidden, hidden));
    conv3_ = register_module("conv3", conv3(hidden, 3));
}

torch::Tensor PatchDecoderImpl::forward(const torch::Tensor& features, const torch::Tensor& masks) {
    auto x = torch::cat({features, masks.unsqueeze(1)}, 1);
    x = torch::relu(conv1_(x));
    x = torch::relu(conv2_(x));
    return torch::sigmoid(conv3_(x));
}

HourglassImpl::HourglassImpl(int channels) {
    skip0_ = register_module("skip0", conv3(channels, channels));
    down1_ = register_module("down1", conv3(channels, channels));
    skip1_ = register_module("skip1", conv3(channels, channels));
    down2_ = register_module("down2", conv3(channels, channels));
    bottom_ = register_module("bottom", conv3(channels, channels));
    up1_ = register_module("up1", conv3(channels, channels));
    up0_ = register_module("up0", conv3(channels, channels));
}

torch::Tensor HourglassImpl::forward(const torch::Tensor& x) {
    const auto up = [](const torch::Tensor& t) {
        return F::interpolate(t, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
    };
    const auto s0 = torch::relu(skip0_(x));
    const auto d1 = torch::relu(down1_(F::max_pool2d(x, F::MaxPool2dFuncOptions(2))));
    const auto s1 = torch::relu(skip1_(d1));
    const auto d2 = torch::relu(down2_(F::max_pool2d(d1, F::MaxPool2dFuncOptions(2))));
    const auto b = torch::relu(bottom_(d2));
    const auto u1 = torch::relu(up1_(up(b) + s1));
    return torch::relu(up0_(up(u1) + s0));
}

InpainterImpl::InpainterImpl(int channels, int stacks) {
    stem_ = register_module("stem", conv3(6, channels));
    for (int i = 0; i < stacks; ++i) {
        stacks_.push_back(register_module("stack" + std::to_string(i), Hourglass(channels)));
    }
    head_ = register_module("head", conv3(channels, 3));
}

torch::Tensor InpainterImpl::forward(const torch::Tensor& obj, const torch::Tensor& back) {
    const bool single = obj.dim() == 3;
    auto x = torch::relu(stem_(torch::cat({batched(obj), batched(back)}, 1)));
    for (auto& stack : stacks_) {
        x = x + stack(x);
    }
    const auto out = torch::sigmoid(head_(x));
    return single ? out.squeeze(0) : out;
}

RefinerImpl::RefinerImpl(int hidden) {
    conv1_ = register_module("conv1", conv3(3, hidden));
    conv2_ = register_module("conv2", conv3(hidden, hidden));
    conv3_ = register_module("conv3", conv3(hidden, 3));
    torch::NoGradGuard no_grad;
    conv3_->weight.zero_();
    conv3_->bias.zero_();
}

torch::Tensor RefinerImpl::forward(const torch::Tensor& image) {
    const bool single = image.dim() == 3;
    const auto x = batched(image);
    auto h = torch::relu(conv1_(x));
    h = torch::relu(conv2_(h));
    const auto out = (x + conv3_(h)).clamp(0.0, 1.0);
    return single ? out.squeeze(0) : out;
}

std::pair<torch::Tensor, torch::Tensor> compose_objects(PatchDecoderImpl& decoder, const dyn::Entities& entities,
                                                        int64_t height, int64_t width) {
    if (entities.size() == 0) {
        const auto opts = entities.boxes.defined() ? entities.boxes.options() : torch::TensorOptions(torch::kFloat32);
        return {torch::zeros({3, height, width}, opts), torch::zeros({0, height, width}, opts)};
    }
    const auto pixels = decoder.forward(entities.features, entities.masks);  // [E, 3, p, p]
    const auto masked = pixels * entities.masks.unsqueeze(1);
    const auto masks = gamma_paste_masks(entities.masks, entities.boxes, height, width);
    // Overlapping entities share a pixel instead of adding up past full intensity.
    const auto coverage = masks.sum(0).clamp_min(1.0);
    const auto obj = gamma_paste(masked, entities.boxes, height, width).sum(0) / coverage;
    return {obj, masks};
}

Generator::Generator(int channels) : decoder(channels), inpainter(32, 2), refiner(32) {}

CompositeSet Generator::generate(const torch::Tensor& prev_image, const torch::Tensor& seg_prev_masks,
                                 const dyn::Entities& predicted) {
    const int64_t h = prev_image.size(1), w = prev_image.size(2);
    CompositeSet c;
    std::tie(c.obj, c.dyn_masks) = compose_objects(*decoder, predicted, h, w);
    c.obj = c.obj.to(prev_image.scalar_type());
    c.seg_prev_masks = seg_prev_masks.defined() ? seg_prev_masks : torch::zeros({0, h, w}, prev_image.options());
    c.back_mask = background_mask(c.seg_prev_masks, c.dyn_masks, h, w);
    c.back = background_pixels(c.back_mask, prev_image);
    c.synth_mask = synthetic_mask(c.back_mask, c.dyn_masks);
    c.synth = c.synth_mask.unsqueeze(0) * inpainter->forward(c.obj, c.back);
    c.unrefined = compose_unrefined(c.back, c.obj, c.synth);
    c.final = refiner->forward(c.unrefined);
    return c;
}

std::vector<torch::Tensor> Generator::parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& m : {decoder->parameters(), inpainter->parameters(), refiner->parameters()}) {
        out.insert(out.end(), m.begin(), m.end());
    }
    return out;
}

void Generator::to(torch::ScalarType dtype) {
    decoder->to(dtype);
    inpainter->to(dtype);
    refiner->to(dtype);
}

}  // namespace objpred::gen
