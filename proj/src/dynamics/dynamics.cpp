#include "objpred/dynamics/dynamics.hpp"

#include <cmath>

namespace objpred::dyn {

namespace {

constexpr int64_t kPatch = seg::kPatchSize;
constexpr double kMinLogSize = -3.0;
constexpr double kMaxLogSize = 1.4;

}  // namespace

Entities Entities::from_detections(const seg::DetectionBatch& detections) {
    Entities e;
    for (int64_t i = 0; i < detections.size(); ++i) {
        e.ids.push_back(static_cast<int>(i));
    }
    e.boxes = detections.boxes;
    e.features = detections.features;
    e.masks = detections.masks;
    e.origin = Origin::Segmented;
    return e;
}

Entities Entities::permuted(const std::vector<int64_t>& order) const {
    Entities out;
    const auto idx = torch::tensor(order, torch::kInt64);
    for (int64_t i : order) {
        out.ids.push_back(ids.at(static_cast<std::size_t>(i)));
    }
    out.boxes = boxes.index_select(0, idx);
    out.features = features.index_select(0, idx);
    out.masks = masks.index_select(0, idx);
    out.origin = origin;
    return out;
}

DynamicsNetImpl::DynamicsNetImpl(DynamicsConfig config) : config_(config) {
    const int64_t c = config_.channels;
    const int64_t patch_in = c * kPatch * kPatch + kPatch * kPatch;
    enc_box_ = register_module("enc_box", torch::nn::Linear(4, config_.box_code));
    enc_patch_ = register_module("enc_patch", torch::nn::Linear(patch_in, config_.latent - config_.box_code));
    pred1_ = register_module("pred1", torch::nn::Linear(config_.latent, config_.hidden));
    pred2_ = register_module("pred2", torch::nn::Linear(config_.hidden, config_.hidden));
    pred3_ = register_module("pred3", torch::nn::Linear(config_.hidden, config_.hidden));
    pred4_ = register_module("pred4", torch::nn::Linear(config_.hidden, config_.latent));
    dec_box_ = register_module("dec_box", torch::nn::Linear(config_.latent, 4));
    dec_mask_ = register_module("dec_mask", torch::nn::Linear(config_.latent, kPatch * kPatch));
    dec_features_ = register_module("dec_features", torch::nn::Linear(config_.latent, c * kPatch * kPatch));

    torch::NoGradGuard no_grad;
    pred4_->weight.zero_();
    pred4_->bias.zero_();
}

torch::Tensor DynamicsNetImpl::encode(const torch::Tensor& boxes, const torch::Tensor& features, const torch::Tensor& masks) {
    const double size = config_.image_size;
    const auto gated = (features * masks.unsqueeze(1)).flatten(1);
    const auto patch = torch::cat({gated, masks.flatten(1)}, 1);
    return torch::tanh(torch::cat({enc_box_(boxes / size), enc_patch_(patch)}, 1));
}

torch::Tensor DynamicsNetImpl::predict(const torch::Tensor& z) {
    auto h = torch::relu(pred1_(z));
    h = torch::relu(pred2_(h));
    h = torch::relu(pred3_(h));
    return z + pred4_(h);
}

DynamicsNetImpl::Decoded DynamicsNetImpl::decode(const torch::Tensor& z) {
    const double size = config_.image_size;
    const auto raw = dec_box_(z);
    const auto center = torch::sigmoid(raw.slice(1, 0, 2)) * size;
    // Log-size relative to a quarter of the image.
    const auto extent = torch::exp(raw.slice(1, 2, 4).clamp(kMinLogSize, kMaxLogSize)) * (size / 4.0);
    Decoded out;
    out.boxes = torch::cat({center - 0.5 * extent, center + 0.5 * extent}, 1);
    out.masks = torch::sigmoid(dec_mask_(z)).view({-1, kPatch, kPatch});
    out.features = dec_features_(z).view({-1, config_.channels, kPatch, kPatch});
    return out;
}

namespace {

/// Ridge solution W of [z, 1] W ~ targets, returned as (weight [T, K], bias [T]).
std::pair<torch::Tensor, torch::Tensor> ridge(const torch::Tensor& z, const torch::Tensor& targets, double lambda) {
    const auto design = torch::cat({z, torch::ones({z.size(0), 1}, z.options())}, 1);
    auto gram = design.t().mm(design);
    gram.diagonal().add_(lambda);
    const auto w = torch::linalg_solve(gram, design.t().mm(targets));
    return {w.slice(0, 0, z.size(1)).t().contiguous(), w[z.size(1)].contiguous()};
}

}  // namespace

void DynamicsNetImpl::fit_autoencoder(const torch::Tensor& boxes, const torch::Tensor& features, const torch::Tensor& masks) {
    torch::NoGradGuard no_grad;
    const auto dtype = enc_patch_->weight.scalar_type();
    const auto f = features.to(torch::kFloat64), m = masks.to(torch::kFloat64), b = boxes.to(torch::kFloat64);
    const int64_t n = f.size(0), c = config_.channels;
    const int64_t learned = std::max<int64_t>(c - seg::kAppearanceChannels, 0);
    const int64_t per_channel = kPatch * kPatch;

    // Encoder input, centred; each block rescaled to a fixed total variance.
    const auto x = torch::cat({(f * m.unsqueeze(1)).flatten(1), m.flatten(1)}, 1);
    const auto mean = x.mean(0);
    const auto centred = x - mean;
    auto scale = torch::ones({x.size(1)}, x.options());
    const std::vector<std::pair<int64_t, int64_t>> blocks{
        {0, learned * per_channel}, {learned * per_channel, c * per_channel}, {c * per_channel, x.size(1)}};
    const double block_weight[] = {1.0, 4.0, 1.0};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto [lo, hi] = blocks[i];
        if (hi > lo) {
            const double var = centred.slice(1, lo, hi).pow(2).sum().item<double>() / std::max<int64_t>(n, 1);
            scale.slice(0, lo, hi).fill_(std::sqrt(block_weight[i] / std::max(var, 1e-12)));
        }
    }
    const int64_t k = config_.latent - config_.box_code;
    const auto svd = torch::linalg_svd(centred * scale, false);
    auto directions = torch::zeros({k, x.size(1)}, x.options());
    const int64_t rank = std::min<int64_t>(k, std::get<2>(svd).size(0));
    directions.slice(0, 0, rank).copy_(std::get<2>(svd).slice(0, 0, rank));
    auto weight = directions * scale;
    // Keep the codes in the near-linear range of tanh.
    const double spread = centred.mm(weight.t()).std().item<double>();
    weight = weight * (0.5 / std::max(spread, 1e-12));
    enc_patch_->weight.copy_(weight.to(dtype));
    enc_patch_->bias.copy_((-weight.mv(mean)).to(dtype));

    const auto z = encode(b.to(dtype), f.to(dtype), m.to(dtype)).to(torch::kFloat64);
    const double size = config_.image_size;
    const auto centre = (0.5 * (b.slice(1, 0, 2) + b.slice(1, 2, 4)) / size).clamp(1e-3, 1.0 - 1e-3);
    const auto extent = ((b.slice(1, 2, 4) - b.slice(1, 0, 2)) / (size / 4.0)).log().clamp(kMinLogSize, kMaxLogSize);
    const auto box_raw = torch::cat({torch::log(centre / (1.0 - centre)), extent}, 1);
    const auto mc = m.flatten(1).clamp(0.01, 0.99);
    constexpr double kLambda = 1e-3;
    for (auto [layer, target] : {std::pair{&dec_box_, box_raw}, std::pair{&dec_mask_, torch::log(mc / (1.0 - mc))},
                                 std::pair{&dec_features_, f.flatten(1)}}) {
        const auto [w, bias] = ridge(z, target, kLambda);
        (*layer)->weight.copy_(w.to(dtype));
        (*layer)->bias.copy_(bias.to(dtype));
    }
}

Entities DynamicsNetImpl::step(const Entities& entities) {
    Entities out;
    out.ids = entities.ids;
    out.origin = Origin::Predicted;
    if (entities.size() == 0) {
        out.boxes = entities.boxes;
        out.features = entities.features;
        out.masks = entities.masks;
        return out;
    }
    const Decoded d = decode(predict(encode(entities.boxes, entities.features, entities.masks)));
    out.boxes = d.boxes;
    out.features = d.features;
    out.masks = d.masks;
    return out;
}

}  // namespace objpred::dyn
