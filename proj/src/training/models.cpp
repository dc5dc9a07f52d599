#include "objpred/training/models.hpp"

#include "objpred/core/kv_config.hpp"
#include "objpred/core/types.hpp"

namespace objpred::train {

namespace {

seg::SegmenterConfig segmenter_config(const ModelConfig& c) {
    seg::SegmenterConfig s;
    s.channels = c.channels;
    s.image_size = c.image_size;
    s.score_threshold = c.score_threshold;
    return s;
}

dyn::DynamicsConfig dynamics_config(const ModelConfig& c) {
    dyn::DynamicsConfig d;
    d.channels = static_cast<int>(seg::patch_channels(c.channels));
    d.image_size = c.image_size;
    return d;
}

gen::Generator seeded_generator(const ModelConfig& c) {
    // Seeding here fixes the initialisation of every part constructed below.
    torch::manual_seed(c.seed);
    return gen::Generator(static_cast<int>(seg::patch_channels(c.channels)));
}

}  // namespace

Models::Models(const ModelConfig& c) : generator(seeded_generator(c)), config(c) {
    segmenter = seg::SegmenterNet(segmenter_config(c));
    dynamics = dyn::DynamicsNet(dynamics_config(c));
}

std::vector<torch::Tensor> Models::parameters() const {
    std::vector<torch::Tensor> out = segmenter->parameters();
    const auto d = dynamics->parameters();
    const auto g = generator.parameters();
    out.insert(out.end(), d.begin(), d.end());
    out.insert(out.end(), g.begin(), g.end());
    return out;
}

void Models::store(nn::Checkpoint& ckpt) const {
    ckpt.blobs["model.config"] = model_config_to_text(config);
    nn::store_module(ckpt, "segmenter.", *segmenter);
    nn::store_module(ckpt, "dynamics.", *dynamics);
    nn::store_module(ckpt, "decoder.", *generator.decoder);
    nn::store_module(ckpt, "inpainter.", *generator.inpainter);
    nn::store_module(ckpt, "refiner.", *generator.refiner);
}

void Models::restore_segmenter(const nn::Checkpoint& ckpt) { nn::restore_module(ckpt, "segmenter.", *segmenter); }

void Models::restore(const nn::Checkpoint& ckpt) {
    restore_segmenter(ckpt);
    nn::restore_module(ckpt, "dynamics.", *dynamics);
    nn::restore_module(ckpt, "decoder.", *generator.decoder);
    nn::restore_module(ckpt, "inpainter.", *generator.inpainter);
    nn::restore_module(ckpt, "refiner.", *generator.refiner);
}

std::string model_config_to_text(const ModelConfig& c) {
    KeyValueConfig kv;
    kv.set("model.channels", std::to_string(c.channels));
    kv.set("model.image_size", std::to_string(c.image_size));
    kv.set("model.score_threshold", std::to_string(c.score_threshold));
    kv.set("model.seed", std::to_string(c.seed));
    return kv.serialize();
}

ModelConfig model_config_from(const nn::Checkpoint& ckpt) {
    const auto it = ckpt.blobs.find("model.config");
    if (it == ckpt.blobs.end()) {
        throw MissingCheckpoint("checkpoint holds no model configuration (is it a segmenter-only checkpoint?)");
    }
    const KeyValueConfig kv = KeyValueConfig::parse(it->second);
    ModelConfig c;
    c.channels = static_cast<int>(kv.get_int("model.channels", c.channels));
    c.image_size = static_cast<int>(kv.get_int("model.image_size", c.image_size));
    c.score_threshold = kv.get_double("model.score_threshold", c.score_threshold);
    c.seed = static_cast<std::uint64_t>(kv.get_int("model.seed", 0));
    return c;
}

Models load_models(const std::filesystem::path& checkpoint) {
    if (!std::filesystem::exists(checkpoint)) {
        throw MissingCheckpoint("model checkpoint '" + checkpoint.string() + "' not found (run `train` first)");
    }
    const nn::Checkpoint ckpt = nn::Checkpoint::load(checkpoint);
    Models models(model_config_from(ckpt));
    models.restore(ckpt);
    return models;
}

}  // namespace objpred::train
