#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "objpred/dynamics/dynamics.hpp"
#include "objpred/generator/networks.hpp"
#include "objpred/nn/checkpoint.hpp"
#include "objpred/segmenter/segmenter.hpp"

namespace objpred::train {

struct ModelConfig {
    int channels = 32;
    int image_size = 64;
    double score_threshold = 0.5;
    std::uint64_t seed = 0;  // parameter initialisation
};

/// Every trainable part of the predictor.
struct Models {
    seg::SegmenterNet segmenter{nullptr};
    dyn::DynamicsNet dynamics{nullptr};
    gen::Generator generator;
    ModelConfig config;

    explicit Models(const ModelConfig& config);

    [[nodiscard]] std::vector<torch::Tensor> parameters() const;
    void store(nn::Checkpoint& ckpt) const;
    /// Restores the segmenter only, or everything.
    void restore_segmenter(const nn::Checkpoint& ckpt);
    void restore(const nn::Checkpoint& ckpt);
};

std::string model_config_to_text(const ModelConfig& config);
/// Throws MissingCheckpoint when the checkpoint carries no model configuration.
ModelConfig model_config_from(const nn::Checkpoint& ckpt);

/// Builds the models described by a full checkpoint and loads its weights.
Models load_models(const std::filesystem::path& checkpoint);

}  // namespace objpred::train
