#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "objpred/core/kv_config.hpp"
#include "objpred/pseudo_label/annotation_io.hpp"
#include "objpred/training/losses.hpp"
#include "objpred/training/models.hpp"
#include "objpred/training/rollout.hpp"

namespace objpred::train {

struct TrainConfig {
    LossWeights weights;
    int rollout_length = 3;
    double learning_rate = 1e-3;
    double dynamics_lr_scale = 0.1;  // phase-2 dynamics learning rate relative to the others
    bool cosine_decay = true;        // phase-2 learning rates follow a half cosine down to zero
    int steps = 500;                // phase 2
    int batch_size = 2;             // sequences per phase-2 step
    int pretrain_steps = 200;       // phase 1
    int pretrain_batch_size = 4;
    int autoencoder_steps = 1000;   // dynamics warm-start between the phases
    int autoencoder_batch_size = 32;
    double autoencoder_learning_rate = 1e-4;
    double appearance_weight = 0.0;  // patch-decoder term of the warm-start; 0 leaves the decoder untouched
    double grad_clip = 5.0;         // global norm; <= 0 disables
    int checkpoint_every = 100;
    int val_every = 50;
    double score_threshold = 0.5;
    int channels = 32;
    std::uint64_t seed = 0;

    void validate() const;
    /// Reads `train.*` keys; absent keys keep their defaults.
    static TrainConfig from_kv(const KeyValueConfig& kv);
    [[nodiscard]] KeyValueConfig to_kv() const;
    [[nodiscard]] ModelConfig model_config(int image_size) const;
};

struct TrainData {
    std::vector<TrainSequence> train;
    std::vector<TrainSequence> val;
    int image_size = 64;
};

/// Train split with pseudo targets and the val split without.
TrainData load_train_data(const std::filesystem::path& dataset_root, const label::AnnotationSet& annotations);

struct StepLog {
    int step = 0;
    LossBundle losses;
    int sequences = 0;
    int skipped = 0;
};

struct TrainResult {
    std::vector<double> pretrain_losses;
    std::vector<double> autoencoder_losses;
    std::vector<StepLog> steps;
    std::vector<std::pair<int, double>> val_l_pred;  // (phase-2 step, value)
    int total_skipped = 0;
};

/// Mean l_pred of single-frame rollouts over `sequences`, no gradient.
double validation_l_pred(Models& models, const std::vector<TrainSequence>& sequences, const TrainConfig& config);

/// Fits encode/decode of the dynamics model to segmenter detections on the
/// training frames; with appearance_weight > 0 the patch decoder is also fitted
/// to the frame pixels under them. Returns the loss per step.
std::vector<double> autoencoder_warm_start(Models& models, const std::vector<TrainSequence>& sequences,
                                           const TrainConfig& config);

/// Mean round-trip box error (pixels, mean absolute over coordinates) of
/// encode/decode on detections of `sequences`.
double autoencoder_box_error(Models& models, const std::vector<TrainSequence>& sequences, double score_threshold);

using LogFn = std::function<void(const std::string&)>;

/// Phase 1 (segmenter pre-training) unless `segmenter_checkpoint` is given,
/// then the dynamics warm-start and phase 2 (joint training of everything on
/// the combined loss). Writes `segmenter.ckpt`, `model.ckpt`, `metrics.csv`,
/// `val_loss.csv` and `pretrain_loss.csv` under `out_dir` when it is non-empty.
TrainResult train(const TrainConfig& config, const TrainData& data, Models& models, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& segmenter_checkpoint = std::nullopt,
                  const LogFn& log = {});

/// Config hash stored in checkpoints.
std::uint64_t config_hash(const TrainConfig& config);

}  // namespace objpred::train
