#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "objpred/nn/checkpoint.hpp"
#include "objpred/pseudo_label/annotation_io.hpp"
#include "objpred/segmenter/seg_loss.hpp"
#include "objpred/worldgen/dataset.hpp"

namespace objpred::seg {

struct SegSample {
    std::string frame_id;
    torch::Tensor image;  // [3, H, W]
    SegTargets targets;
};

/// Frames of `split` that have a pseudo annotation, paired with it. Throws
/// MissingData when none of the split's frames are annotated.
std::vector<SegSample> load_seg_samples(const std::filesystem::path& dataset_root, const label::AnnotationSet& annotations,
                                        world::Split split = world::Split::Train);

struct PretrainConfig {
    int steps = 200;
    double learning_rate = 1e-3;
    int batch_size = 4;
    std::uint64_t seed = 0;
};

/// Adam on seg_loss.total. The frames used at step s depend only on (seed, s),
/// so a run resumed from a checkpoint continues exactly where it stopped.
class SegPretrainer {
public:
    SegPretrainer(SegmenterNet net, PretrainConfig config);

    /// One optimizer step; returns the mean total loss of the batch.
    double step(const std::vector<SegSample>& samples);

    /// Runs until `config.steps` steps have been taken in total.
    void run(const std::vector<SegSample>& samples, const std::function<void(int, double)>& on_step = {});

    /// Sample indices for a given step.
    [[nodiscard]] std::vector<std::size_t> batch_indices(int step, std::size_t n_samples) const;

    void store(nn::Checkpoint& ckpt) const;
    void restore(const nn::Checkpoint& ckpt);

    [[nodiscard]] int steps_done() const { return steps_done_; }
    [[nodiscard]] const std::vector<double>& losses() const { return losses_; }
    [[nodiscard]] SegmenterNet net() const { return net_; }

private:
    SegmenterNet net_;
    PretrainConfig config_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    int steps_done_ = 0;
    std::vector<double> losses_;
};

}  // namespace objpred::seg
