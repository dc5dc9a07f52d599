#pragma once

#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "objpred/dynamics/association.hpp"
#include "objpred/dynamics/dynamics.hpp"
#include "objpred/generator/networks.hpp"
#include "objpred/segmenter/seg_loss.hpp"
#include "objpred/training/losses.hpp"
#include "objpred/training/models.hpp"

namespace objpred::train {

/// One training sequence: frames [T, 3, H, W] and the pseudo targets of the
/// annotated frames (unset for frames without an annotation).
struct TrainSequence {
    std::string name;
    torch::Tensor frames;
    std::vector<std::optional<seg::SegTargets>> targets;
};

struct RolloutOptions {
    int rollout_length = 3;
    LossWeights weights;
    double score_threshold = 0.5;
    double max_match_distance = 20.0;
};

struct RolloutStep {
    dyn::Entities predicted;
    seg::DetectionBatch detections;  // segmenter on the true frame of this step
    dyn::Association association;
    gen::CompositeSet composite;
};

struct RolloutResult {
    bool skipped = false;
    std::string skip_reason;
    dyn::Entities initial;
    std::vector<RolloutStep> steps;
    LossTerms losses;  // each term averaged over the rollout steps
};

/// Binarised union of a frame's pasted detection masks: [H, W] in {0, 1}, no gradient.
torch::Tensor detection_union_mask(const seg::DetectionBatch& detections, int64_t height, int64_t width);

/// Training rollout: detect on frame 0, then for k = 1..L step the dynamics
/// on its own previous output, detect on true frame k for the consistency
/// target, generate frame k from the previous generated frame (frame 0 at
/// k = 1) and score it against true frame k. l_seg averages seg_loss over the
/// annotated frames 0..L-1.
RolloutResult rollout(Models& models, const TrainSequence& sequence, const RolloutOptions& options);

/// Test-time rollout from a single frame: no access to any later frame.
struct Prediction {
    seg::DetectionBatch initial_detections;
    std::vector<dyn::Entities> entities;   // per predicted step
    std::vector<gen::CompositeSet> composites;
    std::vector<torch::Tensor> frames;     // generated frames 1..horizon, [3, H, W]
};

Prediction predict(Models& models, const torch::Tensor& frame0, int horizon, double score_threshold);

}  // namespace objpred::train
