#pragma once

#include <vector>

#include <torch/torch.h>

#include "objpred/dynamics/association.hpp"
#include "objpred/dynamics/dynamics.hpp"
#include "objpred/segmenter/segmenter.hpp"

namespace objpred::dyn {

/// Sum over aligned rows of mean((m_a * f_a - m_b * f_b)^2) + ||(box_a - box_b) / image_size||^2.
/// Masks broadcast over the feature channels.
torch::Tensor consistency_terms(const torch::Tensor& boxes_a, const torch::Tensor& features_a, const torch::Tensor& masks_a,
                                const torch::Tensor& boxes_b, const torch::Tensor& features_b, const torch::Tensor& masks_b,
                                double image_size);

/// Consistency between predicted entities and the detections they were
/// associated with; `match[i]` indexes `detections` or is -1 (contributes 0).
torch::Tensor consistency_loss(const Entities& predicted, const seg::DetectionBatch& detections,
                               const std::vector<int>& match, double image_size);

/// Centroid association of entities with a frame's detections.
Association associate_entities(const Entities& entities, const seg::DetectionBatch& detections,
                               double max_distance = 20.0);

}  // namespace objpred::dyn
