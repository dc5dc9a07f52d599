#include "objpred/training/rollout.hpp"

#include "objpred/dynamics/consistency.hpp"
#include "objpred/generator/compositing.hpp"

namespace objpred::train {

torch::Tensor detection_union_mask(const seg::DetectionBatch& detections, int64_t height, int64_t width) {
    if (detections.size() == 0) {
        return torch::zeros({height, width});
    }
    torch::NoGradGuard no_grad;
    const auto pasted = gen::gamma_paste_masks(detections.masks, detections.boxes, height, width);
    return (std::get<0>(pasted.max(0)) > 0.5).to(pasted.scalar_type());
}

RolloutResult rollout(Models& models, const TrainSequence& sequence, const RolloutOptions& options) {
    if (options.rollout_length < 1) {
        throw InvalidConfig("rollout_length must be at least 1");
    }
    if (sequence.frames.size(0) < options.rollout_length + 1) {
        throw ShapeError("sequence '" + sequence.name + "' is shorter than rollout_length + 1");
    }
    const int64_t h = sequence.frames.size(2), w = sequence.frames.size(3);
    const double image_size = models.config.image_size;
    RolloutResult result;

    const auto first = models.segmenter->detect_batch(sequence.frames[0], options.score_threshold);
    if (first.size() == 0) {
        result.skipped = true;
        result.skip_reason = "no detections on frame 0";
        return result;
    }
    result.initial = dyn::Entities::from_detections(first);

    dyn::Entities current = result.initial;
    torch::Tensor prev_image = sequence.frames[0];
    torch::Tensor prev_masks = gen::gamma_paste_masks(current.masks, current.boxes, h, w);
    torch::Tensor final_sum, unrefined_sum, masked_sum, con_sum;

    for (int k = 1; k <= options.rollout_length; ++k) {
        RolloutStep step;
        step.predicted = models.dynamics->step(current);
        step.detections = models.segmenter->detect_batch(sequence.frames[k], options.score_threshold);
        step.association = dyn::associate_entities(step.predicted, step.detections, options.max_match_distance);
        const auto con = dyn::consistency_loss(step.predicted, step.detections, step.association.match, image_size);
        step.composite = models.generator.generate(prev_image, prev_masks, step.predicted);
        const auto u_seg = detection_union_mask(step.detections, h, w);
        const PredictionTerms p =
            prediction_loss(step.composite.final, step.composite.unrefined, sequence.frames[k], u_seg);

        final_sum = final_sum.defined() ? final_sum + p.final : p.final;
        unrefined_sum = unrefined_sum.defined() ? unrefined_sum + p.unrefined : p.unrefined;
        masked_sum = masked_sum.defined() ? masked_sum + p.masked : p.masked;
        con_sum = con_sum.defined() ? con_sum + con : con;

        prev_image = step.composite.final;
        prev_masks = step.composite.dyn_masks;
        current = step.predicted;
        result.steps.push_back(std::move(step));
    }

    torch::Tensor seg_sum;
    int annotated = 0;
    for (int t = 0; t < options.rollout_length && t < static_cast<int>(sequence.targets.size()); ++t) {
        if (!sequence.targets[static_cast<std::size_t>(t)]) {
            continue;
        }
        const auto l = seg::seg_loss(*models.segmenter, sequence.frames[t], *sequence.targets[static_cast<std::size_t>(t)]).total();
        seg_sum = seg_sum.defined() ? seg_sum + l : l;
        ++annotated;
    }
    const double steps = options.rollout_length;
    PredictionTerms pred{final_sum / steps, unrefined_sum / steps, masked_sum / steps};
    result.losses = combined_loss(pred, con_sum / steps,
                                  annotated > 0 ? seg_sum / static_cast<double>(annotated) : final_sum * 0.0,
                                  options.weights);
    return result;
}

Prediction predict(Models& models, const torch::Tensor& frame0, int horizon, double score_threshold) {
    const int64_t h = frame0.size(1), w = frame0.size(2);
    Prediction out;
    out.initial_detections = models.segmenter->detect_batch(frame0, score_threshold);
    dyn::Entities current = dyn::Entities::from_detections(out.initial_detections);
    torch::Tensor prev_image = frame0;
    torch::Tensor prev_masks = current.size() > 0 ? gen::gamma_paste_masks(current.masks, current.boxes, h, w)
                                                  : torch::zeros({0, h, w}, frame0.options());
    for (int k = 1; k <= horizon; ++k) {
        dyn::Entities next = models.dynamics->step(current);
        gen::CompositeSet c = models.generator.generate(prev_image, prev_masks, next);
        prev_image = c.final;
        prev_masks = c.dyn_masks;
        out.frames.push_back(c.final);
        out.entities.push_back(next);
        out.composites.push_back(std::move(c));
        current = std::move(next);
    }
    return out;
}

}  // namespace objpred::train
