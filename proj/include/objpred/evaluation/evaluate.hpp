#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "objpred/evaluation/metrics.hpp"
#include "objpred/generator/networks.hpp"
#include "objpred/training/models.hpp"
#include "objpred/worldgen/dataset.hpp"

namespace objpred::eval {

struct EvalReport {
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    double perceptual_mean = 0.0;
    double perceptual_stderr = 0.0;
    double seg_miou = 0.0;
    double box_l2_mean = 0.0;  // px, centroid distance after GT association
    double baseline_mse_mean = 0.0;
    double baseline_mse_stderr = 0.0;
    double baseline_perceptual_mean = 0.0;
    int n_sequences = 0;
    int horizon = 3;
    std::vector<double> mse_per_step;
    std::vector<double> perceptual_per_step;
    std::vector<double> baseline_mse_per_step;

    bool operator==(const EvalReport&) const = default;
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_table(const EvalReport& report);

/// What evaluate reads from one test sequence. The model path only ever goes
/// through `model_input`; ground truth is reached through `ground_truth` for
/// scoring.
class SequenceAccess {
public:
    explicit SequenceAccess(const world::SequenceData& data) : data_(data) {}
    virtual ~SequenceAccess() = default;
    [[nodiscard]] virtual const Frame& model_input(int t) const { return data_.frames.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] const world::SequenceData& ground_truth() const { return data_; }

private:
    const world::SequenceData& data_;
};

struct EvalOptions {
    int horizon = 3;
    double score_threshold = 0.5;
    std::filesystem::path dump_dir;  // frame strips when non-empty
};

/// Rolls every sequence out from its first frame and scores the generated
/// frames; also scores the copy-last-frame baseline. Throws EmptySplit for no
/// sequences.
EvalReport evaluate(train::Models& models, const std::vector<const SequenceAccess*>& sequences,
                    const EvalOptions& options, const PerceptualMetric& metric = RandomConvPerceptual());

/// Loads the test split of a dataset and evaluates it.
EvalReport evaluate_split(train::Models& models, const std::filesystem::path& dataset_root, world::Split split,
                          const EvalOptions& options);

/// Frames side by side on a white gap.
Frame frame_strip(const std::vector<Frame>& frames);

/// Rows of composite images and masks for one generated step.
Frame composite_tiles(const gen::CompositeSet& composite);

/// Fraction of GT boxes with a detection at IoU >= `iou` among blocks of
/// `frame_index` that do not move towards the next frame (flow below the
/// pseudo-label threshold everywhere on their mask).
struct StaticRecall {
    int static_blocks = 0;
    int recovered = 0;
    [[nodiscard]] double rate() const { return static_blocks > 0 ? static_cast<double>(recovered) / static_blocks : 0.0; }
};
StaticRecall static_block_recall(seg::SegmenterNetImpl& segmenter, const std::vector<world::SequenceData>& sequences,
                                 int frame_index, double score_threshold, double iou = 0.5);

}  // namespace objpred::eval
