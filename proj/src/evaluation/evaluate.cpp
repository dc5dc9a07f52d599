#include "objpred/evaluation/evaluate.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "objpred/core/png_io.hpp"
#include "objpred/dynamics/association.hpp"
#include "objpred/generator/compositing.hpp"
#include "objpred/nn/tensor_util.hpp"
#include "objpred/pseudo_label/labeling.hpp"
#include "objpred/training/rollout.hpp"

namespace objpred::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

MeanStderr summarize(const std::vector<double>& v) {
    MeanStderr out;
    if (v.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    out.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double sq = 0.0;
        for (double x : v) {
            sq += (x - out.mean) * (x - out.mean);
        }
        out.stderr_ = std::sqrt(sq / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    return out;
}

Mask binarize(const torch::Tensor& m) {
    const auto b = (m.detach() >= 0.5).to(torch::kUInt8).contiguous();
    Mask out(static_cast<int>(b.size(0)), static_cast<int>(b.size(1)));
    std::copy_n(b.data_ptr<std::uint8_t>(), out.data.size(), out.data.begin());
    return out;
}

Frame mask_frame(const torch::Tensor& m) {
    return nn::tensor_to_frame(m.detach().unsqueeze(0).expand({3, m.size(0), m.size(1)}));
}

}  // namespace

json report_to_json(const EvalReport& r) {
    return json{{"mse_mean", r.mse_mean},
                {"mse_stderr", r.mse_stderr},
                {"perceptual_mean", r.perceptual_mean},
                {"perceptual_stderr", r.perceptual_stderr},
                {"seg_miou", r.seg_miou},
                {"box_l2_mean", r.box_l2_mean},
                {"baseline_mse_mean", r.baseline_mse_mean},
                {"baseline_mse_stderr", r.baseline_mse_stderr},
                {"baseline_perceptual_mean", r.baseline_perceptual_mean},
                {"n_sequences", r.n_sequences},
                {"horizon", r.horizon},
                {"mse_per_step", r.mse_per_step},
                {"perceptual_per_step", r.perceptual_per_step},
                {"baseline_mse_per_step", r.baseline_mse_per_step}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.mse_mean = j.at("mse_mean").get<double>();
    r.mse_stderr = j.at("mse_stderr").get<double>();
    r.perceptual_mean = j.at("perceptual_mean").get<double>();
    r.perceptual_stderr = j.at("perceptual_stderr").get<double>();
    r.seg_miou = j.at("seg_miou").get<double>();
    r.box_l2_mean = j.at("box_l2_mean").get<double>();
    r.baseline_mse_mean = j.at("baseline_mse_mean").get<double>();
    r.baseline_mse_stderr = j.at("baseline_mse_stderr").get<double>();
    r.baseline_perceptual_mean = j.at("baseline_perceptual_mean").get<double>();
    r.n_sequences = j.at("n_sequences").get<int>();
    r.horizon = j.at("horizon").get<int>();
    r.mse_per_step = j.at("mse_per_step").get<std::vector<double>>();
    r.perceptual_per_step = j.at("perceptual_per_step").get<std::vector<double>>();
    r.baseline_mse_per_step = j.at("baseline_mse_per_step").get<std::vector<double>>();
    return r;
}

std::string report_table(const EvalReport& r) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6);
    s << "sequences: " << r.n_sequences << "  horizon: " << r.horizon << "\n";
    s << "                 mean        stderr\n";
    s << "mse          " << std::setw(10) << r.mse_mean << "  " << std::setw(10) << r.mse_stderr << "\n";
    s << "perceptual   " << std::setw(10) << r.perceptual_mean << "  " << std::setw(10) << r.perceptual_stderr << "\n";
    s << "copy-last    " << std::setw(10) << r.baseline_mse_mean << "  " << std::setw(10) << r.baseline_mse_stderr << "\n";
    s << "seg mIoU     " << std::setw(10) << r.seg_miou << "\n";
    s << "box L2 (px)  " << std::setw(10) << r.box_l2_mean << "\n";
    s << "per step mse:";
    for (std::size_t k = 0; k < r.mse_per_step.size(); ++k) {
        s << "  t+" << k + 1 << " " << r.mse_per_step[k] << " (copy " << r.baseline_mse_per_step[k] << ")";
    }
    s << "\n";
    return s.str();
}

Frame frame_strip(const std::vector<Frame>& frames) {
    if (frames.empty()) {
        return {};
    }
    const int gap = 2;
    const int h = frames[0].height, w = frames[0].width;
    const int n = static_cast<int>(frames.size());
    Frame out(h, n * w + (n - 1) * gap, 1.0f);
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    out.at(y, i * (w + gap) + x, c) = frames[static_cast<std::size_t>(i)].at(y, x, c);
                }
            }
        }
    }
    return out;
}

static Frame stack_rows(const std::vector<Frame>& rows) {
    int width = 0, height = 0;
    for (const Frame& r : rows) {
        width = std::max(width, r.width);
        height += r.height + 2;
    }
    Frame out(height - 2, width, 1.0f);
    int y0 = 0;
    for (const Frame& r : rows) {
        for (int y = 0; y < r.height; ++y) {
            for (int x = 0; x < r.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    out.at(y0 + y, x, c) = r.at(y, x, c);
                }
            }
        }
        y0 += r.height + 2;
    }
    return out;
}

Frame composite_tiles(const gen::CompositeSet& c) {
    std::vector<Frame> images{nn::tensor_to_frame(c.obj), nn::tensor_to_frame(c.back), nn::tensor_to_frame(c.synth),
                              nn::tensor_to_frame(c.unrefined), nn::tensor_to_frame(c.final)};
    std::vector<Frame> masks{mask_frame(c.back_mask), mask_frame(c.synth_mask)};
    for (int64_t i = 0; i < c.dyn_masks.size(0); ++i) {
        masks.push_back(mask_frame(c.dyn_masks[i]));
    }
    return stack_rows({frame_strip(images), frame_strip(masks)});
}

EvalReport evaluate(train::Models& models, const std::vector<const SequenceAccess*>& sequences, const EvalOptions& options,
                    const PerceptualMetric& metric) {
    if (sequences.empty()) {
        throw EmptySplit("evaluation split has no sequences");
    }
    torch::NoGradGuard no_grad;
    EvalReport report;
    report.horizon = options.horizon;
    report.mse_per_step.assign(static_cast<std::size_t>(options.horizon), 0.0);
    report.perceptual_per_step.assign(static_cast<std::size_t>(options.horizon), 0.0);
    report.baseline_mse_per_step.assign(static_cast<std::size_t>(options.horizon), 0.0);
    std::vector<double> seq_mse, seq_perc, seq_base, seq_base_perc;
    double iou_sum = 0.0, l2_sum = 0.0;
    int iou_count = 0, l2_count = 0;

    for (const SequenceAccess* access : sequences) {
        const world::SequenceData& gt = access->ground_truth();
        if (static_cast<int>(gt.frames.size()) < options.horizon + 1) {
            throw ShapeError("sequence '" + gt.name + "' is shorter than the evaluation horizon");
        }
        const Frame& input = access->model_input(0);
        const torch::Tensor x0 = nn::frame_to_tensor(input);
        const train::Prediction pred = train::predict(models, x0, options.horizon, options.score_threshold);

        double m = 0.0, p = 0.0, b = 0.0, bp = 0.0;
        std::vector<Frame> predicted{input}, truth{gt.frames[0]};
        for (int k = 1; k <= options.horizon; ++k) {
            const auto idx = static_cast<std::size_t>(k);
            const Frame out = nn::tensor_to_frame(pred.frames[idx - 1]);
            const double mk = mse(out, gt.frames[idx]);
            const double pk = perceptual(out, gt.frames[idx], metric);
            const double bk = mse(input, gt.frames[idx]);
            report.mse_per_step[idx - 1] += mk;
            report.perceptual_per_step[idx - 1] += pk;
            report.baseline_mse_per_step[idx - 1] += bk;
            m += mk;
            p += pk;
            b += bk;
            bp += perceptual(input, gt.frames[idx], metric);
            predicted.push_back(out);
            truth.push_back(gt.frames[idx]);

            // Predicted boxes against the true boxes of this frame.
            const auto& ent = pred.entities[idx - 1];
            std::vector<dyn::Point2> pc, gc;
            if (ent.size() > 0) {
                const auto centers = nn::box_centers(ent.boxes).to(torch::kFloat64).contiguous();
                const auto a = centers.accessor<double, 2>();
                for (int64_t i = 0; i < centers.size(0); ++i) {
                    pc.push_back({a[i][0], a[i][1]});
                }
            }
            for (const Box& box : gt.boxes[idx]) {
                if (box.area() > 0) {
                    gc.push_back({box.center_x(), box.center_y()});
                }
            }
            const dyn::Association assoc = dyn::associate(pc, gc, std::hypot(input.width, input.height));
            for (std::size_t i = 0; i < assoc.match.size(); ++i) {
                if (assoc.match[i] >= 0) {
                    const auto& g = gc[static_cast<std::size_t>(assoc.match[i])];
                    l2_sum += std::hypot(pc[i].x - g.x, pc[i].y - g.y);
                    ++l2_count;
                }
            }
        }
        const double hzn = options.horizon;
        seq_mse.push_back(m / hzn);
        seq_perc.push_back(p / hzn);
        seq_base.push_back(b / hzn);
        seq_base_perc.push_back(bp / hzn);

        // Segmentation quality on the input frame.
        std::vector<Mask> detected;
        const auto& det = pred.initial_detections;
        if (det.size() > 0) {
            const auto pasted = gen::gamma_paste_masks(det.masks, det.boxes, input.height, input.width);
            for (int64_t i = 0; i < pasted.size(0); ++i) {
                detected.push_back(binarize(pasted[i]));
            }
        }
        for (const Mask& g : gt.masks[0]) {
            if (g.empty()) {
                continue;
            }
            double best = 0.0;
            for (const Mask& d : detected) {
                best = std::max(best, mask_iou(g, d));
            }
            iou_sum += best;
            ++iou_count;
        }

        if (!options.dump_dir.empty()) {
            fs::create_directories(options.dump_dir);
            write_png_rgb8(options.dump_dir / (gt.name + ".png"), stack_rows({frame_strip(truth), frame_strip(predicted)}));
        }
    }

    const double n = static_cast<double>(sequences.size());
    for (int k = 0; k < options.horizon; ++k) {
        report.mse_per_step[static_cast<std::size_t>(k)] /= n;
        report.perceptual_per_step[static_cast<std::size_t>(k)] /= n;
        report.baseline_mse_per_step[static_cast<std::size_t>(k)] /= n;
    }
    const MeanStderr m = summarize(seq_mse), p = summarize(seq_perc), b = summarize(seq_base);
    report.mse_mean = m.mean;
    report.mse_stderr = m.stderr_;
    report.perceptual_mean = p.mean;
    report.perceptual_stderr = p.stderr_;
    report.baseline_mse_mean = b.mean;
    report.baseline_mse_stderr = b.stderr_;
    report.baseline_perceptual_mean = summarize(seq_base_perc).mean;
    report.seg_miou = iou_count > 0 ? iou_sum / iou_count : 0.0;
    report.box_l2_mean = l2_count > 0 ? l2_sum / l2_count : 0.0;
    report.n_sequences = static_cast<int>(sequences.size());
    return report;
}

EvalReport evaluate_split(train::Models& models, const fs::path& dataset_root, world::Split split,
                          const EvalOptions& options) {
    const world::DatasetManifest manifest = world::load_manifest(dataset_root);
    std::vector<world::SequenceData> data;
    for (const std::string& name : manifest.names(split)) {
        data.push_back(world::load_sequence(dataset_root, name));
    }
    std::vector<SequenceAccess> access;
    access.reserve(data.size());
    for (const auto& d : data) {
        access.emplace_back(d);
    }
    std::vector<const SequenceAccess*> ptrs;
    for (const auto& a : access) {
        ptrs.push_back(&a);
    }
    return evaluate(models, ptrs, options);
}

StaticRecall static_block_recall(seg::SegmenterNetImpl& segmenter, const std::vector<world::SequenceData>& sequences,
                                 int frame_index, double score_threshold, double iou) {
    StaticRecall out;
    for (const auto& seq : sequences) {
        const auto t = static_cast<std::size_t>(frame_index);
        if (t + 1 >= seq.frames.size()) {
            continue;
        }
        const Mask moving = label::threshold_flow(seq.flows[t]);
        const auto detections = segmenter.detect(seq.frames[t], score_threshold);
        for (std::size_t b = 0; b < seq.masks[t].size(); ++b) {
            const Mask& m = seq.masks[t][b];
            if (m.empty()) {
                continue;
            }
            bool still = true;
            for (std::size_t i = 0; i < m.data.size() && still; ++i) {
                still = !(m.data[i] && moving.data[i]);
            }
            if (!still) {
                continue;
            }
            ++out.static_blocks;
            for (const auto& d : detections) {
                if (box_iou(d.box, seq.boxes[t][b]) >= iou) {
                    ++out.recovered;
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace objpred::eval
