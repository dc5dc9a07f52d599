#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "objpred/nn/tensor_util.hpp"
#include "objpred/pseudo_label/labeling.hpp"
#include "objpred/segmenter/pretrain.hpp"
#include "objpred/training/rollout.hpp"
#include "objpred/training/trainer.hpp"
#include "objpred/worldgen/dataset.hpp"

namespace objpred::fixtures {

struct GradCheck {
    double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
    double analytic_norm = 0.0;
};

/// Central differences of a scalar function of one double tensor, against autograd.
inline GradCheck check_gradient(const std::function<torch::Tensor(const torch::Tensor&)>& fn, const torch::Tensor& at,
                                double eps) {
    auto x = at.detach().clone().to(torch::kFloat64).set_requires_grad(true);
    fn(x).backward();
    const auto analytic = x.grad().detach().clone().reshape({-1});

    auto base = at.detach().clone().to(torch::kFloat64).reshape({-1});
    auto numeric = torch::zeros_like(base);
    torch::NoGradGuard no_grad;
    for (int64_t i = 0; i < base.numel(); ++i) {
        const double v = base[i].item<double>();
        base[i] = v + eps;
        const double up = fn(base.view(at.sizes())).item<double>();
        base[i] = v - eps;
        const double down = fn(base.view(at.sizes())).item<double>();
        base[i] = v;
        numeric[i] = (up - down) / (2.0 * eps);
    }
    const double an = analytic.norm().item<double>(), nn = numeric.norm().item<double>();
    const double scale = std::max({an, nn, 1e-12});
    return {(analytic - numeric).norm().item<double>() / scale, an};
}

/// Oracle-flow pseudo labels for every frame pair of a simulated sequence.
inline std::vector<label::AnnotationRecord> oracle_records(const world::SequenceData& seq) {
    std::vector<label::AnnotationRecord> out;
    for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
        out.push_back(label::annotate_pair(seq.frames[t], seq.frames[t + 1], label::OracleFlow(seq.flows[t]), {},
                                           label::frame_id(seq.name, static_cast<int>(t))));
    }
    return out;
}

inline std::vector<world::SequenceData> simulate_many(int n, std::uint64_t seed, const world::WorldConfig& config = {}) {
    std::vector<world::SequenceData> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(world::simulate_sequence(world::sequence_seed(seed, static_cast<std::size_t>(i)), config,
                                               "seq_" + std::to_string(i)));
    }
    return out;
}

inline train::TrainSequence to_train_sequence(const world::SequenceData& seq, bool with_targets) {
    train::TrainSequence s;
    s.name = seq.name;
    std::vector<torch::Tensor> frames;
    for (const Frame& f : seq.frames) {
        frames.push_back(nn::frame_to_tensor(f));
    }
    s.frames = torch::stack(frames);
    const auto records = oracle_records(seq);
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        if (with_targets && t < records.size()) {
            s.targets.emplace_back(seg::SegTargets::from_record(records[t]));
        } else {
            s.targets.emplace_back(std::nullopt);
        }
    }
    return s;
}

inline std::vector<seg::SegSample> seg_samples(const std::vector<world::SequenceData>& seqs) {
    std::vector<seg::SegSample> out;
    for (const auto& seq : seqs) {
        const auto records = oracle_records(seq);
        for (std::size_t t = 0; t < records.size(); ++t) {
            out.push_back({records[t].frame_id, nn::frame_to_tensor(seq.frames[t]),
                           seg::SegTargets::from_record(records[t])});
        }
    }
    return out;
}

/// In-memory stand-in for load_train_data.
inline train::TrainData make_train_data(int n_train, int n_val, std::uint64_t seed) {
    train::TrainData data;
    const auto seqs = simulate_many(n_train + n_val, seed);
    for (int i = 0; i < n_train + n_val; ++i) {
        const bool is_train = i < n_train;
        (is_train ? data.train : data.val).push_back(to_train_sequence(seqs[static_cast<std::size_t>(i)], is_train));
    }
    data.image_size = seqs.front().frames.front().height;
    return data;
}

/// Short schedule for tests that only need the pipeline to run.
inline train::TrainConfig tiny_config() {
    train::TrainConfig c;
    c.pretrain_steps = 4;
    c.pretrain_batch_size = 2;
    c.autoencoder_steps = 2;
    c.autoencoder_batch_size = 4;
    c.steps = 3;
    c.batch_size = 1;
    c.val_every = 2;
    c.channels = 8;
    return c;
}

}  // namespace objpred::fixtures
