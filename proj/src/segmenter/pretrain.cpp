#include "objpred/segmenter/pretrain.hpp"

#include "objpred/nn/tensor_util.hpp"

namespace objpred::seg {

namespace fs = std::filesystem;

std::vector<SegSample> load_seg_samples(const fs::path& dataset_root, const label::AnnotationSet& annotations,
                                        world::Split split) {
    const world::DatasetManifest manifest = world::load_manifest(dataset_root);
    std::vector<SegSample> samples;
    for (const std::string& name : manifest.names(split)) {
        const world::SequenceData seq = world::load_sequence(dataset_root, name);
        for (std::size_t t = 0; t < seq.frames.size(); ++t) {
            const auto it = annotations.find(label::frame_id(name, static_cast<int>(t)));
            if (it == annotations.end()) {
                continue;
            }
            samples.push_back({it->first, nn::frame_to_tensor(seq.frames[t]), SegTargets::from_record(it->second)});
        }
    }
    if (samples.empty()) {
        throw MissingData("no pseudo annotations for the " + world::to_string(split) + " split (run `annotate` first)");
    }
    return samples;
}

SegPretrainer::SegPretrainer(SegmenterNet net, PretrainConfig config)
    : net_(std::move(net)),
      config_(config),
      optimizer_(std::make_unique<torch::optim::Adam>(net_->parameters(), torch::optim::AdamOptions(config.learning_rate))) {}

std::vector<std::size_t> SegPretrainer::batch_indices(int step, std::size_t n_samples) const {
    std::vector<std::size_t> idx;
    for (int b = 0; b < config_.batch_size; ++b) {
        const auto key = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config_.batch_size) + b + 1;
        idx.push_back(static_cast<std::size_t>(nn::mix_seed(config_.seed ^ nn::mix_seed(key)) % n_samples));
    }
    return idx;
}

double SegPretrainer::step(const std::vector<SegSample>& samples) {
    if (samples.empty()) {
        throw EmptyInput("segmenter pre-training needs at least one annotated frame");
    }
    net_->train();
    optimizer_->zero_grad();
    double total = 0.0;
    const auto batch = batch_indices(steps_done_, samples.size());
    for (std::size_t i : batch) {
        const SegLossBundle loss = seg_loss(*net_, samples[i].image, samples[i].targets);
        const auto t = loss.total() / static_cast<double>(batch.size());
        t.backward();
        total += t.item<double>();
    }
    optimizer_->step();
    ++steps_done_;
    losses_.push_back(total);
    return total;
}

void SegPretrainer::run(const std::vector<SegSample>& samples, const std::function<void(int, double)>& on_step) {
    while (steps_done_ < config_.steps) {
        const double loss = step(samples);
        if (on_step) {
            on_step(steps_done_, loss);
        }
    }
}

void SegPretrainer::store(nn::Checkpoint& ckpt) const {
    nn::store_module(ckpt, "segmenter.", *net_);
    nn::store_optimizer(ckpt, "segmenter.optimizer", *optimizer_);
    ckpt.tensors["segmenter.pretrain.steps"] = torch::tensor({static_cast<int64_t>(steps_done_)}, torch::kInt64);
    ckpt.tensors["segmenter.pretrain.losses"] = torch::tensor(losses_, torch::kFloat64);
}

void SegPretrainer::restore(const nn::Checkpoint& ckpt) {
    nn::restore_module(ckpt, "segmenter.", *net_);
    nn::restore_optimizer(ckpt, "segmenter.optimizer", *optimizer_);
    steps_done_ = static_cast<int>(ckpt.tensors.at("segmenter.pretrain.steps").item<int64_t>());
    const auto l = ckpt.tensors.at("segmenter.pretrain.losses").contiguous();
    losses_.assign(l.data_ptr<double>(), l.data_ptr<double>() + l.numel());
}

}  // namespace objpred::seg
