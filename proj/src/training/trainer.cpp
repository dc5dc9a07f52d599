#include "objpred/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "objpred/generator/compositing.hpp"
#include "objpred/nn/tensor_util.hpp"
#include "objpred/segmenter/pretrain.hpp"
#include "objpred/worldgen/dataset.hpp"

namespace objpred::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (rollout_length < 1) {
        throw InvalidConfig("train.rollout_length must be >= 1");
    }
    if (weights.alpha < 0 || weights.c1 < 0 || weights.c2 < 0) {
        throw InvalidConfig("train.alpha, train.c1 and train.c2 must be >= 0");
    }
    if (learning_rate < 0 || dynamics_lr_scale < 0 || autoencoder_learning_rate < 0 || appearance_weight < 0 || steps < 0 || pretrain_steps < 0 ||
        autoencoder_steps < 0) {
        throw InvalidConfig("train: learning rate and step counts must be >= 0");
    }
    if (batch_size < 1 || pretrain_batch_size < 1 || autoencoder_batch_size < 1) {
        throw InvalidConfig("train: batch sizes must be >= 1");
    }
    if (channels < 1) {
        throw InvalidConfig("train.channels must be >= 1");
    }
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
    TrainConfig c;
    c.weights.alpha = kv.get_double("train.alpha", c.weights.alpha);
    c.weights.c1 = kv.get_double("train.c1", c.weights.c1);
    c.weights.c2 = kv.get_double("train.c2", c.weights.c2);
    c.rollout_length = static_cast<int>(kv.get_int("train.rollout_length", c.rollout_length));
    c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
    c.dynamics_lr_scale = kv.get_double("train.dynamics_lr_scale", c.dynamics_lr_scale);
    c.cosine_decay = kv.get_bool("train.cosine_decay", c.cosine_decay);
    c.steps = static_cast<int>(kv.get_int("train.steps", c.steps));
    c.batch_size = static_cast<int>(kv.get_int("train.batch_size", c.batch_size));
    c.pretrain_steps = static_cast<int>(kv.get_int("train.pretrain_steps", c.pretrain_steps));
    c.pretrain_batch_size = static_cast<int>(kv.get_int("train.pretrain_batch_size", c.pretrain_batch_size));
    c.autoencoder_steps = static_cast<int>(kv.get_int("train.autoencoder_steps", c.autoencoder_steps));
    c.autoencoder_batch_size = static_cast<int>(kv.get_int("train.autoencoder_batch_size", c.autoencoder_batch_size));
    c.autoencoder_learning_rate = kv.get_double("train.autoencoder_learning_rate", c.autoencoder_learning_rate);
    c.appearance_weight = kv.get_double("train.appearance_weight", c.appearance_weight);
    c.grad_clip = kv.get_double("train.grad_clip", c.grad_clip);
    c.checkpoint_every = static_cast<int>(kv.get_int("train.checkpoint_every", c.checkpoint_every));
    c.val_every = static_cast<int>(kv.get_int("train.val_every", c.val_every));
    c.score_threshold = kv.get_double("train.score_threshold", c.score_threshold);
    c.channels = static_cast<int>(kv.get_int("train.channels", c.channels));
    c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
    c.validate();
    return c;
}

KeyValueConfig TrainConfig::to_kv() const {
    KeyValueConfig kv;
    auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    };
    kv.set("train.alpha", num(weights.alpha));
    kv.set("train.c1", num(weights.c1));
    kv.set("train.c2", num(weights.c2));
    kv.set("train.rollout_length", std::to_string(rollout_length));
    kv.set("train.learning_rate", num(learning_rate));
    kv.set("train.dynamics_lr_scale", num(dynamics_lr_scale));
    kv.set("train.cosine_decay", cosine_decay ? "true" : "false");
    kv.set("train.steps", std::to_string(steps));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.pretrain_steps", std::to_string(pretrain_steps));
    kv.set("train.pretrain_batch_size", std::to_string(pretrain_batch_size));
    kv.set("train.autoencoder_steps", std::to_string(autoencoder_steps));
    kv.set("train.autoencoder_batch_size", std::to_string(autoencoder_batch_size));
    kv.set("train.autoencoder_learning_rate", num(autoencoder_learning_rate));
    kv.set("train.appearance_weight", num(appearance_weight));
    kv.set("train.grad_clip", num(grad_clip));
    kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
    kv.set("train.val_every", std::to_string(val_every));
    kv.set("train.score_threshold", num(score_threshold));
    kv.set("train.channels", std::to_string(channels));
    kv.set("train.seed", std::to_string(seed));
    return kv;
}

ModelConfig TrainConfig::model_config(int image_size) const {
    ModelConfig m;
    m.channels = channels;
    m.image_size = image_size;
    m.score_threshold = score_threshold;
    m.seed = seed;
    return m;
}

std::uint64_t config_hash(const TrainConfig& config) { return nn::fnv1a(config.to_kv().serialize()); }

TrainData load_train_data(const fs::path& dataset_root, const label::AnnotationSet& annotations) {
    const world::DatasetManifest manifest = world::load_manifest(dataset_root);
    TrainData data;
    data.image_size = manifest.config.image_size;
    auto load = [&](world::Split split, bool with_targets) {
        std::vector<TrainSequence> out;
        for (const std::string& name : manifest.names(split)) {
            const world::SequenceData seq = world::load_sequence(dataset_root, name);
            TrainSequence s;
            s.name = name;
            std::vector<torch::Tensor> frames;
            for (std::size_t t = 0; t < seq.frames.size(); ++t) {
                frames.push_back(nn::frame_to_tensor(seq.frames[t]));
                const auto it = annotations.find(label::frame_id(name, static_cast<int>(t)));
                if (with_targets && it != annotations.end()) {
                    s.targets.emplace_back(seg::SegTargets::from_record(it->second));
                } else {
                    s.targets.emplace_back(std::nullopt);
                }
            }
            s.frames = torch::stack(frames);
            out.push_back(std::move(s));
        }
        return out;
    };
    data.train = load(world::Split::Train, true);
    data.val = load(world::Split::Val, false);
    bool any = false;
    for (const auto& s : data.train) {
        for (const auto& t : s.targets) {
            any |= t.has_value();
        }
    }
    if (!any) {
        throw MissingData("no pseudo annotations for the train split (run `annotate` first)");
    }
    return data;
}

double validation_l_pred(Models& models, const std::vector<TrainSequence>& sequences, const TrainConfig& config) {
    torch::NoGradGuard no_grad;
    double sum = 0.0;
    int count = 0;
    for (const TrainSequence& s : sequences) {
        const int horizon = std::min<int>(config.rollout_length, static_cast<int>(s.frames.size(0)) - 1);
        const Prediction p = predict(models, s.frames[0], horizon, config.score_threshold);
        for (int k = 1; k <= horizon; ++k) {
            const auto& c = p.composites[static_cast<std::size_t>(k - 1)];
            const auto detections = models.segmenter->detect_batch(s.frames[k], config.score_threshold);
            const auto u = detection_union_mask(detections, s.frames.size(2), s.frames.size(3));
            const PredictionTerms t = prediction_loss(c.final, c.unrefined, s.frames[k], u);
            sum += (t.final + t.unrefined + config.weights.alpha * t.masked).item<double>();
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

namespace {

struct EntityPool {
    torch::Tensor boxes, features, masks;
    torch::Tensor pixels;  // frame crops under the boxes, [N, 3, p, p]
};

EntityPool collect_entities(Models& models, const std::vector<TrainSequence>& sequences, double score_threshold) {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> boxes, features, masks, pixels;
    for (const TrainSequence& s : sequences) {
        for (int64_t t = 0; t < s.frames.size(0); ++t) {
            const auto d = models.segmenter->detect_batch(s.frames[t], score_threshold);
            if (d.size() > 0) {
                boxes.push_back(d.boxes);
                features.push_back(d.features);
                masks.push_back(d.masks);
                pixels.push_back(gen::crop_resize(s.frames[t], d.boxes, seg::kPatchSize));
            }
        }
    }
    if (boxes.empty()) {
        return {};
    }
    return {torch::cat(boxes), torch::cat(features), torch::cat(masks), torch::cat(pixels)};
}

torch::Tensor autoencoder_loss(Models& models, const EntityPool& pool, const torch::Tensor& index, double appearance_weight) {
    const auto boxes = pool.boxes.index_select(0, index), features = pool.features.index_select(0, index);
    const auto masks = pool.masks.index_select(0, index), pixels = pool.pixels.index_select(0, index);
    const auto d = models.dynamics->decode(models.dynamics->encode(boxes, features, masks));
    // Box error weighted up so a couple of pixels matter as much as the patch terms.
    auto loss = 10.0 * ((d.boxes - boxes) / models.config.image_size).pow(2).mean() + (d.masks - masks).pow(2).mean() +
                (d.features - features).pow(2).mean();
    if (appearance_weight > 0) {
        // Patch decoder learns to paint the decoded entity over its own crop.
        const auto painted = models.generator.decoder->forward(d.features, d.masks);
        loss = loss + appearance_weight * ((painted - pixels).pow(2) * masks.unsqueeze(1)).mean();
    }
    return loss;
}

std::string csv_header() { return "step,l_pred_final,l_pred_unrefined,l_pred_masked,l_con,l_seg,l_pred,total,alpha,c1,c2,sequences,skipped,val_l_pred"; }

}  // namespace

std::vector<double> autoencoder_warm_start(Models& models, const std::vector<TrainSequence>& sequences,
                                           const TrainConfig& config) {
    std::vector<double> losses;
    const EntityPool pool = collect_entities(models, sequences, config.score_threshold);
    if (!pool.boxes.defined() || config.autoencoder_steps == 0) {
        return losses;
    }
    models.dynamics->fit_autoencoder(pool.boxes, pool.features, pool.masks);
    const auto n = static_cast<std::uint64_t>(pool.boxes.size(0));
    std::vector<torch::Tensor> params;
    for (const auto& p : models.dynamics->named_parameters()) {
        if (p.key().rfind("enc_", 0) == 0 || p.key().rfind("dec_", 0) == 0) {
            params.push_back(p.value());
        }
    }
    if (config.appearance_weight > 0) {
        for (const auto& p : models.generator.decoder->parameters()) {
            params.push_back(p);
        }
    }
    torch::optim::Adam opt(params, torch::optim::AdamOptions(config.autoencoder_learning_rate));
    for (int s = 0; s < config.autoencoder_steps; ++s) {
        std::vector<int64_t> idx;
        for (int b = 0; b < config.autoencoder_batch_size; ++b) {
            const auto key = static_cast<std::uint64_t>(s) * config.autoencoder_batch_size + b + 1;
            idx.push_back(static_cast<int64_t>(nn::mix_seed(config.seed ^ 0xae ^ nn::mix_seed(key)) % n));
        }
        const auto i = torch::tensor(idx, torch::kInt64);
        opt.zero_grad();
        const auto loss = autoencoder_loss(models, pool, i, config.appearance_weight);
        loss.backward();
        opt.step();
        losses.push_back(loss.item<double>());
    }
    return losses;
}

double autoencoder_box_error(Models& models, const std::vector<TrainSequence>& sequences, double score_threshold) {
    const EntityPool pool = collect_entities(models, sequences, score_threshold);
    if (!pool.boxes.defined()) {
        return 0.0;
    }
    torch::NoGradGuard no_grad;
    const auto d = models.dynamics->decode(models.dynamics->encode(pool.boxes, pool.features, pool.masks));
    return (d.boxes - pool.boxes).abs().mean().item<double>();
}

TrainResult train(const TrainConfig& config, const TrainData& data, Models& models, const fs::path& out_dir,
                  const std::optional<fs::path>& segmenter_checkpoint, const LogFn& log) {
    config.validate();
    if (data.train.empty()) {
        throw EmptySplit("training split is empty");
    }
    torch::set_num_threads(1);
    const auto say = [&](const std::string& msg) {
        if (log) {
            log(msg);
        }
    };
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
    }
    const std::uint64_t hash = config_hash(config);
    TrainResult result;

    // Phase 1: segmenter on pseudo labels.
    if (segmenter_checkpoint) {
        if (!fs::exists(*segmenter_checkpoint)) {
            throw MissingCheckpoint("segmenter checkpoint '" + segmenter_checkpoint->string() +
                                    "' not found (run `pretrain-seg` first)");
        }
        models.restore_segmenter(nn::Checkpoint::load(*segmenter_checkpoint));
        say("phase 1: loaded segmenter from " + segmenter_checkpoint->string());
    } else {
        std::vector<seg::SegSample> samples;
        for (const auto& s : data.train) {
            for (std::size_t t = 0; t < s.targets.size(); ++t) {
                if (s.targets[t]) {
                    samples.push_back({label::frame_id(s.name, static_cast<int>(t)), s.frames[static_cast<int64_t>(t)],
                                       *s.targets[t]});
                }
            }
        }
        seg::PretrainConfig pc;
        pc.steps = config.pretrain_steps;
        pc.learning_rate = config.learning_rate;
        pc.batch_size = config.pretrain_batch_size;
        pc.seed = config.seed;
        seg::SegPretrainer pre(models.segmenter, pc);
        pre.run(samples, [&](int step, double loss) {
            if (step % 50 == 0 || step == pc.steps) {
                say("phase 1 step " + std::to_string(step) + " seg loss " + std::to_string(loss));
            }
        });
        result.pretrain_losses = pre.losses();
        if (!out_dir.empty()) {
            nn::Checkpoint ckpt;
            ckpt.config_hash = hash;
            pre.store(ckpt);
            ckpt.save(out_dir / "segmenter.ckpt");
            std::ofstream csv(out_dir / "pretrain_loss.csv");
            csv << "step,total\n" << std::setprecision(10);
            for (std::size_t i = 0; i < result.pretrain_losses.size(); ++i) {
                csv << i + 1 << ',' << result.pretrain_losses[i] << '\n';
            }
        }
    }

    result.autoencoder_losses = autoencoder_warm_start(models, data.train, config);
    if (!result.autoencoder_losses.empty()) {
        say("dynamics warm-start: loss " + std::to_string(result.autoencoder_losses.front()) + " -> " +
            std::to_string(result.autoencoder_losses.back()));
    }

    // Phase 2: everything jointly on the combined loss.
    auto params = models.parameters();
    // The dynamics weights come out of a closed-form fit and drift off it at the shared rate.
    const std::vector<double> base_lr{config.learning_rate, config.learning_rate * config.dynamics_lr_scale,
                                      config.learning_rate};
    std::vector<torch::optim::OptimizerParamGroup> groups;
    for (auto [group, lr] : {std::pair{models.segmenter->parameters(), base_lr[0]},
                             std::pair{models.dynamics->parameters(), base_lr[1]},
                             std::pair{models.generator.parameters(), base_lr[2]}}) {
        groups.emplace_back(group, std::make_unique<torch::optim::AdamOptions>(lr));
    }
    torch::optim::Adam opt(groups, torch::optim::AdamOptions(config.learning_rate));
    RolloutOptions ro;
    ro.rollout_length = config.rollout_length;
    ro.weights = config.weights;
    ro.score_threshold = config.score_threshold;

    std::ofstream csv, val_csv;
    if (!out_dir.empty()) {
        csv.open(out_dir / "metrics.csv");
        csv << csv_header() << '\n' << std::setprecision(10);
        val_csv.open(out_dir / "val_loss.csv");
        val_csv << "step,val_l_pred\n" << std::setprecision(10);
    }
    auto validate_now = [&](int step) {
        if (data.val.empty()) {
            return std::optional<double>{};
        }
        const double v = validation_l_pred(models, data.val, config);
        result.val_l_pred.emplace_back(step, v);
        if (val_csv.is_open()) {
            val_csv << step << ',' << v << '\n' << std::flush;
        }
        say("phase 2 step " + std::to_string(step) + " val l_pred " + std::to_string(v));
        return std::optional<double>{v};
    };
    auto save_model = [&] {
        if (out_dir.empty()) {
            return;
        }
        nn::Checkpoint ckpt;
        ckpt.config_hash = hash;
        models.store(ckpt);
        ckpt.save(out_dir / "model.ckpt");
    };
    validate_now(0);

    const auto n = static_cast<std::uint64_t>(data.train.size());
    for (int step = 1; step <= config.steps; ++step) {
        opt.zero_grad();
        if (config.cosine_decay) {
            const double factor = 0.5 * (1.0 + std::cos(std::numbers::pi * (step - 1) / config.steps));
            for (std::size_t g = 0; g < base_lr.size(); ++g) {
                static_cast<torch::optim::AdamOptions&>(opt.param_groups()[g].options()).lr(base_lr[g] * factor);
            }
        }
        StepLog entry;
        entry.step = step;
        std::vector<LossBundle> bundles;
        torch::Tensor total;
        for (int b = 0; b < config.batch_size; ++b) {
            const auto key = static_cast<std::uint64_t>(step) * config.batch_size + b + 1;
            const auto& seq = data.train[static_cast<std::size_t>(nn::mix_seed(config.seed ^ 0x2b ^ nn::mix_seed(key)) % n)];
            RolloutResult r = rollout(models, seq, ro);
            if (r.skipped) {
                ++entry.skipped;
                say("skip " + seq.name + ": " + r.skip_reason);
                continue;
            }
            ++entry.sequences;
            bundles.push_back(r.losses.values());
            total = total.defined() ? total + r.losses.total() : r.losses.total();
        }
        if (total.defined()) {
            (total / static_cast<double>(entry.sequences)).backward();
            if (config.grad_clip > 0) {
                torch::nn::utils::clip_grad_norm_(params, config.grad_clip);
            }
            opt.step();
        }
        for (const auto& b : bundles) {
            for (auto [dst, src] : {std::pair{&entry.losses.l_pred_final, b.l_pred_final},
                                    std::pair{&entry.losses.l_pred_unrefined, b.l_pred_unrefined},
                                    std::pair{&entry.losses.l_pred_masked, b.l_pred_masked}, std::pair{&entry.losses.l_con, b.l_con},
                                    std::pair{&entry.losses.l_seg, b.l_seg}, std::pair{&entry.losses.l_pred, b.l_pred},
                                    std::pair{&entry.losses.total, b.total}}) {
                *dst += src / static_cast<double>(bundles.size());
            }
        }
        entry.losses.alpha = config.weights.alpha;
        entry.losses.c1 = config.weights.c1;
        entry.losses.c2 = config.weights.c2;
        result.total_skipped += entry.skipped;

        std::optional<double> val;
        if ((config.val_every > 0 && step % config.val_every == 0) || step == config.steps) {
            val = validate_now(step);
        }
        if (csv.is_open()) {
            const LossBundle& l = entry.losses;
            csv << step << ',' << l.l_pred_final << ',' << l.l_pred_unrefined << ',' << l.l_pred_masked << ',' << l.l_con
                << ',' << l.l_seg << ',' << l.l_pred << ',' << l.total << ',' << l.alpha << ',' << l.c1 << ',' << l.c2 << ','
                << entry.sequences << ',' << entry.skipped << ',';
            if (val) {
                csv << *val;
            }
            csv << '\n';
        }
        if (step % 25 == 0) {
            say("phase 2 step " + std::to_string(step) + " total " + std::to_string(entry.losses.total) + " l_pred " +
                std::to_string(entry.losses.l_pred) + " l_con " + std::to_string(entry.losses.l_con) + " l_seg " +
                std::to_string(entry.losses.l_seg));
        }
        result.steps.push_back(entry);
        if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
            save_model();
        }
    }
    save_model();
    say("skipped sequences: " + std::to_string(result.total_skipped));
    return result;
}

}  // namespace objpred::train
