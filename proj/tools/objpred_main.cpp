// objpred: generate -> annotate -> pretrain-seg -> train -> predict -> evaluate.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "objpred/core/kv_config.hpp"
#include "objpred/core/png_io.hpp"
#include "objpred/evaluation/evaluate.hpp"
#include "objpred/nn/tensor_util.hpp"
#include "objpred/pseudo_label/annotation_io.hpp"
#include "objpred/pseudo_label/flow.hpp"
#include "objpred/segmenter/pretrain.hpp"
#include "objpred/training/trainer.hpp"
#include "objpred/worldgen/dataset.hpp"

namespace fs = std::filesystem;
using namespace objpred;

namespace {

constexpr const char* kEnvPrefix = "OBJPRED_";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config_path;
    std::optional<long long> seed;
    std::string out;
};

/// Defaults, then the config file, then OBJPRED_* variables, then --seed.
KeyValueConfig resolve_config(const GlobalOptions& g) {
    KeyValueConfig kv = world::world_config_to_kv(world::WorldConfig{});
    kv.merge(train::TrainConfig{}.to_kv());
    kv.set("label.fraction", "0.01");
    kv.set("label.min_area", "8");
    kv.set("eval.horizon", "3");
    if (!g.config_path.empty()) {
        if (!fs::exists(g.config_path)) {
            throw UsageError("config file '" + g.config_path + "' does not exist");
        }
        kv.merge(KeyValueConfig::load(g.config_path));
    }
    kv.apply_env(kEnvPrefix);
    if (g.seed) {
        if (*g.seed < 0) {
            throw UsageError("--seed must be >= 0");
        }
        kv.set("world.seed", std::to_string(*g.seed));
        kv.set("train.seed", std::to_string(*g.seed));
    }
    return kv;
}

fs::path require_out(const GlobalOptions& g, const std::string& command) {
    if (g.out.empty()) {
        throw UsageError(command + ": --out is required");
    }
    return g.out;
}

void write_run_config(const fs::path& dir, KeyValueConfig kv, const std::string& command) {
    kv.set("run.command", command);
    fs::create_directories(dir);
    kv.save(dir / "run_config.txt");
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

label::AnnotationSet load_annotations_or_hint(const fs::path& path) {
    if (!fs::exists(path)) {
        throw MissingData("annotations '" + path.string() + "' not found (run `objpred annotate` first)");
    }
    return label::load_annotations(path);
}

int cmd_generate(const GlobalOptions& g, int n) {
    const fs::path out = require_out(g, "generate");
    KeyValueConfig kv = resolve_config(g);
    if (n > 0) {
        kv.set("world.num_sequences", std::to_string(n));
    }
    const world::WorldConfig wc = world::world_config_from_kv(kv);
    const world::DatasetManifest m = world::generate_dataset(wc, out);
    write_run_config(out, kv, "generate");
    std::cout << "wrote " << m.sequences.size() << " sequences to " << out.string() << "\n";
    return 0;
}

int cmd_annotate(const GlobalOptions& g, const fs::path& data, const std::string& flow) {
    const fs::path out = g.out.empty() ? data : fs::path(g.out);
    const KeyValueConfig kv = resolve_config(g);
    label::LabelConfig lc;
    lc.fraction = kv.get_double("label.fraction", lc.fraction);
    lc.min_area = static_cast<int>(kv.get_int("label.min_area", lc.min_area));

    const world::DatasetManifest manifest = world::load_manifest(data);
    const label::BlockMatchingFlow matcher;
    label::AnnotationSet set;
    std::size_t instances = 0;
    for (const std::string& name : manifest.names(world::Split::Train)) {
        const world::SequenceData seq = world::load_sequence(data, name);
        for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
            const std::string id = label::frame_id(name, static_cast<int>(t));
            label::AnnotationRecord rec;
            if (flow == "oracle") {
                rec = label::annotate_pair(seq.frames[t], seq.frames[t + 1], label::OracleFlow(seq.flows[t]), lc, id);
            } else {
                rec = label::annotate_pair(seq.frames[t], seq.frames[t + 1], matcher, lc, id);
            }
            instances += rec.instances.size();
            set.emplace(id, std::move(rec));
        }
    }
    fs::create_directories(out);
    label::save_annotations(out / "annotations.json", out / "annotations_coco.json", set);
    write_run_config(out, kv, "annotate");
    std::cout << "annotated " << set.size() << " frames, " << instances << " instances -> "
              << (out / "annotations.json").string() << "\n";
    return 0;
}

int cmd_pretrain(const GlobalOptions& g, const fs::path& data, const fs::path& annotations, bool resume) {
    const fs::path out = require_out(g, "pretrain-seg");
    const KeyValueConfig kv = resolve_config(g);
    const train::TrainConfig tc = train::TrainConfig::from_kv(kv);
    torch::set_num_threads(1);

    const auto samples = seg::load_seg_samples(data, load_annotations_or_hint(annotations));
    const int image_size = static_cast<int>(samples.front().image.size(2));
    train::Models models(tc.model_config(image_size));
    seg::PretrainConfig pc;
    pc.steps = tc.pretrain_steps;
    pc.learning_rate = tc.learning_rate;
    pc.batch_size = tc.pretrain_batch_size;
    pc.seed = tc.seed;
    seg::SegPretrainer pre(models.segmenter, pc);
    const fs::path ckpt_path = out / "segmenter.ckpt";
    if (resume && fs::exists(ckpt_path)) {
        pre.restore(nn::Checkpoint::load(ckpt_path));
        log_line("resumed at step " + std::to_string(pre.steps_done()));
    }
    write_run_config(out, kv, "pretrain-seg");
    pre.run(samples, [&](int step, double loss) {
        if (step % 50 == 0 || step == pc.steps) {
            log_line("step " + std::to_string(step) + " seg loss " + std::to_string(loss));
        }
    });
    nn::Checkpoint ckpt;
    ckpt.config_hash = train::config_hash(tc);
    pre.store(ckpt);
    ckpt.save(ckpt_path);
    std::ofstream csv(out / "pretrain_loss.csv");
    csv << "step,total\n" << std::setprecision(10);
    for (std::size_t i = 0; i < pre.losses().size(); ++i) {
        csv << i + 1 << ',' << pre.losses()[i] << '\n';
    }
    std::cout << "segmenter checkpoint -> " << ckpt_path.string() << "\n";
    return 0;
}

int cmd_train(const GlobalOptions& g, const fs::path& data, const fs::path& annotations, const std::string& segmenter,
              bool dump_composites) {
    const fs::path out = require_out(g, "train");
    const KeyValueConfig kv = resolve_config(g);
    const train::TrainConfig tc = train::TrainConfig::from_kv(kv);
    std::optional<fs::path> seg_ckpt;
    if (!segmenter.empty()) {
        seg_ckpt = segmenter;
        if (!fs::exists(*seg_ckpt)) {
            throw MissingCheckpoint("segmenter checkpoint '" + segmenter + "' not found (run `objpred pretrain-seg` first)");
        }
    }
    const train::TrainData td = train::load_train_data(data, load_annotations_or_hint(annotations));
    train::Models models(tc.model_config(td.image_size));
    write_run_config(out, kv, "train");
    const train::TrainResult result = train::train(tc, td, models, out, seg_ckpt, log_line);

    if (dump_composites) {
        const fs::path dir = out / "composites";
        fs::create_directories(dir);
        const auto& seqs = td.val.empty() ? td.train : td.val;
        torch::NoGradGuard no_grad;
        for (std::size_t i = 0; i < std::min<std::size_t>(seqs.size(), 4); ++i) {
            const auto pred = train::predict(models, seqs[i].frames[0], tc.rollout_length, tc.score_threshold);
            for (std::size_t k = 0; k < pred.composites.size(); ++k) {
                write_png_rgb8(dir / (seqs[i].name + "_t" + std::to_string(k + 1) + ".png"),
                               eval::composite_tiles(pred.composites[k]));
            }
        }
    }
    std::cout << "trained " << result.steps.size() << " steps, skipped " << result.total_skipped
              << " sequences; model -> " << (out / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_predict(const GlobalOptions& g, const fs::path& checkpoint, const fs::path& input, int horizon) {
    const fs::path out = require_out(g, "predict");
    const KeyValueConfig kv = resolve_config(g);
    if (horizon < 1) {
        horizon = static_cast<int>(kv.get_int("eval.horizon", 3));
    }
    torch::set_num_threads(1);
    train::Models models = train::load_models(checkpoint);
    const Frame frame = read_png_rgb8(input);
    if (frame.height != models.config.image_size || frame.width != models.config.image_size) {
        throw ShapeError("input frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                         ", model expects " + std::to_string(models.config.image_size) + " square");
    }
    torch::NoGradGuard no_grad;
    const auto pred = train::predict(models, nn::frame_to_tensor(frame), horizon, models.config.score_threshold);
    write_run_config(out, kv, "predict");
    for (int k = 0; k < horizon; ++k) {
        write_png_rgb8(out / ("pred_" + std::to_string(k + 1) + ".png"),
                       nn::tensor_to_frame(pred.frames[static_cast<std::size_t>(k)]));
    }
    std::cout << "wrote " << horizon << " frames to " << out.string() << "\n";
    return 0;
}

int cmd_evaluate(const GlobalOptions& g, const fs::path& checkpoint, const fs::path& data, const std::string& split,
                 int horizon, bool dump_frames) {
    const fs::path out = require_out(g, "evaluate");
    const KeyValueConfig kv = resolve_config(g);
    torch::set_num_threads(1);
    train::Models models = train::load_models(checkpoint);
    eval::EvalOptions opts;
    opts.horizon = horizon > 0 ? horizon : static_cast<int>(kv.get_int("eval.horizon", 3));
    opts.score_threshold = models.config.score_threshold;
    if (dump_frames) {
        opts.dump_dir = out / "frames";
    }
    write_run_config(out, kv, "evaluate");
    const eval::EvalReport report = eval::evaluate_split(models, data, world::split_from_string(split), opts);
    std::ofstream(out / "report.json") << eval::report_to_json(report).dump(2) << "\n";
    std::cout << eval::report_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Object-centric video prediction on synthetic falling blocks"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    long long seed = 0;
    app.add_option("--config", g.config_path, "key = value config file");
    auto* seed_opt = app.add_option("--seed", seed, "seed for world generation and training");
    app.add_option("--out", g.out, "output directory");
    app.footer(std::string("Any config key can be overridden from the environment: world.num_blocks -> ") + kEnvPrefix +
               "WORLD_NUM_BLOCKS.");

    int n = 0;
    auto* gen = app.add_subcommand("generate", "simulate a dataset");
    gen->add_option("--n", n, "number of sequences")->check(CLI::PositiveNumber);

    std::string data, annotations, flow = "oracle", segmenter, checkpoint, input, split = "test";
    int horizon = 0;
    bool resume = false, dump_composites = false, dump_frames = false;

    auto* ann = app.add_subcommand("annotate", "pseudo labels from flow for the train split");
    ann->add_option("--data", data, "dataset directory")->required();
    ann->add_option("--flow", flow, "flow source")->check(CLI::IsMember({"oracle", "block-matching"}));

    auto* pre = app.add_subcommand("pretrain-seg", "phase 1: segmenter on pseudo labels");
    pre->add_option("--data", data, "dataset directory")->required();
    pre->add_option("--annotations", annotations, "native annotation file (default <data>/annotations.json)");
    pre->add_flag("--resume", resume, "continue from <out>/segmenter.ckpt");

    auto* trn = app.add_subcommand("train", "phase 2: joint training");
    trn->add_option("--data", data, "dataset directory")->required();
    trn->add_option("--annotations", annotations, "native annotation file (default <data>/annotations.json)");
    trn->add_option("--segmenter", segmenter, "skip phase 1 and load this segmenter checkpoint");
    trn->add_flag("--dump-composites", dump_composites, "write compositing tiles for a few sequences");

    auto* prd = app.add_subcommand("predict", "roll out from a single frame");
    prd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    prd->add_option("--input", input, "input PNG")->required()->check(CLI::ExistingFile);
    prd->add_option("--horizon", horizon, "frames to predict")->check(CLI::PositiveNumber);

    auto* evl = app.add_subcommand("evaluate", "metrics on a held-out split");
    evl->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    evl->add_option("--data", data, "dataset directory")->required();
    evl->add_option("--split", split, "split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
    evl->add_option("--horizon", horizon, "frames to predict")->check(CLI::PositiveNumber);
    evl->add_flag("--dump-frames", dump_frames, "write GT / predicted frame strips");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) {
        g.seed = seed;
    }
    const fs::path ann_path = annotations.empty() ? fs::path(data) / "annotations.json" : fs::path(annotations);

    try {
        if (gen->parsed()) {
            return cmd_generate(g, n);
        }
        if (ann->parsed()) {
            return cmd_annotate(g, data, flow);
        }
        if (pre->parsed()) {
            return cmd_pretrain(g, data, ann_path, resume);
        }
        if (trn->parsed()) {
            return cmd_train(g, data, ann_path, segmenter, dump_composites);
        }
        if (prd->parsed()) {
            return cmd_predict(g, checkpoint, input, horizon);
        }
        if (evl->parsed()) {
            return cmd_evaluate(g, checkpoint, data, split, horizon, dump_frames);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidConfig& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
