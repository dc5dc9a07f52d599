#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "../support/fixtures.hpp"
#include "objpred/core/types.hpp"
#include "objpred/nn/checkpoint.hpp"
#include "objpred/training/losses.hpp"
#include "objpred/training/models.hpp"
#include "objpred/training/rollout.hpp"
#include "objpred/training/trainer.hpp"

using namespace objpred;
using namespace objpred::train;
namespace fs = std::filesystem;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("objpred_train_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
    std::vector<torch::Tensor> out;
    for (const auto& p : params) {
        out.push_back(p.detach().clone());
    }
    return out;
}

bool any_changed(const std::vector<torch::Tensor>& before, const std::vector<torch::Tensor>& after) {
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (!torch::equal(before[i], after[i])) {
            return true;
        }
    }
    return false;
}

}  // namespace

TEST(PredictionLoss, OnePixelHandExample) {
    const auto t = prediction_loss(torch::full({3, 1, 1}, 0.5, kF64), torch::full({3, 1, 1}, 0.3, kF64),
                                   torch::zeros({3, 1, 1}, kF64), torch::ones({1, 1}, kF64));
    const auto l = combined_loss(t, torch::zeros({}, kF64), torch::zeros({}, kF64), {1.0, 1.0, 1.0});
    EXPECT_NEAR(l.pred.final.item<double>(), 0.25, 1e-12);
    EXPECT_NEAR(l.pred.unrefined.item<double>(), 0.09, 1e-12);
    EXPECT_NEAR(l.pred.masked.item<double>(), 0.25, 1e-12);
    EXPECT_NEAR(l.l_pred().item<double>(), 0.59, 1e-9);
}

TEST(PredictionLoss, PerfectPredictionAndEmptyMask) {
    torch::manual_seed(0);
    const auto img = torch::rand({3, 8, 8}, kF64);
    const auto t = prediction_loss(img, img, img, torch::ones({8, 8}, kF64));
    EXPECT_EQ(t.final.item<double>() + t.unrefined.item<double>() + t.masked.item<double>(), 0.0);
    const auto e = prediction_loss(img, img * 0.5, torch::zeros_like(img), torch::zeros({8, 8}, kF64));
    EXPECT_EQ(e.masked.item<double>(), 0.0);
}

TEST(PredictionLoss, MaskedTermAveragesOverOnPixels) {
    auto target = torch::zeros({3, 4, 4}, kF64);
    auto pred = torch::zeros({3, 4, 4}, kF64);
    pred.index_put_({torch::indexing::Slice(), 0, 0}, 1.0);
    auto mask = torch::zeros({4, 4}, kF64);
    mask[0][0] = 1;
    mask[3][3] = 1;
    const auto t = prediction_loss(pred, pred, target, mask);
    EXPECT_NEAR(t.masked.item<double>(), 0.5, 1e-12);
    EXPECT_NEAR(t.final.item<double>(), 1.0 / 16.0, 1e-12);
}

TEST(CombinedLoss, WeightedSumExamples) {
    const auto one = torch::ones({}, kF64);
    const PredictionTerms p{one, one, one};
    EXPECT_NEAR(combined_loss(p, one, one, {1.0, 2.0, 3.0}).total().item<double>(), 8.0, 1e-12);
    const auto no_aux = combined_loss(p, one * 5, one * 7, {1.0, 0.0, 0.0});
    EXPECT_NEAR(no_aux.total().item<double>(), no_aux.l_pred().item<double>(), 1e-12);
    const auto a = combined_loss(p, one * 2, one * 3, {0.5, 1.5, 2.5});
    const auto b = combined_loss({one * 4, one * 4, one * 4}, one * 8, one * 12, {0.5, 1.5, 2.5});
    EXPECT_NEAR(b.total().item<double>(), 4 * a.total().item<double>(), 1e-12);
    EXPECT_THROW(combined_loss(p, one, one, {1.0, -1.0, 1.0}), InvalidConfig);
}

TEST(CombinedLoss, BundleMatchesItsInvariants) {
    const PredictionTerms p{torch::tensor(0.2, kF64), torch::tensor(0.3, kF64), torch::tensor(0.4, kF64)};
    const auto v = combined_loss(p, torch::tensor(1.5, kF64), torch::tensor(2.5, kF64), {0.7, 0.2, 0.1}).values();
    EXPECT_NEAR(v.l_pred, v.l_pred_final + v.l_pred_unrefined + v.alpha * v.l_pred_masked, 1e-12);
    EXPECT_NEAR(v.total, v.l_pred + v.c1 * v.l_con + v.c2 * v.l_seg, 1e-12);
}

TEST(Checkpoint, RoundTripsTensorsAndBlobs) {
    const fs::path dir = temp_dir("ckpt");
    nn::Checkpoint c;
    c.config_hash = 0x1234abcdULL;
    c.tensors["a.f32"] = torch::randn({3, 4});
    c.tensors["b.f64"] = torch::randn({2}, kF64);
    c.tensors["c.i64"] = torch::tensor({7, -1}, torch::kInt64);
    c.tensors["d.scalar"] = torch::tensor(2.5);
    c.blobs["opt"] = std::string("bytes\0with\0nul", 14);
    c.save(dir / "x.ckpt");
    const auto r = nn::Checkpoint::load(dir / "x.ckpt");
    EXPECT_EQ(r.config_hash, c.config_hash);
    ASSERT_EQ(r.tensors.size(), c.tensors.size());
    for (const auto& [k, t] : c.tensors) {
        EXPECT_TRUE(torch::equal(r.tensors.at(k), t)) << k;
    }
    EXPECT_EQ(r.blobs.at("opt"), c.blobs.at("opt"));
    EXPECT_FALSE(fs::exists(dir / "x.ckpt.tmp"));
    EXPECT_THROW(nn::Checkpoint::load(dir / "missing.ckpt"), MissingCheckpoint);
}

TEST(Models, StoreRestoreAndRebuildFromCheckpoint) {
    const fs::path dir = temp_dir("models");
    ModelConfig mc;
    mc.channels = 8;
    mc.seed = 3;
    Models a(mc);
    nn::Checkpoint c;
    a.store(c);
    c.save(dir / "m.ckpt");

    mc.seed = 4;
    Models b(mc);
    EXPECT_TRUE(any_changed(snapshot(a.parameters()), snapshot(b.parameters())));
    b.restore(nn::Checkpoint::load(dir / "m.ckpt"));
    EXPECT_FALSE(any_changed(snapshot(a.parameters()), snapshot(b.parameters())));

    Models loaded = load_models(dir / "m.ckpt");
    EXPECT_EQ(loaded.config.channels, 8);
    EXPECT_FALSE(any_changed(snapshot(a.parameters()), snapshot(loaded.parameters())));
    EXPECT_THROW(load_models(dir / "none.ckpt"), MissingCheckpoint);
}

TEST(Models, SameSeedSameInitialisation) {
    ModelConfig mc;
    mc.channels = 8;
    Models a(mc), b(mc);
    EXPECT_FALSE(any_changed(snapshot(a.parameters()), snapshot(b.parameters())));
}

TEST(TrainConfig, KeyValueRoundTripAndValidation) {
    TrainConfig c;
    c.weights = {0.5, 2.0, 0.25};
    c.rollout_length = 2;
    c.seed = 77;
    const auto back = TrainConfig::from_kv(c.to_kv());
    EXPECT_EQ(back.to_kv().values(), c.to_kv().values());
    EXPECT_EQ(config_hash(back), config_hash(c));

    auto kv = c.to_kv();
    kv.set("train.rollout_length", "0");
    EXPECT_THROW(TrainConfig::from_kv(kv), InvalidConfig);
    kv = c.to_kv();
    kv.set("train.c2", "-1");
    EXPECT_THROW(TrainConfig::from_kv(kv), InvalidConfig);
}

TEST(Rollout, DetectionUnionMaskThresholdsThePastedMasks) {
    seg::DetectionBatch none;
    EXPECT_EQ(detection_union_mask(none, 8, 8).sum().item<double>(), 0.0);
    seg::DetectionBatch two;
    two.boxes = torch::tensor({0.0, 0.0, 4.0, 4.0, 4.0, 4.0, 8.0, 8.0}).view({2, 4});
    two.masks = torch::stack({torch::ones({14, 14}), torch::full({14, 14}, 0.3)});
    const auto u = detection_union_mask(two, 8, 8);
    EXPECT_EQ(u.sizes(), (std::vector<int64_t>{8, 8}));
    EXPECT_EQ(u.slice(0, 0, 4).slice(1, 0, 4).sum().item<double>(), 16.0);
    EXPECT_EQ(u.sum().item<double>(), 16.0);
}

TEST(Rollout, NoDetectionsSkipsTheSequence) {
    const auto data = fixtures::make_train_data(1, 0, 4);
    ModelConfig mc;
    mc.channels = 8;
    Models models(mc);
    RolloutOptions ro;
    ro.score_threshold = 1.01;
    const auto r = rollout(models, data.train[0], ro);
    EXPECT_TRUE(r.skipped);
    EXPECT_FALSE(r.skip_reason.empty());
}

TEST(Rollout, LossesAreFiniteAndStepsMatchTheLength) {
    const auto data = fixtures::make_train_data(3, 0, 5);
    ModelConfig mc;
    mc.channels = 8;
    Models models(mc);
    RolloutOptions ro;
    ro.score_threshold = 0.0;
    ro.rollout_length = 2;
    for (const auto& seq : data.train) {
        const auto r = rollout(models, seq, ro);
        ASSERT_FALSE(r.skipped);
        EXPECT_EQ(r.steps.size(), 2u);
        const auto v = r.losses.values();
        for (double x : {v.l_pred_final, v.l_pred_unrefined, v.l_pred_masked, v.l_con, v.l_seg, v.total}) {
            EXPECT_TRUE(std::isfinite(x));
            EXPECT_GE(x, 0.0);
        }
        EXPECT_NEAR(v.total, v.l_pred + v.c1 * v.l_con + v.c2 * v.l_seg, 1e-5 * std::max(1.0, v.total));
        for (const auto& s : r.steps) {
            EXPECT_EQ(s.predicted.ids, r.initial.ids);
        }
    }
}

TEST(Rollout, PredictUsesOnlyTheFirstFrame) {
    const auto data = fixtures::make_train_data(1, 0, 6);
    ModelConfig mc;
    mc.channels = 8;
    Models models(mc);
    torch::NoGradGuard ng;
    const auto a = predict(models, data.train[0].frames[0], 3, 0.0);
    EXPECT_EQ(a.frames.size(), 3u);
    EXPECT_EQ(a.composites.size(), 3u);
    const auto b = predict(models, data.train[0].frames[0].clone(), 3, 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_TRUE(torch::equal(a.frames[k], b.frames[k]));
    }
}

TEST(Trainer, OnePhaseTwoStepMovesEveryPart) {
    const auto data = fixtures::make_train_data(2, 0, 7);
    auto cfg = fixtures::tiny_config();
    cfg.steps = 0;
    cfg.score_threshold = 0.0;
    Models models(cfg.model_config(data.image_size));
    train::train(cfg, data, models, {});

    const auto seg0 = snapshot(models.segmenter->parameters());
    const auto dyn0 = snapshot(models.dynamics->parameters());
    const auto dec0 = snapshot(models.generator.decoder->parameters());
    const auto inp0 = snapshot(models.generator.inpainter->parameters());
    const auto ref0 = snapshot(models.generator.refiner->parameters());

    // One more step from here, without phase 1 and the warm-start.
    torch::optim::Adam opt(models.parameters(), torch::optim::AdamOptions(1e-3));
    RolloutOptions ro;
    ro.score_threshold = 0.0;
    const auto r = rollout(models, data.train[0], ro);
    ASSERT_FALSE(r.skipped);
    r.losses.total().backward();
    opt.step();

    EXPECT_TRUE(any_changed(seg0, snapshot(models.segmenter->parameters())));
    EXPECT_TRUE(any_changed(dyn0, snapshot(models.dynamics->parameters())));
    EXPECT_TRUE(any_changed(dec0, snapshot(models.generator.decoder->parameters())));
    EXPECT_TRUE(any_changed(inp0, snapshot(models.generator.inpainter->parameters())));
    EXPECT_TRUE(any_changed(ref0, snapshot(models.generator.refiner->parameters())));
}

TEST(Trainer, SegmenterStillLearnsWithoutTheSegmentationTerm) {
    const auto data = fixtures::make_train_data(1, 0, 8);
    ModelConfig mc;
    mc.channels = 8;
    Models models(mc);
    RolloutOptions ro;
    ro.score_threshold = 0.0;
    ro.weights.c2 = 0.0;
    const auto r = rollout(models, data.train[0], ro);
    ASSERT_FALSE(r.skipped);
    r.losses.total().backward();
    double grad = 0.0;
    for (const auto& p : models.segmenter->parameters()) {
        if (p.grad().defined()) {
            grad += p.grad().abs().sum().item<double>();
        }
    }
    EXPECT_GT(grad, 0.0);
}

TEST(Trainer, ZeroLearningRateKeepsMetricsConstant) {
    const auto data = fixtures::make_train_data(1, 0, 9);
    auto cfg = fixtures::tiny_config();
    cfg.learning_rate = 0.0;
    cfg.score_threshold = 0.0;
    Models models(cfg.model_config(data.image_size));
    const auto result = train::train(cfg, data, models, {});
    ASSERT_EQ(result.steps.size(), 3u);
    for (const auto& s : result.steps) {
        EXPECT_EQ(s.losses.total, result.steps.front().losses.total);
    }
}

TEST(Trainer, SameSeedSameCurveAndOutputs) {
    const auto data = fixtures::make_train_data(2, 1, 10);
    auto cfg = fixtures::tiny_config();
    cfg.score_threshold = 0.0;
    const fs::path d1 = temp_dir("det1"), d2 = temp_dir("det2");
    Models m1(cfg.model_config(data.image_size)), m2(cfg.model_config(data.image_size));
    const auto r1 = train::train(cfg, data, m1, d1), r2 = train::train(cfg, data, m2, d2);
    ASSERT_EQ(r1.steps.size(), r2.steps.size());
    for (std::size_t i = 0; i < r1.steps.size(); ++i) {
        EXPECT_NEAR(r1.steps[i].losses.total, r2.steps[i].losses.total, 1e-6);
    }
    EXPECT_EQ(r1.pretrain_losses, r2.pretrain_losses);
    EXPECT_EQ(r1.val_l_pred, r2.val_l_pred);
    for (const char* f : {"metrics.csv", "pretrain_loss.csv", "model.ckpt", "segmenter.ckpt"}) {
        EXPECT_TRUE(fs::exists(d1 / f)) << f;
    }
}

TEST(Trainer, MissingSegmenterCheckpointIsReported) {
    const auto data = fixtures::make_train_data(1, 0, 11);
    auto cfg = fixtures::tiny_config();
    Models models(cfg.model_config(data.image_size));
    EXPECT_THROW(train::train(cfg, data, models, {}, fs::path("/nonexistent/segmenter.ckpt")), MissingCheckpoint);
}

TEST(Trainer, MetricsLogHasOneRowPerStep) {
    const auto data = fixtures::make_train_data(1, 1, 12);
    auto cfg = fixtures::tiny_config();
    cfg.score_threshold = 0.0;
    const fs::path dir = temp_dir("csv");
    Models models(cfg.model_config(data.image_size));
    train::train(cfg, data, models, dir);
    std::ifstream in(dir / "metrics.csv");
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("step,", 0), 0u);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, cfg.steps);
}
