#include <gtest/gtest.h>

#include <array>
#include <random>

#include "../support/fixtures.hpp"
#include "objpred/core/types.hpp"
#include "objpred/dynamics/consistency.hpp"
#include "objpred/dynamics/dynamics.hpp"
#include "objpred/generator/compositing.hpp"
#include "objpred/generator/networks.hpp"
#include "objpred/segmenter/roi_align.hpp"

using namespace objpred;
using seg::kPatchSize;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

dyn::Entities random_entities(int n, int channels, double image, std::uint64_t seed) {
    torch::manual_seed(seed);
    std::mt19937 rng(static_cast<unsigned>(seed));
    std::uniform_real_distribution<double> pos(0.0, image * 0.6), ext(6.0, image * 0.35);
    dyn::Entities e;
    e.boxes = torch::empty({n, 4}, kF64);
    for (int i = 0; i < n; ++i) {
        e.ids.push_back(i);
        const double x = pos(rng), y = pos(rng);
        e.boxes[i][0] = x;
        e.boxes[i][1] = y;
        e.boxes[i][2] = std::min(image, x + ext(rng));
        e.boxes[i][3] = std::min(image, y + ext(rng));
    }
    e.features = torch::randn({n, channels, kPatchSize, kPatchSize}, kF64);
    e.masks = torch::rand({n, kPatchSize, kPatchSize}, kF64);
    return e;
}

// Smooth bump so the round trip measures interpolation, not aliasing of hard edges.
torch::Tensor smooth_mask() {
    const auto r = (torch::arange(kPatchSize, kF64) + 0.5) / kPatchSize - 0.5;
    return torch::exp(-(r.unsqueeze(1).pow(2) + r.unsqueeze(0).pow(2)) * 6.0);
}

}  // namespace

TEST(Dynamics, PredictorIsIdentityAtInitialisation) {
    torch::manual_seed(0);
    dyn::DynamicsNet net;
    const auto z = torch::randn({5, net->config().latent});
    EXPECT_TRUE(torch::equal(net->predict(z), z));
}

TEST(Dynamics, EncodingIsDeterministicAndSeesTheBox) {
    torch::manual_seed(1);
    dyn::DynamicsNet net;
    auto e = random_entities(1, 32, 64, 3);
    const auto b = e.boxes.to(torch::kFloat32), f = e.features.to(torch::kFloat32), m = e.masks.to(torch::kFloat32);
    const auto z1 = net->encode(b, f, m), z2 = net->encode(b, f, m);
    EXPECT_TRUE(torch::equal(z1, z2));
    EXPECT_FALSE(torch::allclose(net->encode(b + 3.0, f, m), z1));
    const auto zero = net->encode(torch::zeros({1, 4}), torch::zeros_like(f), torch::zeros_like(m));
    EXPECT_TRUE(torch::isfinite(zero).all().item<bool>());
}

TEST(Dynamics, StepIsPerEntityAndPermutationEquivariant) {
    torch::manual_seed(2);
    dyn::DynamicsNet net;
    auto e = random_entities(4, 32, 64, 5);
    e.boxes = e.boxes.to(torch::kFloat32);
    e.features = e.features.to(torch::kFloat32);
    e.masks = e.masks.to(torch::kFloat32);
    const auto out = net->step(e);
    const std::vector<int64_t> order{2, 0, 3, 1};
    const auto out_p = net->step(e.permuted(order));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto j = order[i];
        EXPECT_EQ(out_p.ids[i], out.ids[static_cast<std::size_t>(j)]);
        EXPECT_TRUE(torch::allclose(out_p.boxes[static_cast<int64_t>(i)], out.boxes[j], 1e-5, 1e-5));
        EXPECT_TRUE(torch::allclose(out_p.masks[static_cast<int64_t>(i)], out.masks[j], 1e-5, 1e-5));
    }
    const auto single = net->predict(torch::randn({1, net->config().latent}));
    EXPECT_EQ(single.size(0), 1);
}

TEST(Dynamics, DecodedBoxesHavePositiveExtent) {
    torch::manual_seed(3);
    dyn::DynamicsNet net;
    const auto d = net->decode(torch::randn({16, net->config().latent}) * 5);
    EXPECT_TRUE((d.boxes.select(1, 2) > d.boxes.select(1, 0)).all().item<bool>());
    EXPECT_TRUE((d.boxes.select(1, 3) > d.boxes.select(1, 1)).all().item<bool>());
    EXPECT_TRUE((d.masks >= 0).logical_and(d.masks <= 1).all().item<bool>());
}

TEST(Dynamics, ClosedFormFitReconstructsALowRankPool) {
    torch::manual_seed(6);
    dyn::DynamicsConfig cfg;
    cfg.channels = 8;
    dyn::DynamicsNet net(cfg);
    auto pool = random_entities(300, 8, 64, 7);
    // Features and masks from a handful of shared patterns.
    const auto basis = torch::randn({6, 8 * kPatchSize * kPatchSize}, kF64);
    pool.features = torch::randn({300, 6}, kF64).mm(basis).view({300, 8, kPatchSize, kPatchSize});
    pool.masks = smooth_mask().unsqueeze(0) * torch::rand({300, 1, 1}, kF64) * 0.8 + 0.1;
    const auto b = pool.boxes.to(torch::kFloat32), f = pool.features.to(torch::kFloat32),
               m = pool.masks.to(torch::kFloat32);
    const auto pred_before = net->predict(torch::ones({2, cfg.latent}));

    auto roundtrip_error = [&] {
        torch::NoGradGuard g;
        const auto d = net->decode(net->encode(b, f, m));
        return std::array<double, 2>{(d.boxes - b).abs().mean().item<double>(), (d.masks - m).abs().mean().item<double>()};
    };
    const auto before = roundtrip_error();
    net->fit_autoencoder(b, f, m);
    const auto after = roundtrip_error();
    EXPECT_LT(after[0], 1.0);
    EXPECT_LT(after[0], before[0]);
    EXPECT_LT(after[1], 0.05);
    EXPECT_TRUE(torch::equal(net->predict(torch::ones({2, cfg.latent})), pred_before));
}

TEST(Dynamics, PredictorGradientMatchesCentralDifferences) {
    torch::manual_seed(4);
    dyn::DynamicsConfig cfg;
    cfg.latent = 12;
    cfg.hidden = 16;
    cfg.box_code = 4;
    dyn::DynamicsNet net(cfg);
    net->to(torch::kFloat64);
    // Give the residual branch something to differentiate.
    for (auto& p : net->named_parameters()) {
        if (p.key().rfind("pred4", 0) == 0) {
            torch::NoGradGuard g;
            p.value().normal_(0.0, 0.3);
        }
    }
    const auto w = torch::randn({2, 12}, kF64);
    const auto g = fixtures::check_gradient([&](const torch::Tensor& z) { return (net->predict(z) * w).sum(); },
                                           torch::randn({2, 12}, kF64), 1e-6);
    EXPECT_LT(g.rel_error, 1e-4);
}

TEST(Consistency, OnePixelPatchHandExample) {
    // m_dyn = 1, f_dyn = 2 against m_seg = 1, f_seg = 0; x1 differs by 0.1.
    const auto ones = torch::ones({1, 1, 1}, kF64);
    const auto l = dyn::consistency_terms(torch::tensor({{0.1, 0.0, 1.0, 1.0}}, kF64), torch::full({1, 1, 1, 1}, 2.0, kF64),
                                          ones, torch::tensor({{0.0, 0.0, 1.0, 1.0}}, kF64),
                                          torch::zeros({1, 1, 1, 1}, kF64), ones, 1.0);
    EXPECT_NEAR(l.item<double>(), 4.01, 1e-9);
}

TEST(Consistency, UnmatchedEntitiesContributeNothing) {
    const auto e = random_entities(2, 3, 64, 7);
    seg::DetectionBatch d{e.boxes.index({torch::indexing::Slice(0, 1)}), torch::ones({1}, kF64),
                          e.features.index({torch::indexing::Slice(0, 1)}), e.masks.index({torch::indexing::Slice(0, 1)})};
    EXPECT_NEAR(dyn::consistency_loss(e, d, {0, -1}, 64).item<double>(), 0.0, 1e-12);
    EXPECT_NEAR(dyn::consistency_loss(e, d, {-1, -1}, 64).item<double>(), 0.0, 1e-12);
}

TEST(Consistency, GradientsMatchCentralDifferences) {
    const auto pred = random_entities(3, 2, 32, 8);
    const auto det = random_entities(3, 2, 32, 9);
    seg::DetectionBatch d{det.boxes, torch::ones({3}, kF64), det.features, det.masks};
    const std::vector<int> match{2, -1, 0};
    auto with = [&](const torch::Tensor& boxes, const torch::Tensor& features, const torch::Tensor& masks) {
        dyn::Entities e = pred;
        e.boxes = boxes;
        e.features = features;
        e.masks = masks;
        return dyn::consistency_loss(e, d, match, 32);
    };
    const auto gf = fixtures::check_gradient([&](const torch::Tensor& f) { return with(pred.boxes, f, pred.masks); },
                                            pred.features, 1e-4);
    const auto gm = fixtures::check_gradient([&](const torch::Tensor& m) { return with(pred.boxes, pred.features, m); },
                                            pred.masks, 1e-4);
    const auto gb = fixtures::check_gradient([&](const torch::Tensor& b) { return with(b, pred.features, pred.masks); },
                                            pred.boxes, 1e-4);
    EXPECT_LT(gf.rel_error, 1e-4);
    EXPECT_LT(gm.rel_error, 1e-4);
    EXPECT_LT(gb.rel_error, 1e-4);
}

TEST(GammaPaste, ConstantMasksAndFullImage) {
    const auto full = torch::tensor({{0.0, 0.0, 32.0, 24.0}}, kF64);
    EXPECT_TRUE(torch::allclose(gen::gamma_paste_masks(torch::ones({1, kPatchSize, kPatchSize}, kF64), full, 24, 32),
                                torch::ones({1, 24, 32}, kF64)));
    const auto any = torch::tensor({{3.5, 2.0, 17.0, 9.0}}, kF64);
    EXPECT_EQ(gen::gamma_paste_masks(torch::zeros({1, kPatchSize, kPatchSize}, kF64), any, 24, 32).abs().sum().item<double>(),
              0.0);
}

TEST(GammaPaste, WritesOnlyInsideTheBox) {
    const auto pasted = gen::gamma_paste_masks(torch::ones({1, kPatchSize, kPatchSize}, kF64),
                                               torch::tensor({{4.0, 6.0, 12.0, 9.0}}, kF64), 16, 16)[0];
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const bool inside = x >= 4 && x < 12 && y >= 6 && y < 9;
            EXPECT_DOUBLE_EQ(pasted[y][x].item<double>(), inside ? 1.0 : 0.0) << x << "," << y;
        }
    }
    EXPECT_THROW(gen::gamma_paste_masks(torch::ones({1, kPatchSize, kPatchSize}), torch::tensor({{4.0f, 6.0f, 4.0f, 9.0f}}), 16,
                                        16),
                 InvalidBox);
}

TEST(GammaPaste, PasteThenCropRecoversSmoothMasks) {
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> size(14.0, 40.0), pos(0.0, 20.0);
    const auto mask = smooth_mask();
    for (int trial = 0; trial < 20; ++trial) {
        const double x = pos(rng), y = pos(rng);
        const auto box = torch::tensor({{x, y, x + size(rng), y + size(rng)}}, kF64);
        const auto canvas = gen::gamma_paste_masks(mask.unsqueeze(0), box, 64, 64);
        const auto back = gen::crop_resize(canvas, box, kPatchSize)[0][0];
        EXPECT_LT((back - mask).abs().max().item<double>(), 0.1);
    }
}

TEST(Compositing, BackgroundMaskExamples) {
    const auto none = torch::zeros({0, 4, 4}, kF64);
    EXPECT_TRUE(torch::equal(gen::background_mask(none, none, 4, 4), torch::ones({4, 4}, kF64)));

    auto left = torch::zeros({1, 4, 4}, kF64);
    left.index_put_({0, torch::indexing::Slice(), torch::indexing::Slice(0, 2)}, 1.0);
    const auto back = gen::background_mask(left, left, 4, 4);
    EXPECT_EQ(back.index({torch::indexing::Slice(), torch::indexing::Slice(0, 2)}).abs().sum().item<double>(), 0.0);
    EXPECT_EQ(back.index({torch::indexing::Slice(), torch::indexing::Slice(2, 4)}).min().item<double>(), 1.0);
    EXPECT_GE(back.min().item<double>(), 0.0);
}

TEST(Compositing, BackgroundPixelsGateThePreviousFrame) {
    torch::manual_seed(11);
    const auto prev = torch::rand({3, 6, 6}, kF64);
    const auto checker = ((torch::arange(6).unsqueeze(1) + torch::arange(6).unsqueeze(0)) % 2).to(torch::kFloat64);
    const auto out = gen::background_pixels(checker, prev);
    EXPECT_TRUE(torch::equal(out, prev * checker));
    EXPECT_TRUE(torch::equal(gen::background_pixels(torch::ones({6, 6}, kF64), prev), prev));
    EXPECT_EQ(gen::background_pixels(torch::zeros({6, 6}, kF64), prev).abs().sum().item<double>(), 0.0);
    EXPECT_THROW(gen::background_pixels(torch::ones({5, 6}, kF64), prev), ShapeError);
}

TEST(Compositing, SyntheticMaskCoversTheVacatedRegion) {
    // Block at columns 2..4 moves right by its width to columns 5..7.
    auto before = torch::zeros({1, 8, 10}, kF64), after = torch::zeros({1, 8, 10}, kF64);
    before.index_put_({0, torch::indexing::Slice(2, 6), torch::indexing::Slice(2, 5)}, 1.0);
    after.index_put_({0, torch::indexing::Slice(2, 6), torch::indexing::Slice(5, 8)}, 1.0);
    const auto back = gen::background_mask(before, after, 8, 10);
    const auto synth = gen::synthetic_mask(back, after);
    EXPECT_TRUE(torch::equal(synth, before[0]));

    const auto none = torch::zeros({0, 8, 10}, kF64);
    EXPECT_EQ(gen::synthetic_mask(torch::ones({8, 10}, kF64), none).abs().sum().item<double>(), 0.0);
}

TEST(Compositing, HardPartitionTakesEachPixelFromOneSource) {
    torch::manual_seed(12);
    const auto prev = torch::rand({3, 8, 8}, kF64), obj_src = torch::rand({3, 8, 8}, kF64),
               synth_src = torch::rand({3, 8, 8}, kF64);
    const auto label = torch::randint(0, 3, {8, 8});
    const auto dyn = (label == 1).to(torch::kFloat64).unsqueeze(0);
    const auto back = (label == 0).to(torch::kFloat64);
    const auto synth = gen::synthetic_mask(back, dyn);
    EXPECT_TRUE(torch::equal(synth, (label == 2).to(torch::kFloat64)));
    const auto un = gen::compose_unrefined(gen::background_pixels(back, prev), obj_src * dyn, synth_src * synth);
    const auto expected = torch::where(label == 0, prev, torch::where(label == 1, obj_src, synth_src));
    EXPECT_TRUE(torch::allclose(un, expected));
    EXPECT_EQ(gen::compose_unrefined(torch::zeros_like(prev), torch::zeros_like(prev), torch::zeros_like(prev))
                  .abs()
                  .sum()
                  .item<double>(),
              0.0);
}

TEST(Compositing, MasksPartitionTheImage) {
    torch::manual_seed(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int e = static_cast<int>(torch::randint(0, 4, {1}).item<int64_t>());
        auto dyn = torch::rand({e, 12, 12}, kF64);
        if (e > 0) {
            dyn = dyn / dyn.sum(0).clamp_min(1.0) * torch::rand({12, 12}, kF64);
        }
        const auto seg_prev = torch::rand({2, 12, 12}, kF64) * 0.6;
        const auto back = gen::background_mask(seg_prev, dyn, 12, 12);
        const auto synth = gen::synthetic_mask(back, dyn);
        const auto total = back + synth + gen::sum_masks(dyn, 12, 12, kF64);
        EXPECT_LT((total - 1.0).abs().max().item<double>(), 1e-5);
        EXPECT_GE(synth.min().item<double>(), 0.0);
    }
}

TEST(Networks, DecodedPatchIsDeterministicAndBounded) {
    torch::manual_seed(14);
    gen::PatchDecoder dec(4);
    const auto f = torch::randn({2, 4, kPatchSize, kPatchSize}) * 10, m = torch::rand({2, kPatchSize, kPatchSize});
    const auto a = dec->forward(f, m), b = dec->forward(f, m);
    EXPECT_TRUE(torch::equal(a, b));
    EXPECT_EQ(a.sizes(), (std::vector<int64_t>{2, 3, kPatchSize, kPatchSize}));
    EXPECT_GE(a.min().item<double>(), 0.0);
    EXPECT_LE(a.max().item<double>(), 1.0);
}

TEST(Networks, DecoderGradientMatchesCentralDifferences) {
    torch::manual_seed(15);
    gen::PatchDecoder dec(3, 8);
    dec->to(torch::kFloat64);
    const auto m = torch::rand({1, kPatchSize, kPatchSize}, kF64);
    const auto w = torch::randn({1, 3, kPatchSize, kPatchSize}, kF64);
    const auto g = fixtures::check_gradient([&](const torch::Tensor& f) { return (dec->forward(f, m) * w).sum(); },
                                           torch::randn({1, 3, kPatchSize, kPatchSize}, kF64), 1e-6);
    EXPECT_GT(g.analytic_norm, 0.0);
    EXPECT_LT(g.rel_error, 1e-4);
}

TEST(Networks, InpainterGradientMatchesCentralDifferences) {
    torch::manual_seed(16);
    gen::Inpainter psi(8);
    psi->to(torch::kFloat64);
    const auto back = torch::rand({3, 16, 16}, kF64);
    const auto w = torch::randn({1, 3, 16, 16}, kF64);
    const auto obj = torch::rand({3, 16, 16}, kF64);
    const auto out = psi->forward(obj, back);
    EXPECT_GE(out.min().item<double>(), 0.0);
    EXPECT_LE(out.max().item<double>(), 1.0);
    const auto g = fixtures::check_gradient([&](const torch::Tensor& o) { return (psi->forward(o, back) * w).sum(); }, obj,
                                           1e-6);
    EXPECT_GT(g.analytic_norm, 0.0);
    EXPECT_LT(g.rel_error, 1e-4);
}

TEST(Networks, RefinerStartsAsIdentityAndPassesGradient) {
    torch::manual_seed(17);
    gen::Refiner refiner;
    const auto x = torch::rand({3, 16, 16}).set_requires_grad(true);
    const auto y = refiner->forward(x);
    EXPECT_TRUE(torch::allclose(y, x));
    (y * torch::randn_like(y)).sum().backward();
    EXPECT_GT(x.grad().abs().sum().item<double>(), 0.0);
}

TEST(Generator, ComposeObjectsIsLinearInDisjointEntities) {
    torch::manual_seed(18);
    gen::PatchDecoder dec(3);
    dec->to(torch::kFloat64);
    auto e = random_entities(2, 3, 32, 19);
    e.boxes = torch::tensor({{1.0, 2.0, 12.0, 14.0}, {16.0, 15.0, 30.0, 31.0}}, kF64);
    const auto [both, masks] = gen::compose_objects(*dec, e, 32, 32);
    const auto [a, ma] = gen::compose_objects(*dec, e.permuted({0}), 32, 32);
    const auto [b, mb] = gen::compose_objects(*dec, e.permuted({1}), 32, 32);
    EXPECT_TRUE(torch::allclose(both, a + b));
    EXPECT_EQ(masks.size(0), 2);

    // A duplicated entity does not brighten the pixels it covers.
    auto twice = e.permuted({0, 0});
    twice.masks = torch::ones_like(twice.masks);
    const auto [dup, dup_masks] = gen::compose_objects(*dec, twice, 32, 32);
    const auto [single, single_masks] = gen::compose_objects(*dec, twice.permuted({0}), 32, 32);
    EXPECT_TRUE(torch::allclose(dup, single));

    dyn::Entities empty;
    empty.boxes = torch::zeros({0, 4}, kF64);
    empty.features = torch::zeros({0, 3, kPatchSize, kPatchSize}, kF64);
    empty.masks = torch::zeros({0, kPatchSize, kPatchSize}, kF64);
    const auto [none, no_masks] = gen::compose_objects(*dec, empty, 32, 32);
    EXPECT_EQ(none.abs().sum().item<double>(), 0.0);
    EXPECT_EQ(no_masks.size(0), 0);
}

TEST(Generator, EmptySceneCopiesThePreviousFrame) {
    torch::manual_seed(20);
    gen::Generator g(4);
    g.to(torch::kFloat64);
    dyn::Entities empty;
    empty.boxes = torch::zeros({0, 4}, kF64);
    empty.features = torch::zeros({0, 4, kPatchSize, kPatchSize}, kF64);
    empty.masks = torch::zeros({0, kPatchSize, kPatchSize}, kF64);
    const auto prev = torch::rand({3, 16, 16}, kF64);
    const auto c = g.generate(prev, torch::zeros({0, 16, 16}, kF64), empty);
    EXPECT_TRUE(torch::allclose(c.final, prev));
    EXPECT_EQ(c.synth.abs().sum().item<double>(), 0.0);
}

TEST(Generator, OutputMasksPartitionAndGateTheirSources) {
    torch::manual_seed(21);
    gen::Generator g(4);
    g.to(torch::kFloat64);
    auto e = random_entities(2, 4, 32, 22);
    const auto prev = torch::rand({3, 32, 32}, kF64);
    const auto seg_prev = gen::gamma_paste_masks(torch::rand({1, kPatchSize, kPatchSize}, kF64),
                                                 torch::tensor({{3.0, 3.0, 15.0, 12.0}}, kF64), 32, 32);
    const auto c = g.generate(prev, seg_prev, e);
    const auto dyn_sum = gen::sum_masks(c.dyn_masks, 32, 32, kF64);
    const auto region = dyn_sum <= 1.0;
    const auto err = (c.back_mask + c.synth_mask + dyn_sum - 1.0).abs().masked_select(region);
    EXPECT_LT(err.max().item<double>(), 1e-5);
    EXPECT_EQ(c.synth.masked_select((c.synth_mask == 0).unsqueeze(0).expand_as(c.synth)).abs().sum().item<double>(), 0.0);
    EXPECT_EQ(c.back.masked_select((c.back_mask == 0).unsqueeze(0).expand_as(c.back)).abs().sum().item<double>(), 0.0);
    const auto again = g.generate(prev, seg_prev, e);
    EXPECT_TRUE(torch::equal(again.final, c.final));
}

TEST(Generator, EndToEndGradientMatchesCentralDifferences) {
    torch::manual_seed(23);
    gen::Generator g(3);
    g.to(torch::kFloat64);
    // Move the refiner off its identity start so the check covers it too.
    for (auto& p : g.refiner->parameters()) {
        torch::NoGradGuard ng;
        p.add_(torch::randn_like(p) * 0.05);
    }
    auto e = random_entities(2, 3, 32, 24);
    e.boxes = torch::tensor({{2.3, 4.1, 17.6, 19.2}, {14.2, 12.7, 29.5, 30.1}}, kF64);
    const auto prev = torch::rand({3, 32, 32}, kF64) * 0.5;
    const auto target = torch::rand({3, 32, 32}, kF64);
    const auto seg_prev = torch::zeros({0, 32, 32}, kF64);
    using torch::indexing::Slice;
    // Perturb a 3x3 window of every patch; the rest of the features stay fixed.
    const auto fn = [&](const torch::Tensor& window) {
        dyn::Entities x = e;
        x.features = e.features.clone();
        x.features.index_put_({Slice(), Slice(), Slice(4, 7), Slice(4, 7)}, window);
        return (g.generate(prev, seg_prev, x).final - target).pow(2).sum();
    };
    const auto full =
        fixtures::check_gradient(fn, e.features.index({Slice(), Slice(), Slice(4, 7), Slice(4, 7)}).clone(), 1e-6);
    EXPECT_GT(full.analytic_norm, 0.0);
    EXPECT_LT(full.rel_error, 1e-3);
}
