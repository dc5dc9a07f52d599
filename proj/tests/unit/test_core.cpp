#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include "objpred/core/kv_config.hpp"
#include "objpred/core/png_io.hpp"
#include "objpred/core/rle.hpp"
#include "objpred/core/types.hpp"

using namespace objpred;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("objpred_core_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Box, IouOfIdenticalAndDisjointBoxes) {
    const Box a{0, 0, 10, 10};
    EXPECT_DOUBLE_EQ(box_iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(box_iou(a, {20, 20, 30, 30}), 0.0);
    EXPECT_NEAR(box_iou(a, {5, 0, 15, 10}), 50.0 / 150.0, 1e-12);
}

TEST(Mask, BoundingBoxIsTightAndExclusive) {
    Mask m(8, 8);
    m.at(2, 3) = 1;
    m.at(5, 6) = 1;
    const Box b = mask_bounding_box(m);
    EXPECT_EQ(b, (Box{3, 2, 7, 6}));
    EXPECT_EQ(mask_bounding_box(Mask(4, 4)), Box{});
}

TEST(Rle, RandomMasksRoundTrip) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = 1 + static_cast<int>(rng() % 20), w = 1 + static_cast<int>(rng() % 20);
        Mask m(h, w);
        const double density = (rng() % 100) / 100.0;
        for (auto& v : m.data) {
            v = (rng() % 1000) / 1000.0 < density ? 1 : 0;
        }
        const Rle rle = encode_rle(m);
        std::size_t total = 0;
        for (auto c : rle.counts) {
            total += c;
        }
        EXPECT_EQ(total, m.data.size());
        EXPECT_EQ(decode_rle(rle_from_json(rle_to_json(rle))), m);
    }
}

TEST(Rle, ColumnMajorStartsWithZeros) {
    Mask m(2, 2);
    m.at(0, 0) = 1;  // first pixel on -> leading zero-length run
    m.at(1, 1) = 1;
    const Rle rle = encode_rle(m);
    EXPECT_EQ(rle.counts, (std::vector<std::uint32_t>{0, 1, 2, 1}));
}

TEST(PngIo, Rgb8AndGray16RoundTrip) {
    const fs::path dir = temp_dir("png");
    Frame f(5, 7);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        f.pixels[i] = static_cast<float>(i % 256) / 255.0f;
    }
    write_png_rgb8(dir / "a.png", f);
    const Frame g = read_png_rgb8(dir / "a.png");
    ASSERT_TRUE(g.same_shape(f));
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        EXPECT_FLOAT_EQ(g.pixels[i], f.pixels[i]);
    }

    Gray16 img{3, 4, {0, 1, 255, 256, 32768, 65535, 12345, 2, 3, 4, 5, 6}};
    write_png_gray16(dir / "b.png", img);
    EXPECT_EQ(read_png_gray16(dir / "b.png").data, img.data);
    EXPECT_THROW(read_png_gray16(dir / "a.png"), IoError);
    EXPECT_THROW(read_png_rgb8(dir / "missing.png"), IoError);
}

TEST(KeyValueConfig, ParsesCommentsAndTypes) {
    const auto cfg = KeyValueConfig::parse("# comment\nworld.num_blocks = 4\n train.c1=0.5 \nflag = true\n");
    EXPECT_EQ(cfg.get_int("world.num_blocks", 0), 4);
    EXPECT_DOUBLE_EQ(cfg.get_double("train.c1", 0), 0.5);
    EXPECT_TRUE(cfg.get_bool("flag", false));
    EXPECT_EQ(cfg.get_int("missing", 9), 9);
    EXPECT_THROW((void)cfg.get_int("train.c1", 0), InvalidConfig);
    EXPECT_THROW(KeyValueConfig::parse("novalue\n"), InvalidConfig);
}

TEST(KeyValueConfig, EnvironmentOverridesKnownKeys) {
    auto cfg = KeyValueConfig::parse("world.num_blocks = 3\n");
    ::setenv("OBJPRED_TEST_WORLD_NUM_BLOCKS", "5", 1);
    cfg.apply_env("OBJPRED_TEST_");
    ::unsetenv("OBJPRED_TEST_WORLD_NUM_BLOCKS");
    EXPECT_EQ(cfg.get_int("world.num_blocks", 0), 5);
    EXPECT_EQ(KeyValueConfig::parse(cfg.serialize()).values(), cfg.values());
}
