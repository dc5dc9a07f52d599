#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "objpred/core/flow_field.hpp"
#include "objpred/core/kv_config.hpp"
#include "objpred/core/png_io.hpp"
#include "objpred/worldgen/world.hpp"

namespace objpred::world {

enum class Split { Train, Val, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct SequenceEntry {
    std::string name;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::filesystem::path root;
    WorldConfig config;
    std::vector<SequenceEntry> sequences;

    [[nodiscard]] std::vector<std::string> names(Split split) const;
};

/// Everything stored for one sequence. Ground truth (masks, boxes, flow) is
/// for evaluation and the oracle flow provider only.
struct SequenceData {
    std::string name;
    std::vector<Frame> frames;
    std::vector<std::vector<Box>> boxes;   // [frame][block]
    std::vector<std::vector<Mask>> masks;  // [frame][block]
    std::vector<FlowField> flows;          // [frame] -> displacement to frame + 1
    std::vector<Color> colors;
};

/// Per-sequence seed, independent of generation order.
std::uint64_t sequence_seed(std::uint64_t dataset_seed, std::size_t index);

/// Simulates one sequence in memory, keeping every `steps_per_frame`-th scene.
SequenceData simulate_sequence(std::uint64_t seed, const WorldConfig& config, const std::string& name = {});

/// Number of train / val / test sequences for `n` sequences.
std::array<int, 3> split_counts(int n, double train_fraction, double val_fraction);

/// Writes `<root>/seq_<k>/frame_<t>.png`, `<root>/seq_<k>/meta.json`, flow PNG
/// pairs and `<root>/manifest.json`. The manifest is written last via rename,
/// so a failed run never leaves one behind.
DatasetManifest generate_dataset(const WorldConfig& config, const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& root);
SequenceData load_sequence(const std::filesystem::path& root, const std::string& name);

/// Flow components as 16-bit fixed point with 1/64 px resolution, offset 32768.
Gray16 encode_flow_component(const FlowField& flow, int component);
FlowField decode_flow(const Gray16& dx, const Gray16& dy);
FlowField quantize_flow(const FlowField& flow);

nlohmann::json world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const nlohmann::json& j);

/// `world.*` keys; absent keys keep their defaults.
WorldConfig world_config_from_kv(const KeyValueConfig& kv);
KeyValueConfig world_config_to_kv(const WorldConfig& config);

}  // namespace objpred::world
