#include "objpred/worldgen/dataset.hpp"

#include <cmath>
#include <fstream>

#include "objpred/core/rle.hpp"

namespace objpred::world {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kFlowScale = 64.0;
constexpr int kFlowOffset = 32768;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out << j.dump(1) << '\n';
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

std::string frame_file(int t) { return "frame_" + std::to_string(t) + ".png"; }

}  // namespace

std::string to_string(Split split) {
    switch (split) {
        case Split::Train:
            return "train";
        case Split::Val:
            return "val";
        case Split::Test:
            return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") {
        return Split::Train;
    }
    if (s == "val") {
        return Split::Val;
    }
    if (s == "test") {
        return Split::Test;
    }
    throw InvalidConfig("unknown split '" + s + "'");
}

std::vector<std::string> DatasetManifest::names(Split split) const {
    std::vector<std::string> out;
    for (const auto& e : sequences) {
        if (e.split == split) {
            out.push_back(e.name);
        }
    }
    return out;
}

std::uint64_t sequence_seed(std::uint64_t dataset_seed, std::size_t index) {
    return splitmix64(dataset_seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

std::array<int, 3> split_counts(int n, double train_fraction, double val_fraction) {
    const int n_train = static_cast<int>(std::lround(train_fraction * n));
    const int n_val = std::min(n - n_train, static_cast<int>(std::lround(val_fraction * n)));
    return {n_train, n_val, n - n_train - n_val};
}

SequenceData simulate_sequence(std::uint64_t seed, const WorldConfig& config, const std::string& name) {
    SequenceData seq;
    seq.name = name;
    SceneSpec scene = generate_scene(seed, config);
    for (const Block& b : scene.blocks) {
        seq.colors.push_back(b.color);
    }
    for (int t = 0; t < config.frames_per_sequence; ++t) {
        SceneSpec next = scene;
        for (int k = 0; k < config.steps_per_frame; ++k) {
            next = simulate_step(next);
        }
        auto [frame, gt] = render_pair(scene, next);
        seq.frames.push_back(std::move(frame));
        seq.boxes.push_back(std::move(gt.boxes));
        seq.masks.push_back(std::move(gt.masks));
        if (t + 1 < config.frames_per_sequence) {
            seq.flows.push_back(std::move(gt.flow));
        }
        scene = std::move(next);
    }
    return seq;
}

Gray16 encode_flow_component(const FlowField& flow, int component) {
    Gray16 img{flow.height, flow.width, std::vector<std::uint16_t>(static_cast<std::size_t>(flow.height) * flow.width)};
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::lround(static_cast<double>(flow.vectors[2 * i + component]) * kFlowScale) + kFlowOffset;
        img.data[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
    }
    return img;
}

FlowField decode_flow(const Gray16& dx, const Gray16& dy) {
    if (dx.height != dy.height || dx.width != dy.width) {
        throw ShapeError("decode_flow: component images differ in shape");
    }
    FlowField flow(dx.height, dx.width);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        flow.vectors[2 * i] = static_cast<float>((static_cast<int>(dx.data[i]) - kFlowOffset) / kFlowScale);
        flow.vectors[2 * i + 1] = static_cast<float>((static_cast<int>(dy.data[i]) - kFlowOffset) / kFlowScale);
    }
    return flow;
}

FlowField quantize_flow(const FlowField& flow) {
    return decode_flow(encode_flow_component(flow, 0), encode_flow_component(flow, 1));
}

json world_config_to_json(const WorldConfig& c) {
    return json{{"image_size", c.image_size},
                {"num_blocks", c.num_blocks},
                {"gravity", c.gravity},
                {"min_half_width", c.min_half_width},
                {"max_half_width", c.max_half_width},
                {"min_half_height", c.min_half_height},
                {"max_half_height", c.max_half_height},
                {"ground_margin", c.ground_margin},
                {"unstable_offset_min", c.unstable_offset_min},
                {"unstable_offset_max", c.unstable_offset_max},
                {"stable_offset_max", c.stable_offset_max},
                {"topple_angular_speed", c.topple_angular_speed},
                {"topple_slide_speed", c.topple_slide_speed},
                {"frames_per_sequence", c.frames_per_sequence},
                {"steps_per_frame", c.steps_per_frame},
                {"num_sequences", c.num_sequences},
                {"train_fraction", c.train_fraction},
                {"val_fraction", c.val_fraction},
                {"seed", c.seed}};
}

WorldConfig world_config_from_json(const json& j) {
    WorldConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.gravity = j.at("gravity").get<double>();
    c.min_half_width = j.at("min_half_width").get<double>();
    c.max_half_width = j.at("max_half_width").get<double>();
    c.min_half_height = j.at("min_half_height").get<double>();
    c.max_half_height = j.at("max_half_height").get<double>();
    c.ground_margin = j.at("ground_margin").get<double>();
    c.unstable_offset_min = j.at("unstable_offset_min").get<double>();
    c.unstable_offset_max = j.at("unstable_offset_max").get<double>();
    c.stable_offset_max = j.at("stable_offset_max").get<double>();
    c.topple_angular_speed = j.at("topple_angular_speed").get<double>();
    c.topple_slide_speed = j.at("topple_slide_speed").get<double>();
    c.frames_per_sequence = j.at("frames_per_sequence").get<int>();
    c.steps_per_frame = j.at("steps_per_frame").get<int>();
    c.num_sequences = j.at("num_sequences").get<int>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

DatasetManifest generate_dataset(const WorldConfig& config, const fs::path& out_dir) {
    validate(config);
    if (config.num_sequences < 1) {
        throw InvalidConfig("world: num_sequences must be >= 1");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    }

    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.config = config;
    const auto counts = split_counts(config.num_sequences, config.train_fraction, config.val_fraction);

    for (int k = 0; k < config.num_sequences; ++k) {
        const std::string name = "seq_" + std::to_string(k);
        const SequenceData seq = simulate_sequence(sequence_seed(config.seed, static_cast<std::size_t>(k)), config, name);
        const fs::path dir = out_dir / name;
        fs::create_directories(dir, ec);
        if (ec) {
            throw IoError("cannot create '" + dir.string() + "': " + ec.message());
        }

        json boxes = json::array();
        json masks = json::array();
        json flow_files = json::array();
        for (std::size_t t = 0; t < seq.frames.size(); ++t) {
            write_png_rgb8(dir / frame_file(static_cast<int>(t)), seq.frames[t]);
            json frame_boxes = json::array();
            json frame_masks = json::array();
            for (std::size_t b = 0; b < seq.boxes[t].size(); ++b) {
                const Box& box = seq.boxes[t][b];
                frame_boxes.push_back({box.x1, box.y1, box.x2, box.y2});
                frame_masks.push_back(rle_to_json(encode_rle(seq.masks[t][b])));
            }
            boxes.push_back(std::move(frame_boxes));
            masks.push_back(std::move(frame_masks));
        }
        for (std::size_t t = 0; t < seq.flows.size(); ++t) {
            const std::string fx = "flow_" + std::to_string(t) + "_dx.png";
            const std::string fy = "flow_" + std::to_string(t) + "_dy.png";
            write_png_gray16(dir / fx, encode_flow_component(seq.flows[t], 0));
            write_png_gray16(dir / fy, encode_flow_component(seq.flows[t], 1));
            flow_files.push_back({fx, fy});
        }
        json colors = json::array();
        for (const Color& c : seq.colors) {
            colors.push_back({c[0], c[1], c[2]});
        }
        write_json(dir / "meta.json", json{{"name", name},
                                           {"num_frames", seq.frames.size()},
                                           {"num_blocks", seq.colors.size()},
                                           {"colors", colors},
                                           {"boxes", boxes},
                                           {"masks_rle", masks},
                                           {"flow_files", flow_files}});

        const Split split = k < counts[0] ? Split::Train : (k < counts[0] + counts[1] ? Split::Val : Split::Test);
        manifest.sequences.push_back({name, split});
    }

    json seqs = json::array();
    for (const auto& e : manifest.sequences) {
        seqs.push_back({{"name", e.name}, {"split", to_string(e.split)}});
    }
    const json j{{"version", 1},
                 {"world_config", world_config_to_json(config)},
                 {"counts", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}},
                 {"sequences", seqs}};
    const fs::path tmp = out_dir / "manifest.json.tmp";
    write_json(tmp, j);
    fs::rename(tmp, out_dir / "manifest.json", ec);
    if (ec) {
        throw IoError("cannot finalize manifest in '" + out_dir.string() + "': " + ec.message());
    }
    return manifest;
}

WorldConfig world_config_from_kv(const KeyValueConfig& kv) {
    json j = world_config_to_json(WorldConfig{});
    for (auto& [key, value] : j.items()) {
        const std::string full = "world." + key;
        if (!kv.contains(full)) {
            continue;
        }
        if (value.is_number_float()) {
            value = kv.get_double(full, 0.0);
        } else {
            const long long v = kv.get_int(full, 0);
            if (value.is_number_unsigned() && v < 0) {
                throw InvalidConfig(full + " must be >= 0");
            }
            value = v;
        }
    }
    WorldConfig c = world_config_from_json(j);
    validate(c);
    return c;
}

KeyValueConfig world_config_to_kv(const WorldConfig& config) {
    KeyValueConfig kv;
    const json j = world_config_to_json(config);
    for (const auto& [key, value] : j.items()) {
        kv.set("world." + key, value.dump());
    }
    return kv;
}

DatasetManifest load_manifest(const fs::path& root) {
    const fs::path path = root / "manifest.json";
    if (!fs::exists(path)) {
        throw MissingData("no dataset manifest at '" + path.string() + "'");
    }
    const json j = read_json(path);
    DatasetManifest m;
    m.root = root;
    m.config = world_config_from_json(j.at("world_config"));
    for (const auto& e : j.at("sequences")) {
        m.sequences.push_back({e.at("name").get<std::string>(), split_from_string(e.at("split").get<std::string>())});
    }
    return m;
}

SequenceData load_sequence(const fs::path& root, const std::string& name) {
    const fs::path dir = root / name;
    const json meta = read_json(dir / "meta.json");
    SequenceData seq;
    seq.name = name;
    const int num_frames = meta.at("num_frames").get<int>();
    for (int t = 0; t < num_frames; ++t) {
        seq.frames.push_back(read_png_rgb8(dir / frame_file(t)));
    }
    for (const auto& frame_boxes : meta.at("boxes")) {
        std::vector<Box> row;
        for (const auto& b : frame_boxes) {
            row.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
        }
        seq.boxes.push_back(std::move(row));
    }
    for (const auto& frame_masks : meta.at("masks_rle")) {
        std::vector<Mask> row;
        for (const auto& m : frame_masks) {
            row.push_back(decode_rle(rle_from_json(m)));
        }
        seq.masks.push_back(std::move(row));
    }
    for (const auto& pair : meta.at("flow_files")) {
        seq.flows.push_back(decode_flow(read_png_gray16(dir / pair.at(0).get<std::string>()),
                                        read_png_gray16(dir / pair.at(1).get<std::string>())));
    }
    for (const auto& c : meta.at("colors")) {
        seq.colors.push_back({c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()});
    }
    return seq;
}

}  // namespace objpred::world
