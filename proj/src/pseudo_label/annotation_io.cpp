#include "objpred/pseudo_label/annotation_io.hpp"

#include <fstream>

#include "objpred/core/rle.hpp"

namespace objpred::label {

using nlohmann::json;
namespace fs = std::filesystem;

std::string frame_id(const std::string& sequence, int t) { return sequence + "/frame_" + std::to_string(t); }

json to_coco(const AnnotationSet& set) {
    json images = json::array();
    json annotations = json::array();
    int image_id = 1;
    int ann_id = 1;
    for (const auto& [id, record] : set) {
        images.push_back({{"id", image_id}, {"file_name", id + ".png"}, {"height", record.height}, {"width", record.width}});
        for (const Instance& inst : record.instances) {
            annotations.push_back({{"id", ann_id++},
                                   {"image_id", image_id},
                                   {"category_id", inst.class_id + 1},
                                   {"segmentation", rle_to_json(encode_rle(inst.mask))},
                                   {"area", inst.mask.count()},
                                   {"bbox", {inst.box.x1, inst.box.y1, inst.box.width(), inst.box.height()}},
                                   {"iscrowd", 0}});
        }
        ++image_id;
    }
    return json{{"images", images},
                {"annotations", annotations},
                {"categories", json::array({{{"id", 1}, {"name", "object"}}})}};
}

AnnotationSet from_coco(const json& coco) {
    AnnotationSet set;
    std::map<int, std::string> names;
    for (const auto& img : coco.at("images")) {
        std::string name = img.at("file_name").get<std::string>();
        if (name.size() > 4 && name.substr(name.size() - 4) == ".png") {
            name.resize(name.size() - 4);
        }
        names[img.at("id").get<int>()] = name;
        AnnotationRecord& r = set[name];
        r.frame_id = name;
        r.height = img.at("height").get<int>();
        r.width = img.at("width").get<int>();
    }
    for (const auto& ann : coco.at("annotations")) {
        Instance inst;
        inst.mask = decode_rle(rle_from_json(ann.at("segmentation")));
        const auto& b = ann.at("bbox");
        inst.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(0).get<double>() + b.at(2).get<double>(),
                    b.at(1).get<double>() + b.at(3).get<double>()};
        inst.class_id = ann.at("category_id").get<int>() - 1;
        set.at(names.at(ann.at("image_id").get<int>())).instances.push_back(std::move(inst));
    }
    return set;
}

json to_native(const AnnotationSet& set) {
    json records = json::array();
    for (const auto& [id, record] : set) {
        json instances = json::array();
        for (const Instance& inst : record.instances) {
            instances.push_back({{"box", {inst.box.x1, inst.box.y1, inst.box.x2, inst.box.y2}},
                                 {"class_id", inst.class_id},
                                 {"mask_rle", rle_to_json(encode_rle(inst.mask))}});
        }
        records.push_back(
            {{"frame_id", id}, {"height", record.height}, {"width", record.width}, {"instances", instances}});
    }
    return json{{"version", 1}, {"records", records}};
}

AnnotationSet from_native(const json& native) {
    AnnotationSet set;
    for (const auto& r : native.at("records")) {
        AnnotationRecord record;
        record.frame_id = r.at("frame_id").get<std::string>();
        record.height = r.at("height").get<int>();
        record.width = r.at("width").get<int>();
        for (const auto& i : r.at("instances")) {
            Instance inst;
            const auto& b = i.at("box");
            inst.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
            inst.class_id = i.at("class_id").get<int>();
            inst.mask = decode_rle(rle_from_json(i.at("mask_rle")));
            record.instances.push_back(std::move(inst));
        }
        set[record.frame_id] = std::move(record);
    }
    return set;
}

void save_annotations(const fs::path& native_path, const fs::path& coco_path, const AnnotationSet& set) {
    for (const auto& [path, doc] : {std::pair{native_path, to_native(set)}, std::pair{coco_path, to_coco(set)}}) {
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot write annotations to '" + path.string() + "'");
        }
        out << doc.dump() << '\n';
    }
}

AnnotationSet load_annotations(const fs::path& native_path) {
    std::ifstream in(native_path);
    if (!in) {
        throw MissingData("no annotations at '" + native_path.string() + "' (run `annotate` first)");
    }
    try {
        return from_native(json::parse(in));
    } catch (const json::exception& e) {
        throw IoError("malformed annotations '" + native_path.string() + "': " + e.what());
    }
}

}  // namespace objpred::label
