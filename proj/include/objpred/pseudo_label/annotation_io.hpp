#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "objpred/pseudo_label/labeling.hpp"

namespace objpred::label {

/// Pseudo annotations keyed by frame id (`seq_<k>/frame_<t>`).
using AnnotationSet = std::map<std::string, AnnotationRecord>;

std::string frame_id(const std::string& sequence, int t);

/// COCO-style document: `images`, `annotations` (uncompressed RLE
/// `segmentation`, `bbox` as [x, y, w, h], `category_id` 1) and `categories`.
nlohmann::json to_coco(const AnnotationSet& set);
AnnotationSet from_coco(const nlohmann::json& coco);

/// Native mirror of AnnotationRecord.
nlohmann::json to_native(const AnnotationSet& set);
AnnotationSet from_native(const nlohmann::json& native);

void save_annotations(const std::filesystem::path& native_path, const std::filesystem::path& coco_path,
                      const AnnotationSet& set);
AnnotationSet load_annotations(const std::filesystem::path& native_path);

}  // namespace objpred::label
