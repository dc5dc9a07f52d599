#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "objpred/core/types.hpp"

namespace objpred {

/// COCO-style uncompressed run-length encoding: column-major order, runs
/// alternate starting with a (possibly empty) run of zeros.
struct Rle {
    int height = 0;
    int width = 0;
    std::vector<std::uint32_t> counts;

    bool operator==(const Rle&) const = default;
};

Rle encode_rle(const Mask& mask);
Mask decode_rle(const Rle& rle);

nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& j);

}  // namespace objpred
