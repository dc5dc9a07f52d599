#include "objpred/core/rle.hpp"

namespace objpred {

Rle encode_rle(const Mask& mask) {
    Rle rle{mask.height, mask.width, {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (int x = 0; x < mask.width; ++x) {
        for (int y = 0; y < mask.height; ++y) {
            const std::uint8_t v = mask.at(y, x) ? 1 : 0;
            if (v != current) {
                rle.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    rle.counts.push_back(run);
    return rle;
}

Mask decode_rle(const Rle& rle) {
    Mask mask(rle.height, rle.width);
    const std::size_t total = static_cast<std::size_t>(rle.height) * rle.width;
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (const std::uint32_t run : rle.counts) {
        if (pos + run > total) {
            throw ShapeError("decode_rle: run lengths exceed mask size");
        }
        for (std::uint32_t k = 0; k < run; ++k, ++pos) {
            const int x = static_cast<int>(pos / rle.height);
            const int y = static_cast<int>(pos % rle.height);
            mask.at(y, x) = value;
        }
        value ^= 1;
    }
    if (pos != total) {
        throw ShapeError("decode_rle: run lengths do not cover the mask");
    }
    return mask;
}

nlohmann::json rle_to_json(const Rle& rle) {
    return nlohmann::json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

Rle rle_from_json(const nlohmann::json& j) {
    Rle rle;
    rle.height = j.at("size").at(0).get<int>();
    rle.width = j.at("size").at(1).get<int>();
    rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    return rle;
}

}  // namespace objpred
