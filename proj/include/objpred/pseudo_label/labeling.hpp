#pragma once

#include <string>
#include <vector>

#include "objpred/core/flow_field.hpp"
#include "objpred/core/types.hpp"
#include "objpred/pseudo_label/flow.hpp"

namespace objpred::label {

struct Instance {
    Mask mask;
    Box box;
    int class_id = 0;  // single object class
};

/// Pseudo ground truth for one frame, derived from its flow to the next frame.
struct AnnotationRecord {
    std::string frame_id;
    int height = 0;
    int width = 0;
    std::vector<Instance> instances;
};

struct LabelConfig {
    double fraction = 0.01;  // moving threshold as a fraction of max(H, W)
    int min_area = 8;        // smaller components are treated as flow noise
};

using Component = std::vector<Pixel>;

/// On iff the flow magnitude exceeds fraction * max(H, W).
Mask threshold_flow(const FlowField& flow, double fraction = 0.01);

/// 8-connected components of the on-pixels, in raster order of their first
/// pixel; pixels inside a component are sorted by (x, y). Components smaller
/// than `min_area` are dropped.
std::vector<Component> connected_components(const Mask& mask, int min_area = 8);

/// Vertices of the convex hull of the pixel centres, counter-clockwise in
/// (x right, y down) image coordinates, collinear points removed.
std::vector<Pixel> convex_hull(const Component& component);

/// Filled hull rasterised on pixel centres with exact integer arithmetic, so the
/// result always contains the component.
Mask convex_hull_mask(const Component& component, int height, int width);

/// flow -> threshold -> components -> hull masks; one instance per component.
AnnotationRecord annotate_pair(const Frame& frame_t, const Frame& frame_t1, const FlowSource& source,
                               const LabelConfig& config = {}, const std::string& frame_id = {});

/// On-pixels of a mask as a component.
Component mask_pixels(const Mask& mask);

}  // namespace objpred::label
