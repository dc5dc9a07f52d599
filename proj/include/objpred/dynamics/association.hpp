#pragma once

#include <vector>

namespace objpred::dyn {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Association {
    std::vector<int> match;  // per entity: detection index, or -1 when unmatched
    int matched = 0;
    double total_cost = 0.0;  // sum of centroid distances over matched pairs
};

/// Optimal one-to-one assignment of entities to detections by box-centroid
/// distance. Pairs farther apart than `max_distance` are never matched. The
/// number of matched pairs is maximised first, then the total distance is
/// minimised; unmatched detections are dropped.
Association associate(const std::vector<Point2>& entity_centroids, const std::vector<Point2>& detection_centroids,
                      double max_distance = 20.0);

}  // namespace objpred::dyn
