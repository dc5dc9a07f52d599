#pragma once

#include <memory>

#include "objpred/core/flow_field.hpp"
#include "objpred/core/types.hpp"

namespace objpred::label {

/// Pluggable optical-flow provider for a consecutive frame pair.
class FlowSource {
public:
    virtual ~FlowSource() = default;
    virtual FlowField estimate(const Frame& frame_t, const Frame& frame_t1) const = 0;
};

/// Returns a stored ground-truth flow field unchanged.
class OracleFlow final : public FlowSource {
public:
    explicit OracleFlow(FlowField flow) : flow_(std::move(flow)) {}
    FlowField estimate(const Frame& frame_t, const Frame& frame_t1) const override;

private:
    FlowField flow_;
};

/// Exhaustive block matching: for each pixel, the integer displacement within
/// `search_radius` minimising the sum of absolute RGB differences over a
/// (2*half_window+1)^2 window. Ties prefer the smallest displacement.
class BlockMatchingFlow final : public FlowSource {
public:
    BlockMatchingFlow(int search_radius = 4, int half_window = 2) : radius_(search_radius), half_window_(half_window) {}
    FlowField estimate(const Frame& frame_t, const Frame& frame_t1) const override;

private:
    int radius_;
    int half_window_;
};

/// Shape-checks the pair and asks `source` for the flow from `frame_t` to `frame_t1`.
FlowField provide_flow(const Frame& frame_t, const Frame& frame_t1, const FlowSource& source);

}  // namespace objpred::label
