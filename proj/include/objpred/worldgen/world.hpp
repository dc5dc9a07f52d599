#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "objpred/core/flow_field.hpp"
#include "objpred/core/types.hpp"

namespace objpred::world {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Vec2&) const = default;
};

using Color = std::array<float, 3>;

/// Parameters of the falling-stack world. Units are pixels and physics steps.
struct WorldConfig {
    int image_size = 64;
    int num_blocks = 3;
    double gravity = 0.5;  // px / step^2
    double min_half_width = 5.0;
    double max_half_width = 9.0;
    double min_half_height = 4.0;
    double max_half_height = 6.0;
    double ground_margin = 4.0;  // ground line sits this far above the bottom edge
    // Horizontal offset of the unstable block, as a multiple of its support's half width.
    double unstable_offset_min = 1.1;
    double unstable_offset_max = 1.4;
    // Offset of stable blocks, same units.
    double stable_offset_max = 0.6;
    double topple_angular_speed = 0.08;  // rad / step
    double topple_slide_speed = 0.6;     // px / step
    int frames_per_sequence = 6;         // stored frames (1 context + 5 targets)
    int steps_per_frame = 2;             // physics steps between stored frames
    int num_sequences = 10;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
};

/// Throws InvalidConfig when the block count or image size is out of range,
/// or when a worst-case stack cannot fit between the ground and the top edge.
void validate(const WorldConfig& config);

struct Block {
    Vec2 center;
    Vec2 half_extents;
    Color color{};
    Vec2 velocity;
    double angle = 0.0;
    double angular_velocity = 0.0;
    bool tumbling = false;  // set once the toppling rule fires; never cleared

    bool operator==(const Block&) const = default;
};

struct SceneSpec {
    std::vector<Block> blocks;  // listing order is depth order: later blocks render in front
    double gravity = 0.5;
    int step_index = 0;
    std::uint64_t rng_seed = 0;
    int image_size = 64;
    double ground_y = 60.0;
    double topple_angular_speed = 0.08;
    double topple_slide_speed = 0.6;

    bool operator==(const SceneSpec&) const = default;
};

struct GroundTruth {
    std::vector<Mask> masks;  // one per block, disjoint (front block wins)
    std::vector<Box> boxes;   // tight bounds of `masks`; all-zero for a hidden block
    FlowField flow;           // displacement to the next rendered scene
};

SceneSpec generate_scene(std::uint64_t seed, const WorldConfig& config);

/// Explicit Euler step with ground/block contact projection and a geometric
/// toppling rule.
SceneSpec simulate_step(const SceneSpec& scene);

/// True when block `index` rests on a block whose horizontal extent does not
/// contain its centre of mass.
bool topples(const SceneSpec& scene, std::size_t index);

/// Half extents of the rotated block's axis-aligned bound.
Vec2 aabb_half_extents(const Block& block);

/// Fixed checkerboard-with-noise background shared by every scene.
Frame background(int image_size, double ground_y);

/// Renders the scene. GroundTruth.flow is zero; use `render_pair` to get the
/// displacement field towards a later scene.
std::pair<Frame, GroundTruth> render(const SceneSpec& scene);

/// Renders `current` and fills GroundTruth.flow with the rigid-motion
/// displacement of every visible block pixel from `current` to `next`.
std::pair<Frame, GroundTruth> render_pair(const SceneSpec& current, const SceneSpec& next);

bool point_in_block(const Block& block, double px, double py);

}  // namespace objpred::world
