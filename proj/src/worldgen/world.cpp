#include "objpred/worldgen/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace objpred::world {

namespace {

constexpr double kContactTolerance = 1e-6;
constexpr double kLandingDamping = 0.5;
constexpr std::uint64_t kBackgroundSeed = 0x5eedba5eULL;

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool colors_distinct(const Color& a, const Color& b, float min_diff) {
    for (int c = 0; c < 3; ++c) {
        if (std::fabs(a[c] - b[c]) >= min_diff) {
            return true;
        }
    }
    return false;
}

Color sample_color(std::mt19937_64& rng, const std::vector<Block>& existing) {
    // Saturated colours so blocks stand apart from the grey background, and a
    // margin above the 0.2 per-channel separation the scene guarantees.
    for (;;) {
        Color c{static_cast<float>(uniform(rng, 0.05, 0.95)), static_cast<float>(uniform(rng, 0.05, 0.95)),
                static_cast<float>(uniform(rng, 0.05, 0.95))};
        const float spread = std::max({c[0], c[1], c[2]}) - std::min({c[0], c[1], c[2]});
        if (spread < 0.35f) {
            continue;
        }
        const bool ok = std::all_of(existing.begin(), existing.end(),
                                    [&](const Block& b) { return colors_distinct(c, b.color, 0.25f); });
        if (ok) {
            return c;
        }
    }
}

double top_edge(const Block& b) { return b.center.y - aabb_half_extents(b).y; }
double bottom_edge(const Block& b) { return b.center.y + aabb_half_extents(b).y; }

bool overlaps_horizontally(const Block& a, const Block& b) {
    return std::fabs(a.center.x - b.center.x) < aabb_half_extents(a).x + aabb_half_extents(b).x - kContactTolerance;
}

// Block directly under `index` whose top edge touches its bottom edge, or -1
// when it rests on the ground or nothing.
int support_of(const SceneSpec& scene, std::size_t index) {
    const Block& b = scene.blocks[index];
    const double bottom = bottom_edge(b);
    int best = -1;
    double best_overlap = 0.0;
    for (std::size_t j = 0; j < scene.blocks.size(); ++j) {
        if (j == index) {
            continue;
        }
        const Block& o = scene.blocks[j];
        if (std::fabs(top_edge(o) - bottom) > kContactTolerance || !overlaps_horizontally(b, o)) {
            continue;
        }
        const double overlap = aabb_half_extents(b).x + aabb_half_extents(o).x - std::fabs(b.center.x - o.center.x);
        if (best < 0 || overlap > best_overlap) {
            best = static_cast<int>(j);
            best_overlap = overlap;
        }
    }
    return best;
}

}  // namespace

void validate(const WorldConfig& config) {
    if (config.num_blocks < 2 || config.num_blocks > 5) {
        throw InvalidConfig("world: num_blocks must be in [2,5], got " + std::to_string(config.num_blocks));
    }
    if (config.image_size < 32) {
        throw InvalidConfig("world: image_size must be >= 32, got " + std::to_string(config.image_size));
    }
    if (!(config.min_half_width > 0 && config.min_half_height > 0 && config.min_half_width <= config.max_half_width &&
          config.min_half_height <= config.max_half_height)) {
        throw InvalidConfig("world: block half extents must be positive with min <= max");
    }
    const double ground_y = config.image_size - config.ground_margin;
    if (config.ground_margin < 0 || config.num_blocks * 2.0 * config.max_half_height > ground_y) {
        throw InvalidConfig("world: a stack of " + std::to_string(config.num_blocks) +
                            " blocks does not fit between the ground and the top edge");
    }
    if (4.0 * config.max_half_width > config.image_size) {
        throw InvalidConfig("world: blocks wider than half the image do not fit");
    }
    if (config.frames_per_sequence < 2 || config.steps_per_frame < 1) {
        throw InvalidConfig("world: need >= 2 frames per sequence and >= 1 step per frame");
    }
    if (config.train_fraction < 0 || config.val_fraction < 0 || config.train_fraction + config.val_fraction > 1.0) {
        throw InvalidConfig("world: split fractions must be non-negative and sum to <= 1");
    }
}

Vec2 aabb_half_extents(const Block& block) {
    const double c = std::fabs(std::cos(block.angle));
    const double s = std::fabs(std::sin(block.angle));
    return {c * block.half_extents.x + s * block.half_extents.y, s * block.half_extents.x + c * block.half_extents.y};
}

SceneSpec generate_scene(std::uint64_t seed, const WorldConfig& config) {
    validate(config);
    std::mt19937_64 rng(seed);

    SceneSpec scene;
    scene.gravity = config.gravity;
    scene.rng_seed = seed;
    scene.image_size = config.image_size;
    scene.ground_y = config.image_size - config.ground_margin;
    scene.topple_angular_speed = config.topple_angular_speed;
    scene.topple_slide_speed = config.topple_slide_speed;

    const int n = config.num_blocks;
    const int unstable_level = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const double size = config.image_size;
    const double base_x = size / 2.0 + uniform(rng, -size / 8.0, size / 8.0);

    for (int i = 0; i < n; ++i) {
        Block b;
        b.half_extents = {uniform(rng, config.min_half_width, config.max_half_width),
                          uniform(rng, config.min_half_height, config.max_half_height)};
        if (i == 0) {
            b.center = {base_x, scene.ground_y - b.half_extents.y};
        } else {
            const Block& below = scene.blocks.back();
            const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
            const double frac = i == unstable_level ? uniform(rng, config.unstable_offset_min, config.unstable_offset_max)
                                                    : uniform(rng, 0.0, config.stable_offset_max);
            double cx = below.center.x + sign * frac * below.half_extents.x;
            if (cx - b.half_extents.x < 0 || cx + b.half_extents.x > size) {
                cx = below.center.x - sign * frac * below.half_extents.x;
            }
            b.center = {std::clamp(cx, b.half_extents.x, size - b.half_extents.x),
                        (below.center.y - below.half_extents.y) - b.half_extents.y};
        }
        b.color = sample_color(rng, scene.blocks);
        scene.blocks.push_back(b);
    }
    return scene;
}

bool topples(const SceneSpec& scene, std::size_t index) {
    const Block& b = scene.blocks.at(index);
    if (b.tumbling) {
        return false;
    }
    const int s = support_of(scene, index);
    if (s < 0) {
        return false;
    }
    const Block& support = scene.blocks[static_cast<std::size_t>(s)];
    return std::fabs(b.center.x - support.center.x) > aabb_half_extents(support).x;
}

SceneSpec simulate_step(const SceneSpec& scene) {
    SceneSpec next = scene;
    next.step_index = scene.step_index + 1;
    const double width = next.image_size;

    for (std::size_t i = 0; i < next.blocks.size(); ++i) {
        if (!next.blocks[i].tumbling) {
            const int s = support_of(next, i);
            if (s >= 0) {
                const Block& support = next.blocks[static_cast<std::size_t>(s)];
                Block& b = next.blocks[i];
                double dir = 0.0;
                if (support.tumbling) {
                    dir = support.angular_velocity >= 0 ? 1.0 : -1.0;
                } else if (std::fabs(b.center.x - support.center.x) > aabb_half_extents(support).x) {
                    dir = b.center.x >= support.center.x ? 1.0 : -1.0;
                }
                if (dir != 0.0) {
                    b.tumbling = true;
                    b.angular_velocity = dir * next.topple_angular_speed;
                    b.velocity.x = dir * next.topple_slide_speed;
                }
            }
        }

        Block& b = next.blocks[i];
        b.velocity.y += next.gravity;
        b.center.x += b.velocity.x;
        b.center.y += b.velocity.y;
        b.angle += b.angular_velocity;

        const Vec2 half = aabb_half_extents(b);
        double floor_y = next.ground_y;
        bool on_ground = true;
        for (std::size_t j = 0; j < next.blocks.size(); ++j) {
            const Block& o = next.blocks[j];
            if (j == i || o.center.y <= b.center.y || !overlaps_horizontally(b, o)) {
                continue;
            }
            const double top = top_edge(o);
            if (top < floor_y) {
                floor_y = top;
                on_ground = false;
            }
        }
        if (b.center.y + half.y > floor_y) {
            b.center.y = floor_y - half.y;
            b.velocity.y = 0.0;
            if (b.tumbling && on_ground) {
                b.velocity.x *= kLandingDamping;
                b.angular_velocity *= kLandingDamping;
            }
        }
        if (b.center.x - half.x < 0.0) {
            b.center.x = half.x;
            b.velocity.x = 0.0;
        } else if (b.center.x + half.x > width) {
            b.center.x = width - half.x;
            b.velocity.x = 0.0;
        }
    }
    return next;
}

bool point_in_block(const Block& block, double px, double py) {
    const double dx = px - block.center.x;
    const double dy = py - block.center.y;
    const double c = std::cos(block.angle);
    const double s = std::sin(block.angle);
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    return std::fabs(lx) < block.half_extents.x && std::fabs(ly) < block.half_extents.y;
}

Frame background(int image_size, double ground_y) {
    std::mt19937_64 rng(kBackgroundSeed);
    std::uniform_real_distribution<float> noise(-0.04f, 0.04f);
    Frame frame(image_size, image_size);
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            float base = ((x / 8 + y / 8) % 2 == 0) ? 0.55f : 0.40f;
            if (y + 0.5 >= ground_y) {
                base = 0.25f;
            }
            const float v = base + noise(rng);
            for (int c = 0; c < 3; ++c) {
                frame.at(y, x, c) = v;
            }
        }
    }
    return frame;
}

namespace {

// Per-pixel index of the front-most block covering the pixel centre, or -1.
std::vector<int> ownership(const SceneSpec& scene) {
    const int n = scene.image_size;
    std::vector<int> owner(static_cast<std::size_t>(n) * n, -1);
    for (std::size_t i = 0; i < scene.blocks.size(); ++i) {
        const Block& b = scene.blocks[i];
        const Vec2 half = aabb_half_extents(b);
        const int x0 = std::max(0, static_cast<int>(std::floor(b.center.x - half.x)));
        const int x1 = std::min(n - 1, static_cast<int>(std::ceil(b.center.x + half.x)));
        const int y0 = std::max(0, static_cast<int>(std::floor(b.center.y - half.y)));
        const int y1 = std::min(n - 1, static_cast<int>(std::ceil(b.center.y + half.y)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (point_in_block(b, x + 0.5, y + 0.5)) {
                    owner[static_cast<std::size_t>(y) * n + x] = static_cast<int>(i);
                }
            }
        }
    }
    return owner;
}

}  // namespace

std::pair<Frame, GroundTruth> render(const SceneSpec& scene) {
    const int n = scene.image_size;
    Frame frame = background(n, scene.ground_y);
    const std::vector<int> owner = ownership(scene);

    GroundTruth gt;
    gt.masks.assign(scene.blocks.size(), Mask(n, n));
    gt.flow = FlowField(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const int o = owner[static_cast<std::size_t>(y) * n + x];
            if (o < 0) {
                continue;
            }
            const Color& color = scene.blocks[static_cast<std::size_t>(o)].color;
            for (int c = 0; c < 3; ++c) {
                frame.at(y, x, c) = color[c];
            }
            gt.masks[static_cast<std::size_t>(o)].at(y, x) = 1;
        }
    }
    gt.boxes.reserve(gt.masks.size());
    for (const Mask& m : gt.masks) {
        gt.boxes.push_back(mask_bounding_box(m));
    }
    return {std::move(frame), std::move(gt)};
}

std::pair<Frame, GroundTruth> render_pair(const SceneSpec& current, const SceneSpec& next) {
    auto result = render(current);
    GroundTruth& gt = result.second;
    const int n = current.image_size;
    for (std::size_t i = 0; i < current.blocks.size(); ++i) {
        const Block& a = current.blocks[i];
        const Block& b = next.blocks.at(i);
        const double ca = std::cos(a.angle), sa = std::sin(a.angle);
        const double cb = std::cos(b.angle), sb = std::sin(b.angle);
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                if (!gt.masks[i].at(y, x)) {
                    continue;
                }
                const double px = x + 0.5, py = y + 0.5;
                const double dx = px - a.center.x, dy = py - a.center.y;
                const double lx = ca * dx + sa * dy;
                const double ly = -sa * dx + ca * dy;
                const double qx = b.center.x + cb * lx - sb * ly;
                const double qy = b.center.y + sb * lx + cb * ly;
                gt.flow.dx(y, x) = static_cast<float>(qx - px);
                gt.flow.dy(y, x) = static_cast<float>(qy - py);
            }
        }
    }
    return result;
}

}  // namespace objpred::world
