#include "objpred/dynamics/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace objpred::dyn {

namespace {

constexpr std::size_t kMaxCandidates = 16;

struct Score {
    int matched = 0;
    double cost = 0.0;

    [[nodiscard]] bool better_than(const Score& o) const {
        if (matched != o.matched) {
            return matched > o.matched;
        }
        return cost < o.cost - 1e-12;
    }
};

}  // namespace

Association associate(const std::vector<Point2>& entities, const std::vector<Point2>& detections, double max_distance) {
    const std::size_t n = entities.size();
    Association result;
    result.match.assign(n, -1);
    if (n == 0 || detections.empty()) {
        return result;
    }

    auto dist = [&](std::size_t e, std::size_t d) {
        return std::hypot(entities[e].x - detections[d].x, entities[e].y - detections[d].y);
    };

    // Only detections within reach of some entity can take part in a match.
    std::vector<std::size_t> candidates;
    std::vector<double> nearest;
    for (std::size_t d = 0; d < detections.size(); ++d) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < n; ++e) {
            best = std::min(best, dist(e, d));
        }
        if (best <= max_distance) {
            candidates.push_back(d);
            nearest.push_back(best);
        }
    }
    if (candidates.size() > kMaxCandidates) {
        std::vector<std::size_t> order(candidates.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nearest[a] < nearest[b]; });
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < kMaxCandidates; ++i) {
            kept.push_back(candidates[order[i]]);
        }
        std::sort(kept.begin(), kept.end());
        candidates = std::move(kept);
    }
    const std::size_t m = candidates.size();
    const std::size_t states = std::size_t{1} << m;

    // best[i][used]: optimum for entities i..n-1 given the set of used candidates.
    std::vector<Score> best((n + 1) * states);
    std::vector<int> choice(n * states, -1);
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t used = 0; used < states; ++used) {
            Score s = best[(i + 1) * states + used];
            int pick = -1;
            for (std::size_t c = 0; c < m; ++c) {
                if (used & (std::size_t{1} << c)) {
                    continue;
                }
                const double d = dist(i, candidates[c]);
                if (d > max_distance) {
                    continue;
                }
                const Score& rest = best[(i + 1) * states + (used | (std::size_t{1} << c))];
                const Score cand{rest.matched + 1, rest.cost + d};
                if (cand.better_than(s)) {
                    s = cand;
                    pick = static_cast<int>(c);
                }
            }
            best[i * states + used] = s;
            choice[i * states + used] = pick;
        }
    }

    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = choice[i * states + used];
        if (c >= 0) {
            result.match[i] = static_cast<int>(candidates[static_cast<std::size_t>(c)]);
            used |= std::size_t{1} << c;
            ++result.matched;
            result.total_cost += dist(i, candidates[static_cast<std::size_t>(c)]);
        }
    }
    return result;
}

}  // namespace objpred::dyn
