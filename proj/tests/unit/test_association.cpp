#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "objpred/dynamics/association.hpp"

using namespace objpred::dyn;

namespace {

// Enumerates every partial injective assignment.
std::pair<int, double> brute_force(const std::vector<Point2>& ents, const std::vector<Point2>& dets, double cap) {
    int best_n = 0;
    double best_cost = 0.0;
    std::vector<int> assign(ents.size(), -1);
    std::vector<bool> used(dets.size(), false);
    auto rec = [&](auto&& self, std::size_t i, int n, double cost) -> void {
        if (i == ents.size()) {
            if (n > best_n || (n == best_n && cost < best_cost)) {
                best_n = n;
                best_cost = cost;
            }
            return;
        }
        self(self, i + 1, n, cost);
        for (std::size_t d = 0; d < dets.size(); ++d) {
            const double dist = std::hypot(ents[i].x - dets[d].x, ents[i].y - dets[d].y);
            if (!used[d] && dist <= cap) {
                used[d] = true;
                self(self, i + 1, n + 1, cost + dist);
                used[d] = false;
            }
        }
    };
    rec(rec, 0, 0, 0.0);
    return {best_n, best_cost};
}

}  // namespace

TEST(Associate, IdenticalCentroidsMatchInOrder) {
    const std::vector<Point2> pts{{5, 5}, {30, 30}, {50, 10}};
    const Association a = associate(pts, pts);
    EXPECT_EQ(a.match, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(a.matched, 3);
    EXPECT_DOUBLE_EQ(a.total_cost, 0.0);
}

TEST(Associate, SwappedDetectionsAreUntangled) {
    const Association a = associate({{10, 10}, {30, 10}}, {{29, 10}, {11, 10}});
    EXPECT_EQ(a.match, (std::vector<int>{1, 0}));
    EXPECT_NEAR(a.total_cost, 2.0, 1e-12);
}

TEST(Associate, FarDetectionsStayUnmatched) {
    const Association a = associate({{10, 10}}, {{60, 10}});
    EXPECT_EQ(a.match, (std::vector<int>{-1}));
    EXPECT_EQ(a.matched, 0);
    EXPECT_EQ(associate({}, {{1, 1}}).match.size(), 0u);
    EXPECT_EQ(associate({{1, 1}}, {}).match, (std::vector<int>{-1}));
}

TEST(Associate, MatchesBruteForceOptimum) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, 64.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Point2> ents(1 + rng() % 5), dets(rng() % 7);
        for (auto& p : ents) {
            p = {u(rng), u(rng)};
        }
        for (auto& p : dets) {
            p = {u(rng), u(rng)};
        }
        const Association a = associate(ents, dets);
        const auto [n, cost] = brute_force(ents, dets, 20.0);
        EXPECT_EQ(a.matched, n);
        EXPECT_NEAR(a.total_cost, cost, 1e-9);
        std::vector<int> seen;
        for (int m : a.match) {
            if (m >= 0) {
                seen.push_back(m);
            }
        }
        std::sort(seen.begin(), seen.end());
        EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
    }
}

TEST(Associate, InvariantToDetectionOrder) {
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> u(0.0, 64.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point2> ents(3), dets(4);
        for (auto& p : ents) {
            p = {u(rng), u(rng)};
        }
        for (auto& p : dets) {
            p = {u(rng), u(rng)};
        }
        std::vector<int> perm(dets.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Point2> shuffled(dets.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled[i] = dets[static_cast<std::size_t>(perm[i])];
        }
        const Association a = associate(ents, dets), b = associate(ents, shuffled);
        EXPECT_EQ(a.matched, b.matched);
        EXPECT_NEAR(a.total_cost, b.total_cost, 1e-9);
    }
}
