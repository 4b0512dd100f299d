#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "gridline/anchors.hpp"
#include "gridline/rng.hpp"
#include "support/oracles.hpp"

using namespace gridline;

namespace {

CellSegment mr_segment(double mu, double mv, double du, double dv, int row = 0, int col = 0) {
    CellSegment seg;
    seg.geometry = SegmentMR{{mu, mv}, {du, dv}};
    seg.row = row;
    seg.col = col;
    return seg;
}

}  // namespace

TEST_CASE("uniform direction anchors hit the four cardinal directions") {
    const auto set = uniform_anchors(FeatureSpace::Dir, 4);
    REQUIRE(set.count() == 4);
    const double expected[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int i = 0; i < 4; ++i) {
        CHECK(set.anchors[static_cast<size_t>(i)][0] == doctest::Approx(expected[i][0]).epsilon(1e-12));
        CHECK(set.anchors[static_cast<size_t>(i)][1] == doctest::Approx(expected[i][1]).epsilon(1e-12));
    }
}

TEST_CASE("a single uniform midpoint anchor is the cell center") {
    const auto set = uniform_anchors(FeatureSpace::MP, 1);
    REQUIRE(set.count() == 1);
    CHECK(set.anchors[0][0] == 0.5);
    CHECK(set.anchors[0][1] == 0.5);
}

TEST_CASE("24 uniform MR anchors are pairwise distinct") {
    const auto set = uniform_anchors(FeatureSpace::MR, 24);
    REQUIRE(set.count() == 24);
    for (int i = 0; i < 24; ++i) {
        for (int j = i + 1; j < 24; ++j) {
            double d2 = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double d = set.anchors[static_cast<size_t>(i)][static_cast<size_t>(k)] -
                                 set.anchors[static_cast<size_t>(j)][static_cast<size_t>(k)];
                d2 += d * d;
            }
            CHECK(d2 > 0.0);
        }
    }
}

TEST_CASE("uniform anchors reject P=0 and the Cart space") {
    CHECK_THROWS_AS(uniform_anchors(FeatureSpace::MP, 0), std::invalid_argument);
    CHECK_THROWS_AS(uniform_anchors(FeatureSpace::Cart, 4), std::invalid_argument);
}

TEST_CASE("uniform anchors are deterministic and inside their boxes") {
    for (FeatureSpace space : {FeatureSpace::MP, FeatureSpace::Dir, FeatureSpace::MR}) {
        for (int p : {1, 3, 8, 24}) {
            const auto a = uniform_anchors(space, p);
            const auto b = uniform_anchors(space, p);
            CHECK(a.anchors == b.anchors);
            CHECK(a.count() == p);
            for (const auto& coords : a.anchors) {
                if (space == FeatureSpace::MP || space == FeatureSpace::MR) {
                    CHECK(coords[0] >= 0.0);
                    CHECK(coords[0] <= 1.0);
                    CHECK(coords[1] >= 0.0);
                    CHECK(coords[1] <= 1.0);
                }
                const size_t d0 = space == FeatureSpace::MR ? 2 : (space == FeatureSpace::Dir ? 0 : coords.size());
                for (size_t k = d0; k < coords.size(); ++k) {
                    CHECK(coords[k] >= -1.0);
                    CHECK(coords[k] <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("k-means with one cluster returns the coordinate-wise mean") {
    Rng rng(5);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({rng.next_double(), rng.next_double()});
    const auto res = kmeans(pts, 1, 123);
    double mu = 0, mv = 0;
    for (const auto& p : pts) { mu += p[0]; mv += p[1]; }
    mu /= static_cast<double>(pts.size());
    mv /= static_cast<double>(pts.size());
    CHECK(std::abs(res.centroids[0][0] - mu) < 1e-12);
    CHECK(std::abs(res.centroids[0][1] - mv) < 1e-12);
}

TEST_CASE("k-means separates two blobs like the exhaustive optimum") {
    Rng rng(77);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({0.1 + 0.02 * rng.next_double(), 0.1 + 0.02 * rng.next_double()});
    for (int i = 0; i < 6; ++i) pts.push_back({0.9 + 0.02 * rng.next_double(), 0.9 + 0.02 * rng.next_double()});

    // oracle: exhaustive 2-partition minimum inertia
    double best_inertia = 1e18;
    std::vector<std::vector<double>> best_means;
    const int n = static_cast<int>(pts.size());
    for (int mask = 1; mask < (1 << n) - 1; ++mask) {
        std::vector<double> m0{0, 0}, m1{0, 0};
        int c0 = 0, c1 = 0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1 << i)) { m0[0] += pts[static_cast<size_t>(i)][0]; m0[1] += pts[static_cast<size_t>(i)][1]; ++c0; }
            else { m1[0] += pts[static_cast<size_t>(i)][0]; m1[1] += pts[static_cast<size_t>(i)][1]; ++c1; }
        }
        m0[0] /= c0; m0[1] /= c0; m1[0] /= c1; m1[1] /= c1;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& m = (mask & (1 << i)) ? m0 : m1;
            inertia += (pts[static_cast<size_t>(i)][0] - m[0]) * (pts[static_cast<size_t>(i)][0] - m[0]) +
                       (pts[static_cast<size_t>(i)][1] - m[1]) * (pts[static_cast<size_t>(i)][1] - m[1]);
        }
        if (inertia < best_inertia) { best_inertia = inertia; best_means = {m0, m1}; }
    }

    const auto res = kmeans(pts, 2, 9);
    REQUIRE(res.centroids.size() == 2);
    auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::abs(a[0] - b[0]) < 1e-6 && std::abs(a[1] - b[1]) < 1e-6;
    };
    const bool direct = close(res.centroids[0], best_means[0]) && close(res.centroids[1], best_means[1]);
    const bool swapped = close(res.centroids[0], best_means[1]) && close(res.centroids[1], best_means[0]);
    CHECK((direct || swapped));
}

TEST_CASE("k-means inertia is non-increasing and the run is deterministic") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> pts;
        const int n = 30 + static_cast<int>(rng.uniform_int(0, 40));
        for (int i = 0; i < n; ++i)
            pts.push_back({rng.next_double(), rng.next_double(), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const uint64_t seed = rng.next_u64();
        const auto res = kmeans(pts, 5, seed);
        for (size_t i = 1; i < res.inertia_history.size(); ++i)
            CHECK(res.inertia_history[i] <= res.inertia_history[i - 1] + 1e-12);
        const auto again = kmeans(pts, 5, seed);
        CHECK(res.centroids == again.centroids);
    }
    CHECK_THROWS_AS(kmeans({{0.0, 0.0}}, 2, 1), std::invalid_argument);
}

TEST_CASE("kmeans_anchors clusters in the requested space") {
    Rng rng(55);
    std::vector<CellSegment> segments;
    for (int i = 0; i < 50; ++i)
        segments.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1)));
    for (FeatureSpace space :
         {FeatureSpace::Cart, FeatureSpace::MR, FeatureSpace::MP, FeatureSpace::Dir}) {
        const auto set = kmeans_anchors(segments, 4, space, 11);
        CHECK(set.count() == 4);
        CHECK(set.space == space);
        for (const auto& c : set.anchors)
            CHECK(static_cast<int>(c.size()) == feature_dimension(space));
    }
    CHECK_THROWS_AS(kmeans_anchors(segments, 100, FeatureSpace::MR, 1), std::invalid_argument);
}

TEST_CASE("assign_to_anchors sends a single gt to the closest anchor") {
    const auto anchors = uniform_anchors(FeatureSpace::Dir, 4);
    const auto a = assign_to_anchors({mr_segment(0.5, 0.5, 0.05, 0.9)}, anchors);
    REQUIRE(a.assigned.size() == 1);
    CHECK(a.assigned[0] == std::pair<int, int>{1, 0});  // (0,1) direction anchor
    CHECK(a.dropped.empty());
}

TEST_CASE("two identical gts on one anchor drop one of them") {
    AnchorSet one;
    one.space = FeatureSpace::MR;
    one.anchors = {{0.5, 0.5, 1.0, 0.0}};
    const auto a = assign_to_anchors({mr_segment(0.5, 0.5, 1, 0), mr_segment(0.5, 0.5, 1, 0)}, one);
    CHECK(a.assigned.size() == 1);
    CHECK(a.dropped.size() == 1);
}

TEST_CASE("assignment partitions the input and anchors hold at most one gt") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<CellSegment> gts;
        const int n = static_cast<int>(rng.uniform_int(0, 12));
        for (int i = 0; i < n; ++i)
            gts.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                     rng.uniform(-1, 1), rng.uniform(-1, 1)));
        const int p = static_cast<int>(rng.uniform_int(1, 8));
        const auto anchors = uniform_anchors(FeatureSpace::MR, p);
        const auto a = assign_to_anchors(gts, anchors);
        CHECK(a.assigned.size() + a.dropped.size() == gts.size());
        std::set<int> used_anchors, used_gts;
        for (const auto& [ai, gi] : a.assigned) {
            CHECK(used_anchors.insert(ai).second);
            CHECK(used_gts.insert(gi).second);
        }
        for (int gi : a.dropped) CHECK(used_gts.insert(gi).second);

        // adding one anchor never increases the dropped count
        AnchorSet bigger = anchors;
        bigger.anchors.push_back({0.3, 0.7, -0.2, 0.4});
        CHECK(assign_to_anchors(gts, bigger).dropped.size() <= a.dropped.size());
    }
}

TEST_CASE("dropped fraction does not grow with more anchors") {
    Rng rng(321);
    long dropped8 = 0, dropped24 = 0, total = 0;
    const auto a8 = uniform_anchors(FeatureSpace::MR, 8);
    const auto a24 = uniform_anchors(FeatureSpace::MR, 24);
    for (int cell = 0; cell < 200; ++cell) {
        std::vector<CellSegment> gts;
        const int n = static_cast<int>(rng.uniform_int(1, 12));
        for (int i = 0; i < n; ++i)
            gts.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                     rng.uniform(-1, 1), rng.uniform(-1, 1)));
        dropped8 += static_cast<long>(assign_to_anchors(gts, a8).dropped.size());
        dropped24 += static_cast<long>(assign_to_anchors(gts, a24).dropped.size());
        total += n;
    }
    CHECK(total > 0);
    CHECK(dropped24 <= dropped8);
}

TEST_CASE("ma_statistic basics") {
    const auto anchors = uniform_anchors(FeatureSpace::MR, 1);

    // every cell holds at most one segment -> zero
    std::vector<std::vector<CellSegment>> sparse{
        {mr_segment(0.2, 0.2, 1, 0, 0, 0), mr_segment(0.8, 0.8, 0, 1, 1, 1)}};
    CHECK(ma_statistic(sparse, anchors) == 0.0);

    // one cell with two gts and P=1 -> one of two dropped
    std::vector<std::vector<CellSegment>> dense{
        {mr_segment(0.2, 0.2, 1, 0, 0, 0), mr_segment(0.8, 0.8, 0, 1, 0, 0)}};
    CHECK(ma_statistic(dense, anchors) == 0.5);

    CHECK_THROWS_AS(ma_statistic({}, anchors), std::invalid_argument);
}

TEST_CASE("ma_statistic equals the per-cell overflow count") {
    // with a complete candidate graph, greedy fills min(n, P) anchors per
    // cell, so the dropped count is the overflow max(0, n - P)
    Rng rng(444);
    const auto anchors = uniform_anchors(FeatureSpace::MR, 8);
    std::vector<std::vector<CellSegment>> images;
    double expected_sum = 0.0;
    for (int im = 0; im < 20; ++im) {
        std::vector<CellSegment> segs;
        std::map<std::pair<int, int>, int> counts;
        const int n = static_cast<int>(rng.uniform_int(1, 40));
        for (int i = 0; i < n; ++i) {
            const int row = static_cast<int>(rng.uniform_int(0, 2));
            const int col = static_cast<int>(rng.uniform_int(0, 2));
            segs.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1), row, col));
            ++counts[{row, col}];
        }
        long overflow = 0;
        for (const auto& [cell, count] : counts) overflow += std::max(0, count - 8);
        expected_sum += static_cast<double>(overflow) / static_cast<double>(n);
        images.push_back(std::move(segs));
    }
    CHECK(ma_statistic(images, anchors) ==
          doctest::Approx(expected_sum / static_cast<double>(images.size())).epsilon(1e-12));
}

TEST_CASE("anchor set JSON round trip") {
    Rng rng(66);
    std::vector<CellSegment> segments;
    for (int i = 0; i < 30; ++i)
        segments.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1)));
    const auto set = kmeans_anchors(segments, 5, FeatureSpace::MR, 3);
    const auto back = anchor_set_from_json(anchor_set_to_json(set));
    CHECK(back.space == set.space);
    CHECK(back.anchors == set.anchors);
}

TEST_CASE("anchor_geometry fills the missing coordinates") {
    const auto mp = uniform_anchors(FeatureSpace::MP, 1);
    const auto g1 = anchor_geometry(mp, 0, LineRep::MR);
    CHECK(g1[0] == 0.5);
    CHECK(g1[2] == 1.0);
    CHECK(g1[3] == 0.0);

    const auto dir = uniform_anchors(FeatureSpace::Dir, 4);
    const auto g2 = anchor_geometry(dir, 0, LineRep::MR);
    CHECK(g2[0] == 0.5);
    CHECK(g2[1] == 0.5);
    CHECK(g2[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(anchor_geometry(dir, 9, LineRep::MR), std::out_of_range);
}
