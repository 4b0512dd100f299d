#include <doctest.h>

#include <limits>
#include <stdexcept>

#include "gridline/matching.hpp"
#include "gridline/rng.hpp"
#include "support/oracles.hpp"

using namespace gridline;

TEST_CASE("hungarian picks the zero diagonal") {
    CostMatrix c(2, 2);
    c.at(0, 0) = 0; c.at(0, 1) = 9;
    c.at(1, 0) = 9; c.at(1, 1) = 0;
    const auto m = hungarian(c);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(m.pairs[1] == std::pair<int, int>{1, 1});
    CHECK(m.total_cost == 0.0);
}

TEST_CASE("hungarian on a single row takes the argmin") {
    CostMatrix c(1, 3);
    c.at(0, 0) = 5; c.at(0, 1) = 2; c.at(0, 2) = 7;
    const auto m = hungarian(c);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0] == std::pair<int, int>{0, 1});
    CHECK(m.total_cost == 2.0);
}

TEST_CASE("hungarian rejects non-finite entries") {
    CostMatrix c(2, 2);
    c.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
    c.at(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
}

TEST_CASE("hungarian matches the brute-force minimum on random matrices") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 6;
        CostMatrix c(n, n);
        for (double& e : c.entries) e = rng.next_double() * 10.0;
        const auto m = hungarian(c);
        CHECK(m.total_cost == oracles::brute_force_min_cost(c));
        // pairs must be a permutation
        std::vector<char> row_seen(static_cast<size_t>(n), 0), col_seen(static_cast<size_t>(n), 0);
        for (const auto& [r, col] : m.pairs) {
            CHECK(!row_seen[static_cast<size_t>(r)]);
            CHECK(!col_seen[static_cast<size_t>(col)]);
            row_seen[static_cast<size_t>(r)] = 1;
            col_seen[static_cast<size_t>(col)] = 1;
        }
    }
}

TEST_CASE("hungarian handles rectangular matrices") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = static_cast<int>(rng.uniform_int(1, 6));
        const int cols = static_cast<int>(rng.uniform_int(1, 6));
        CostMatrix c(rows, cols);
        for (double& e : c.entries) e = rng.next_double() * 5.0;
        const auto m = hungarian(c);
        CHECK(static_cast<int>(m.pairs.size()) == std::min(rows, cols));
        // oracle enumerates over the smaller side
        CostMatrix view = c;
        if (rows < cols) {
            // transpose so cols <= rows for the rectangular oracle
            view = CostMatrix(cols, rows);
            for (int r = 0; r < rows; ++r)
                for (int col = 0; col < cols; ++col) view.at(col, r) = c.at(r, col);
        }
        CHECK(m.total_cost == doctest::Approx(oracles::brute_force_min_cost_rect(view)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian resolves ties toward lexicographic pairs") {
    CostMatrix c(2, 2);  // all-equal costs: every permutation is optimal
    c.at(0, 0) = 1; c.at(0, 1) = 1;
    c.at(1, 0) = 1; c.at(1, 1) = 1;
    const auto m = hungarian(c);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(m.pairs[1] == std::pair<int, int>{1, 1});
}

namespace {

CellSegment mr_segment(double mu, double mv, double du, double dv) {
    CellSegment seg;
    seg.geometry = SegmentMR{{mu, mv}, {du, dv}};
    return seg;
}

}  // namespace

TEST_CASE("dynamic_assign with no ground truth is empty") {
    std::vector<CellSegment> preds{mr_segment(0.5, 0.5, 1, 0)};
    CHECK(dynamic_assign(preds, {}).pairs.empty());
}

TEST_CASE("dynamic_assign pairs the zero-cost predictor") {
    std::vector<CellSegment> preds;
    for (int i = 0; i < 8; ++i) preds.push_back(mr_segment(0.9, 0.9, -1, -1));
    preds[3] = mr_segment(0.25, 0.5, 0.5, 0.0);
    const std::vector<CellSegment> gts{mr_segment(0.25, 0.5, 0.5, 0.0)};
    const auto m = dynamic_assign(preds, gts);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0] == std::pair<int, int>{3, 0});
    CHECK(m.total_cost == 0.0);
}

TEST_CASE("dynamic_assign rejects mixed representations") {
    std::vector<CellSegment> preds{mr_segment(0.5, 0.5, 1, 0)};
    CellSegment cart;
    cart.geometry = SegmentCart{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(dynamic_assign(preds, {cart}), std::invalid_argument);
}

TEST_CASE("dynamic_assign matches exhaustive enumeration for P=8, 3 gts") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<CellSegment> preds, gts;
        for (int i = 0; i < 8; ++i)
            preds.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                       rng.uniform(-1, 1), rng.uniform(-1, 1)));
        for (int j = 0; j < 3; ++j)
            gts.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                     rng.uniform(-1, 1), rng.uniform(-1, 1)));
        const auto m = dynamic_assign(preds, gts);
        REQUIRE(m.pairs.size() == 3);

        // oracle: try all ordered 3-subsets of the 8 predictors
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                for (int c = 0; c < 8; ++c) {
                    if (a == b || b == c || a == c) continue;
                    best = std::min(best, segment_distance(preds[static_cast<size_t>(a)], gts[0], FeatureSpace::MR) +
                                              segment_distance(preds[static_cast<size_t>(b)], gts[1], FeatureSpace::MR) +
                                              segment_distance(preds[static_cast<size_t>(c)], gts[2], FeatureSpace::MR));
                }
        CHECK(m.total_cost == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("dynamic_assign cost is invariant under ground-truth permutation") {
    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CellSegment> preds, gts;
        for (int i = 0; i < 5; ++i)
            preds.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                       rng.uniform(-1, 1), rng.uniform(-1, 1)));
        for (int j = 0; j < 4; ++j)
            gts.push_back(mr_segment(rng.next_double(), rng.next_double(),
                                     rng.uniform(-1, 1), rng.uniform(-1, 1)));
        const double base = dynamic_assign(preds, gts).total_cost;
        std::vector<CellSegment> shuffled = gts;
        std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
        CHECK(dynamic_assign(preds, shuffled).total_cost == doctest::Approx(base).epsilon(1e-12));
    }
}
