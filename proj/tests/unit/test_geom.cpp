#include <doctest.h>

#include <set>
#include <stdexcept>

#include "gridline/decode.hpp"
#include "gridline/geom.hpp"
#include "gridline/rng.hpp"
#include "support/oracles.hpp"

using namespace gridline;

TEST_CASE("split_polyline cuts a horizontal segment at every border") {
    Grid g{1, 3, 8};
    Polyline p{{{0, 4}, {24, 4}}, std::nullopt};
    const auto segs = split_polyline(p, g);
    REQUIRE(segs.size() == 3);
    for (int i = 0; i < 3; ++i) {
        const auto c = std::get<SegmentCart>(segs[static_cast<size_t>(i)].geometry);
        CHECK(segs[static_cast<size_t>(i)].col == i);
        CHECK(segs[static_cast<size_t>(i)].row == 0);
        CHECK(c.s.u == doctest::Approx(0.0));
        CHECK(c.e.u == doctest::Approx(1.0));
        CHECK(c.s.v == doctest::Approx(0.5));
        CHECK(segs[static_cast<size_t>(i)].confidence == 1.0);
    }
}

TEST_CASE("split_polyline keeps an interior segment whole") {
    Grid g{4, 4, 8};
    Polyline p{{{9.0, 9.5}, {14.0, 13.0}}, std::nullopt};
    const auto segs = split_polyline(p, g);
    REQUIRE(segs.size() == 1);
    const auto c = std::get<SegmentCart>(segs[0].geometry);
    CHECK(segs[0].row == 1);
    CHECK(segs[0].col == 1);
    CHECK(c.s.u > 0.0);
    CHECK(c.s.u < 1.0);
    CHECK(c.e.v > 0.0);
    CHECK(c.e.v < 1.0);
}

TEST_CASE("split_polyline rejects out-of-bounds and degenerate input") {
    Grid g{4, 4, 8};
    CHECK_THROWS_AS(split_polyline({{{-1, 4}, {10, 4}}, std::nullopt}, g), std::out_of_range);
    CHECK_THROWS_AS(split_polyline({{{4, 4}, {100, 4}}, std::nullopt}, g), std::out_of_range);
    CHECK_THROWS_AS(split_polyline({{{4, 4}, {4, 4}}, std::nullopt}, g), std::invalid_argument);
    CHECK_THROWS_AS(split_polyline({{{4, 4}}, std::nullopt}, g), std::invalid_argument);
}

TEST_CASE("split_polyline emits one-hot labels") {
    Grid g{2, 2, 8};
    Polyline p{{{2, 2}, {6, 6}}, 1};
    const auto segs = split_polyline(p, g, 3);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].label_probs == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(split_polyline({{{2, 2}, {6, 6}}, std::nullopt}, g, 3), std::invalid_argument);
}

TEST_CASE("split then stitch reproduces random polylines") {
    Grid g{20, 20, 8};
    Rng rng(42);
    StitchConfig stitch_cfg;
    stitch_cfg.join_eps = 1e-6;
    stitch_cfg.angle_eps = 3.14159265358979;
    for (int trial = 0; trial < 25; ++trial) {
        const Polyline p = oracles::random_polyline(rng, g.width(), g.height());
        const auto segs = split_polyline(p, g);

        // no segment crosses a border and all cut points sit on borders
        for (const auto& seg : segs) {
            const auto c = std::get<SegmentCart>(seg.geometry);
            for (double coord : {c.s.u, c.s.v, c.e.u, c.e.v}) {
                CHECK(coord >= 0.0);
                CHECK(coord <= 1.0);
            }
        }

        std::vector<ImageSegment> image_segs;
        for (const auto& seg : segs) image_segs.push_back(cell_to_image(seg, g));
        const auto stitched = stitch(image_segs, stitch_cfg);
        REQUIRE(stitched.size() == 1);
        CHECK(oracles::polyline_hausdorff(p, stitched[0]) < 1e-6);
        // direction preserved
        CHECK(distance(stitched[0].points.front(), p.points.front()) < 1e-6);
        CHECK(distance(stitched[0].points.back(), p.points.back()) < 1e-6);
    }
}

TEST_CASE("reversing a polyline swaps segment endpoints") {
    Grid g{10, 10, 8};
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Polyline p = oracles::random_polyline(rng, g.width(), g.height());
        Polyline rev = p;
        std::reverse(rev.points.begin(), rev.points.end());
        const auto fwd = split_polyline(p, g);
        auto bwd = split_polyline(rev, g);
        REQUIRE(fwd.size() == bwd.size());
        std::reverse(bwd.begin(), bwd.end());
        for (size_t i = 0; i < fwd.size(); ++i) {
            CHECK(fwd[i].row == bwd[i].row);
            CHECK(fwd[i].col == bwd[i].col);
            const auto a = std::get<SegmentCart>(fwd[i].geometry);
            const auto b = std::get<SegmentCart>(bwd[i].geometry);
            CHECK(distance(a.s, b.e) < 1e-9);
            CHECK(distance(a.e, b.s) < 1e-9);
            // the MR displacement flips sign
            const auto ra = cart_to_mr(a);
            const auto rb = cart_to_mr(b);
            CHECK(ra.d.u == doctest::Approx(-rb.d.u).epsilon(1e-9));
            CHECK(ra.d.v == doctest::Approx(-rb.d.v).epsilon(1e-9));
        }
    }
}

TEST_CASE("cart/mr conversions match the closed forms") {
    const auto r = cart_to_mr({{0, 0}, {1, 1}});
    CHECK(r.m.u == 0.5);
    CHECK(r.m.v == 0.5);
    CHECK(r.d.u == 1.0);
    CHECK(r.d.v == 1.0);

    const auto z = cart_to_mr({{0.5, 0.5}, {0.5, 0.5}});
    CHECK(z.m.u == 0.5);
    CHECK(z.d.u == 0.0);

    const auto c = mr_to_cart({{0.5, 0.5}, {1.0, 0.0}});
    CHECK(c.s.u == doctest::Approx(0.0));
    CHECK(c.s.v == doctest::Approx(0.5));
    CHECK(c.e.u == doctest::Approx(1.0));

    const auto pt = mr_to_cart({{0.5, 0.5}, {0.0, 0.0}});
    CHECK(pt.s.u == 0.5);
    CHECK(pt.e.v == 0.5);

    CHECK_THROWS_AS(mr_to_cart({{0.9, 0.5}, {1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("cart -> mr -> cart round trip is exact to 1e-12") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const SegmentCart s = oracles::random_cart_segment(rng, 0.0);
        const SegmentCart back = mr_to_cart(cart_to_mr(s));
        CHECK(std::abs(back.s.u - s.s.u) < 1e-12);
        CHECK(std::abs(back.s.v - s.s.v) < 1e-12);
        CHECK(std::abs(back.e.u - s.e.u) < 1e-12);
        CHECK(std::abs(back.e.v - s.e.v) < 1e-12);
    }
}

TEST_CASE("cell_to_image maps cell-local coordinates to pixels") {
    CellSegment origin;
    origin.geometry = SegmentCart{{0, 0}, {0.25, 0.25}};
    const auto a = cell_to_image(origin, {4, 4, 32});
    CHECK(a.s.u == 0.0);
    CHECK(a.s.v == 0.0);

    CellSegment mid;
    mid.geometry = SegmentCart{{0.5, 0.5}, {0.75, 0.75}};
    mid.row = 1;
    mid.col = 2;
    const auto b = cell_to_image(mid, {4, 4, 8});
    CHECK(b.s.u == 20.0);
    CHECK(b.s.v == 12.0);

    CellSegment bad;
    bad.geometry = SegmentCart{{0, 0}, {1, 1}};
    bad.row = 7;
    CHECK_THROWS_AS(cell_to_image(bad, {4, 4, 8}), std::out_of_range);
}

TEST_CASE("split then cell_to_image restores pixel coordinates") {
    Grid g{12, 12, 8};
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Polyline p = oracles::random_polyline(rng, g.width(), g.height());
        const auto segs = split_polyline(p, g);
        Polyline rebuilt;
        for (const auto& seg : segs) {
            const auto img = cell_to_image(seg, g);
            if (rebuilt.points.empty() || distance(rebuilt.points.back(), img.s) > 1e-9)
                rebuilt.points.push_back(img.s);
            rebuilt.points.push_back(img.e);
        }
        CHECK(oracles::polyline_hausdorff(p, rebuilt) < 1e-9);
    }
}

TEST_CASE("segment_distance feature spaces") {
    const SegmentGeometry a = SegmentMR{{0, 0}, {1, 0}};
    const SegmentGeometry b = SegmentMR{{0, 0}, {-1, 0}};
    CHECK(segment_distance(a, a, FeatureSpace::Cart) == 0.0);
    CHECK(segment_distance(a, a, FeatureSpace::MR) == 0.0);
    CHECK(segment_distance(a, b, FeatureSpace::MP) == 0.0);
    CHECK(segment_distance(a, b, FeatureSpace::Dir) == 2.0);
}

TEST_CASE("segment_distance is a metric in every space") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const SegmentGeometry a = oracles::random_cart_segment(rng, 0.0);
        const SegmentGeometry b = oracles::random_cart_segment(rng, 0.0);
        const SegmentGeometry c = oracles::random_cart_segment(rng, 0.0);
        for (FeatureSpace space :
             {FeatureSpace::Cart, FeatureSpace::MR, FeatureSpace::MP, FeatureSpace::Dir}) {
            const double ab = segment_distance(a, b, space);
            const double ba = segment_distance(b, a, space);
            const double ac = segment_distance(a, c, space);
            const double cb = segment_distance(c, b, space);
            CHECK(ab >= 0.0);
            CHECK(ab == ba);
            CHECK(ab <= ac + cb + 1e-12);
            CHECK(segment_distance(a, a, space) == 0.0);
        }
    }
}
