#pragma once

// Independent test oracles: brute-force and sampling references that stay
// deliberately separate from the library implementation paths they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gridline/geom.hpp"
#include "gridline/matching.hpp"
#include "gridline/rng.hpp"

namespace oracles {

using gridline::Point2;
using gridline::Polyline;

// minimum assignment cost over all permutations (square matrices, n <= ~8);
// entries summed in row order so exact comparisons against the solver hold
inline double brute_force_min_cost(const gridline::CostMatrix& c) {
    const int n = c.rows;
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int i = 0; i < n; ++i) cost += c.at(i, perm[static_cast<size_t>(i)]);
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// minimum cost of matching every column to a distinct row (rows >= cols)
inline double brute_force_min_cost_rect(const gridline::CostMatrix& c) {
    const int rows = c.rows, cols = c.cols;
    std::vector<int> rows_idx(static_cast<size_t>(rows));
    std::iota(rows_idx.begin(), rows_idx.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<size_t>(cols), -1);
    std::vector<char> used(static_cast<size_t>(rows), 0);
    auto rec = [&](auto&& self, int col, double acc) -> void {
        if (col == cols) { best = std::min(best, acc); return; }
        for (int r = 0; r < rows; ++r) {
            if (used[static_cast<size_t>(r)]) continue;
            used[static_cast<size_t>(r)] = 1;
            self(self, col + 1, acc + c.at(r, col));
            used[static_cast<size_t>(r)] = 0;
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

inline double point_to_segment(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = gridline::dot(ab, ab);
    if (len2 == 0.0) return gridline::distance(p, a);
    const double t = std::clamp(gridline::dot(p - a, ab) / len2, 0.0, 1.0);
    return gridline::distance(p, a + ab * t);
}

inline double point_to_polyline(Point2 p, const Polyline& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < poly.points.size(); ++i)
        best = std::min(best, point_to_segment(p, poly.points[i], poly.points[i + 1]));
    return best;
}

// symmetric Hausdorff distance between two polylines, by dense sampling
inline double polyline_hausdorff(const Polyline& a, const Polyline& b, double step = 0.25) {
    auto directed = [&](const Polyline& from, const Polyline& to) {
        double worst = 0.0;
        for (size_t i = 0; i + 1 < from.points.size(); ++i) {
            const Point2 p = from.points[i];
            const Point2 q = from.points[i + 1];
            const double len = gridline::distance(p, q);
            const int samples = std::max(1, static_cast<int>(std::ceil(len / step)));
            for (int s = 0; s <= samples; ++s) {
                const Point2 x = p + (q - p) * (static_cast<double>(s) / samples);
                worst = std::max(worst, point_to_polyline(x, to));
            }
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

// random polyline that stays inside [margin, w-margin] x [margin, h-margin]
inline Polyline random_polyline(gridline::Rng& rng, double w, double h, int min_pts = 3,
                                int max_pts = 7, double margin = 2.0) {
    while (true) {
        Polyline p;
        const int pts = static_cast<int>(rng.uniform_int(min_pts, max_pts));
        Point2 cur{rng.uniform(margin, w - margin), rng.uniform(margin, h - margin)};
        p.points.push_back(cur);
        double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        bool ok = true;
        for (int i = 1; i < pts; ++i) {
            heading += rng.uniform(-1.0, 1.0);
            const double step_len = rng.uniform(6.0, 25.0);
            cur = cur + Point2{std::cos(heading), std::sin(heading)} * step_len;
            if (cur.u < margin || cur.u > w - margin || cur.v < margin || cur.v > h - margin) {
                ok = false;
                break;
            }
            p.points.push_back(cur);
        }
        if (ok && p.points.size() >= 2) return p;
    }
}

inline gridline::SegmentCart random_cart_segment(gridline::Rng& rng, double min_len = 0.05) {
    while (true) {
        gridline::SegmentCart s{{rng.next_double(), rng.next_double()},
                                {rng.next_double(), rng.next_double()}};
        if (gridline::distance(s.s, s.e) >= min_len) return s;
    }
}

}  // namespace oracles
