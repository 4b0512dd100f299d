#include "gridline/geom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridline {

namespace {

constexpr double kDuplicateTol = 1e-9;   // px, minimum vertex separation
constexpr double kSliverTol = 1e-6;      // cell units, post-split segments below are dropped
constexpr double kEventMergeTol = 1e-12; // parameter-space tolerance for coincident cuts

void check_grid(const Grid& g) {
    if (g.rows < 1 || g.cols < 1 || g.cell_size < 1)
        throw std::invalid_argument("grid dimensions must be positive");
}

bool finite(Point2 p) { return std::isfinite(p.u) && std::isfinite(p.v); }

double clamp01(double x, double tol) {
    if (x < -tol || x > 1.0 + tol)
        throw std::invalid_argument("cell-local coordinate outside unit box");
    return std::clamp(x, 0.0, 1.0);
}

}  // namespace

int feature_dimension(FeatureSpace space) {
    switch (space) {
        case FeatureSpace::Cart:
        case FeatureSpace::MR: return 4;
        case FeatureSpace::MP:
        case FeatureSpace::Dir: return 2;
    }
    throw std::invalid_argument("unknown feature space");
}

std::string to_string(FeatureSpace space) {
    switch (space) {
        case FeatureSpace::Cart: return "cart";
        case FeatureSpace::MR: return "mr";
        case FeatureSpace::MP: return "mp";
        case FeatureSpace::Dir: return "dir";
    }
    throw std::invalid_argument("unknown feature space");
}

FeatureSpace feature_space_from_string(const std::string& name) {
    if (name == "cart" || name == "se") return FeatureSpace::Cart;
    if (name == "mr" || name == "md") return FeatureSpace::MR;
    if (name == "mp") return FeatureSpace::MP;
    if (name == "dir") return FeatureSpace::Dir;
    throw std::invalid_argument("unknown feature space: " + name);
}

SegmentMR cart_to_mr(const SegmentCart& c) {
    return {{(c.s.u + c.e.u) * 0.5, (c.s.v + c.e.v) * 0.5},
            {c.e.u - c.s.u, c.e.v - c.s.v}};
}

SegmentCart mr_to_cart(const SegmentMR& r, double tol) {
    SegmentCart c{{r.m.u - r.d.u * 0.5, r.m.v - r.d.v * 0.5},
                  {r.m.u + r.d.u * 0.5, r.m.v + r.d.v * 0.5}};
    c.s.u = clamp01(c.s.u, tol);
    c.s.v = clamp01(c.s.v, tol);
    c.e.u = clamp01(c.e.u, tol);
    c.e.v = clamp01(c.e.v, tol);
    return c;
}

LineRep segment_rep(const CellSegment& seg) {
    return std::holds_alternative<SegmentCart>(seg.geometry) ? LineRep::Cart : LineRep::MR;
}

std::array<double, 4> geometry_values(const SegmentGeometry& g) {
    if (const auto* c = std::get_if<SegmentCart>(&g))
        return {c->s.u, c->s.v, c->e.u, c->e.v};
    const auto& r = std::get<SegmentMR>(g);
    return {r.m.u, r.m.v, r.d.u, r.d.v};
}

SegmentGeometry geometry_from_values(LineRep rep, const std::array<double, 4>& v) {
    if (rep == LineRep::Cart) return SegmentCart{{v[0], v[1]}, {v[2], v[3]}};
    return SegmentMR{{v[0], v[1]}, {v[2], v[3]}};
}

SegmentGeometry convert_geometry(const SegmentGeometry& g, LineRep rep) {
    if (rep == LineRep::Cart) {
        if (std::holds_alternative<SegmentCart>(g)) return g;
        const auto& r = std::get<SegmentMR>(g);
        // unchecked inverse: conversion must stay valid for raw predictions
        return SegmentCart{{r.m.u - r.d.u * 0.5, r.m.v - r.d.v * 0.5},
                           {r.m.u + r.d.u * 0.5, r.m.v + r.d.v * 0.5}};
    }
    if (std::holds_alternative<SegmentMR>(g)) return g;
    return cart_to_mr(std::get<SegmentCart>(g));
}

CellSegment with_representation(const CellSegment& seg, LineRep rep) {
    CellSegment out = seg;
    out.geometry = convert_geometry(seg.geometry, rep);
    return out;
}

int feature_vector(const SegmentGeometry& g, FeatureSpace space, std::array<double, 4>& out) {
    const SegmentMR r = std::get<SegmentMR>(convert_geometry(g, LineRep::MR));
    switch (space) {
        case FeatureSpace::Cart: {
            const auto c = std::get<SegmentCart>(convert_geometry(g, LineRep::Cart));
            out = {c.s.u, c.s.v, c.e.u, c.e.v};
            return 4;
        }
        case FeatureSpace::MR:
            out = {r.m.u, r.m.v, r.d.u, r.d.v};
            return 4;
        case FeatureSpace::MP:
            out = {r.m.u, r.m.v, 0, 0};
            return 2;
        case FeatureSpace::Dir:
            out = {r.d.u, r.d.v, 0, 0};
            return 2;
    }
    throw std::invalid_argument("unknown feature space");
}

double segment_distance(const SegmentGeometry& a, const SegmentGeometry& b, FeatureSpace space) {
    std::array<double, 4> fa{}, fb{};
    const int dim = feature_vector(a, space, fa);
    feature_vector(b, space, fb);
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = fa[i] - fb[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double segment_distance(const CellSegment& a, const CellSegment& b, FeatureSpace space) {
    return segment_distance(a.geometry, b.geometry, space);
}

std::vector<CellSegment> split_polyline(const Polyline& p, const Grid& g, int num_classes) {
    check_grid(g);
    if (p.points.size() < 2)
        throw std::invalid_argument("polyline needs at least two points");
    if (num_classes < 0)
        throw std::invalid_argument("num_classes must be non-negative");
    if (num_classes > 0 && !p.label)
        throw std::invalid_argument("polyline without label cannot be one-hot encoded");
    if (num_classes > 0 && (*p.label < 0 || *p.label >= num_classes))
        throw std::invalid_argument("polyline label outside [0, num_classes)");

    const double cs = static_cast<double>(g.cell_size);
    const double w = static_cast<double>(g.width());
    const double h = static_cast<double>(g.height());

    bool all_coincident = true;
    for (size_t i = 0; i < p.points.size(); ++i) {
        const Point2 pt = p.points[i];
        if (!finite(pt)) throw std::invalid_argument("polyline has non-finite coordinates");
        if (pt.u < 0 || pt.u > w || pt.v < 0 || pt.v > h)
            throw std::out_of_range("polyline leaves the image bounds");
        if (i > 0 && distance(p.points[i - 1], pt) > kDuplicateTol) all_coincident = false;
    }
    if (all_coincident)
        throw std::invalid_argument("degenerate polyline: all points coincident");

    // Refine the vertex chain with exact cut points on every crossed border.
    std::vector<Point2> chain;
    chain.reserve(p.points.size() * 2);
    chain.push_back(p.points.front());
    for (size_t i = 0; i + 1 < p.points.size(); ++i) {
        const Point2 a = p.points[i];
        const Point2 b = p.points[i + 1];

        struct Event {
            double t;
            bool has_u = false, has_v = false;
            double u = 0, v = 0;  // exact border coordinates where set
        };
        std::vector<Event> events;
        auto collect = [&](double a0, double b0, bool axis_u) {
            if (a0 == b0) return;
            const double lo = std::min(a0, b0);
            const double hi = std::max(a0, b0);
            const long k_lo = static_cast<long>(std::floor(lo / cs)) + 1;
            const long k_hi = static_cast<long>(std::ceil(hi / cs)) - 1;
            for (long k = k_lo; k <= k_hi; ++k) {
                const double border = static_cast<double>(k) * cs;
                if (border <= lo || border >= hi) continue;  // endpoints are already chain points
                Event ev;
                ev.t = (border - a0) / (b0 - a0);
                if (axis_u) { ev.has_u = true; ev.u = border; }
                else { ev.has_v = true; ev.v = border; }
                events.push_back(ev);
            }
        };
        collect(a.u, b.u, true);
        collect(a.v, b.v, false);
        std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) { return x.t < y.t; });

        // merge u/v events that cut at the same parameter (segment through a corner)
        std::vector<Event> merged;
        for (const Event& ev : events) {
            if (!merged.empty() && std::abs(merged.back().t - ev.t) < kEventMergeTol) {
                Event& m = merged.back();
                if (ev.has_u) { m.has_u = true; m.u = ev.u; }
                if (ev.has_v) { m.has_v = true; m.v = ev.v; }
            } else {
                merged.push_back(ev);
            }
        }
        for (const Event& ev : merged) {
            Point2 cut{ev.has_u ? ev.u : a.u + ev.t * (b.u - a.u),
                       ev.has_v ? ev.v : a.v + ev.t * (b.v - a.v)};
            chain.push_back(cut);
        }
        chain.push_back(b);
    }

    std::vector<double> one_hot;
    if (num_classes > 0) {
        one_hot.assign(static_cast<size_t>(num_classes), 0.0);
        one_hot[static_cast<size_t>(*p.label)] = 1.0;
    }

    std::vector<CellSegment> out;
    out.reserve(chain.size());
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
        const Point2 a = chain[i];
        const Point2 b = chain[i + 1];
        if (distance(a, b) < kSliverTol * cs) continue;

        // Half-open cell ownership [k, k+1): the midpoint lies strictly inside
        // the owning cell except for segments riding a border line, which the
        // floor assigns to the entered (higher-index) cell.
        const Point2 mid = (a + b) * 0.5;
        const int col = std::clamp(static_cast<int>(std::floor(mid.u / cs)), 0, g.cols - 1);
        const int row = std::clamp(static_cast<int>(std::floor(mid.v / cs)), 0, g.rows - 1);

        CellSegment seg;
        seg.geometry = SegmentCart{{clamp01((a.u - col * cs) / cs, kDuplicateTol),
                                    clamp01((a.v - row * cs) / cs, kDuplicateTol)},
                                   {clamp01((b.u - col * cs) / cs, kDuplicateTol),
                                    clamp01((b.v - row * cs) / cs, kDuplicateTol)}};
        seg.label_probs = one_hot;
        seg.confidence = 1.0;
        seg.row = row;
        seg.col = col;
        out.push_back(std::move(seg));
    }
    if (out.empty())
        throw std::invalid_argument("degenerate polyline: no segments survive splitting");
    return out;
}

std::vector<CellSegment> merge_collinear_chain(const std::vector<CellSegment>& chain,
                                               double max_turn) {
    if (max_turn <= 0.0 || chain.empty()) return chain;
    auto direction = [](const CellSegment& seg) {
        const auto c = std::get<SegmentCart>(convert_geometry(seg.geometry, LineRep::Cart));
        return c.e - c.s;
    };
    auto turn = [](Point2 a, Point2 b) {
        const double na = norm(a), nb = norm(b);
        if (na == 0.0 || nb == 0.0) return 0.0;
        return std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0));
    };

    std::vector<CellSegment> out;
    out.push_back(chain.front());
    for (size_t i = 1; i < chain.size(); ++i) {
        CellSegment& prev = out.back();
        const CellSegment& cur = chain[i];
        const bool same_cell = prev.row == cur.row && prev.col == cur.col;
        const auto pc = std::get<SegmentCart>(convert_geometry(prev.geometry, LineRep::Cart));
        const auto cc = std::get<SegmentCart>(convert_geometry(cur.geometry, LineRep::Cart));
        const bool contiguous = distance(pc.e, cc.s) < 1e-9;
        if (same_cell && contiguous && turn(direction(prev), direction(cur)) < max_turn) {
            prev.geometry = segment_rep(prev) == LineRep::Cart
                                ? SegmentGeometry(SegmentCart{pc.s, cc.e})
                                : convert_geometry(SegmentCart{pc.s, cc.e}, LineRep::MR);
        } else {
            out.push_back(cur);
        }
    }
    return out;
}

ImageSegment cell_to_image(const CellSegment& seg, const Grid& g) {
    check_grid(g);
    if (seg.row < 0 || seg.row >= g.rows || seg.col < 0 || seg.col >= g.cols)
        throw std::out_of_range("cell index outside the grid");
    const double cs = static_cast<double>(g.cell_size);
    const auto c = std::get<SegmentCart>(convert_geometry(seg.geometry, LineRep::Cart));
    ImageSegment out;
    out.s = {(seg.col + c.s.u) * cs, (seg.row + c.s.v) * cs};
    out.e = {(seg.col + c.e.u) * cs, (seg.row + c.e.v) * cs};
    out.confidence = seg.confidence;
    if (!seg.label_probs.empty()) {
        const auto it = std::max_element(seg.label_probs.begin(), seg.label_probs.end());
        out.label = static_cast<int>(it - seg.label_probs.begin());
    }
    return out;
}

CellSegment image_to_cell(const ImageSegment& seg, const Grid& g, LineRep rep, int num_classes) {
    check_grid(g);
    const double cs = static_cast<double>(g.cell_size);
    const Point2 mid = (seg.s + seg.e) * 0.5;
    const int col = std::clamp(static_cast<int>(std::floor(mid.u / cs)), 0, g.cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor(mid.v / cs)), 0, g.rows - 1);
    CellSegment out;
    out.geometry = convert_geometry(
        SegmentCart{{seg.s.u / cs - col, seg.s.v / cs - row}, {seg.e.u / cs - col, seg.e.v / cs - row}},
        rep);
    out.confidence = seg.confidence;
    out.row = row;
    out.col = col;
    if (num_classes > 0 && seg.label && *seg.label >= 0 && *seg.label < num_classes) {
        out.label_probs.assign(static_cast<size_t>(num_classes), 0.0);
        out.label_probs[static_cast<size_t>(*seg.label)] = 1.0;
    }
    return out;
}

}  // namespace gridline
