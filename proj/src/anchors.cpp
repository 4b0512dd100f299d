#include "gridline/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "gridline/rng.hpp"

namespace gridline {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// cell-centered r x c lattice with c = ceil(sqrt(n)), truncated to n points
std::vector<Point2> midpoint_lattice(int n) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    std::vector<Point2> pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < rows && static_cast<int>(pts.size()) < n; ++i)
        for (int j = 0; j < cols && static_cast<int>(pts.size()) < n; ++j)
            pts.push_back({(j + 0.5) / cols, (i + 0.5) / rows});
    return pts;
}

std::vector<Point2> direction_fan(int n) {
    std::vector<Point2> dirs;
    dirs.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double angle = 2.0 * kPi * k / n;
        dirs.push_back({std::cos(angle), std::sin(angle)});
    }
    return dirs;
}

}  // namespace

AnchorSet uniform_anchors(FeatureSpace space, int P) {
    if (P < 1) throw std::invalid_argument("anchor count must be at least 1");
    AnchorSet set;
    set.space = space;
    switch (space) {
        case FeatureSpace::MP:
            for (const Point2 m : midpoint_lattice(P)) set.anchors.push_back({m.u, m.v});
            break;
        case FeatureSpace::Dir:
            for (const Point2 d : direction_fan(P)) set.anchors.push_back({d.u, d.v});
            break;
        case FeatureSpace::MR: {
            const int dirs = std::min(P, 8);
            const int mids = (P + dirs - 1) / dirs;
            for (const Point2 m : midpoint_lattice(mids)) {
                for (const Point2 d : direction_fan(dirs)) {
                    if (set.count() == P) break;
                    set.anchors.push_back({m.u, m.v, d.u, d.v});
                }
            }
            break;
        }
        case FeatureSpace::Cart:
            // an even spread of ordered point pairs inside [0,1]^4 has no
            // sensible construction; Cart anchors come from clustering
            throw std::invalid_argument("uniform anchors are not defined for the Cart space");
    }
    return set;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iterations, double tolerance) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (static_cast<int>(points.size()) < k)
        throw std::invalid_argument("fewer points than clusters");
    const size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("inconsistent point dimensions");

    Rng rng(seed);
    const int n = static_cast<int>(points.size());

    // k-means++ seeding
    KMeansResult res;
    res.centroids.push_back(points[static_cast<size_t>(rng.uniform_int(0, n - 1))]);
    std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(res.centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points[i], res.centroids.back()));
            total += d2[i];
        }
        int pick = 0;
        if (total > 0.0) {
            const double target = rng.next_double() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) { pick = i; break; }
                pick = i;
            }
        } else {
            pick = static_cast<int>(rng.uniform_int(0, n - 1));
        }
        res.centroids.push_back(points[static_cast<size_t>(pick)]);
    }

    res.assignment.assign(points.size(), 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iterations; ++iter) {
        // assignment step, ties to the lower centroid index
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(points[i], res.centroids[static_cast<size_t>(c)]);
                if (d < best) { best = d; best_c = c; }
            }
            res.assignment[static_cast<size_t>(i)] = best_c;
            inertia += best;
        }
        res.inertia_history.push_back(inertia);

        // update step
        std::vector<std::vector<double>> sums(static_cast<size_t>(k), std::vector<double>(dim, 0.0));
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const int c = res.assignment[static_cast<size_t>(i)];
            ++counts[static_cast<size_t>(c)];
            for (size_t j = 0; j < dim; ++j) sums[static_cast<size_t>(c)][j] += points[static_cast<size_t>(i)][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) {
                // reseed an empty cluster with the point farthest from its centroid
                double worst = -1.0;
                int worst_i = 0;
                for (int i = 0; i < n; ++i) {
                    const double d = sq_dist(points[static_cast<size_t>(i)],
                                             res.centroids[static_cast<size_t>(res.assignment[static_cast<size_t>(i)])]);
                    if (d > worst) { worst = d; worst_i = i; }
                }
                res.centroids[static_cast<size_t>(c)] = points[static_cast<size_t>(worst_i)];
            } else {
                for (size_t j = 0; j < dim; ++j)
                    res.centroids[static_cast<size_t>(c)][j] =
                        sums[static_cast<size_t>(c)][j] / counts[static_cast<size_t>(c)];
            }
        }

        if (prev_inertia - inertia < tolerance && std::isfinite(prev_inertia)) break;
        prev_inertia = inertia;
    }
    return res;
}

AnchorSet kmeans_anchors(const std::vector<CellSegment>& segments, int k, FeatureSpace space,
                         uint64_t seed) {
    if (static_cast<int>(segments.size()) < k)
        throw std::invalid_argument("fewer segments than requested anchors");
    const int dim = feature_dimension(space);
    std::vector<std::vector<double>> points;
    points.reserve(segments.size());
    for (const auto& seg : segments) {
        std::array<double, 4> f{};
        feature_vector(seg.geometry, space, f);
        points.emplace_back(f.begin(), f.begin() + dim);
    }
    AnchorSet set;
    set.space = space;
    set.anchors = kmeans(points, k, seed).centroids;
    return set;
}

AnchorAssignment assign_to_anchors(const std::vector<CellSegment>& cell_gts, const AnchorSet& a) {
    const int dim = feature_dimension(a.space);
    struct Pair {
        double dist;
        int anchor, gt;
    };
    std::vector<Pair> pairs;
    pairs.reserve(cell_gts.size() * a.anchors.size());
    for (size_t gi = 0; gi < cell_gts.size(); ++gi) {
        std::array<double, 4> f{};
        feature_vector(cell_gts[gi].geometry, a.space, f);
        for (size_t ai = 0; ai < a.anchors.size(); ++ai) {
            double acc = 0.0;
            for (int j = 0; j < dim; ++j) {
                const double d = f[static_cast<size_t>(j)] - a.anchors[ai][static_cast<size_t>(j)];
                acc += d * d;
            }
            pairs.push_back({std::sqrt(acc), static_cast<int>(ai), static_cast<int>(gi)});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        if (x.dist != y.dist) return x.dist < y.dist;
        if (x.anchor != y.anchor) return x.anchor < y.anchor;
        return x.gt < y.gt;
    });

    AnchorAssignment out;
    std::vector<char> anchor_used(a.anchors.size(), 0);
    std::vector<char> gt_done(cell_gts.size(), 0);
    for (const Pair& p : pairs) {
        if (anchor_used[static_cast<size_t>(p.anchor)] || gt_done[static_cast<size_t>(p.gt)]) continue;
        anchor_used[static_cast<size_t>(p.anchor)] = 1;
        gt_done[static_cast<size_t>(p.gt)] = 1;
        out.assigned.emplace_back(p.anchor, p.gt);
    }
    for (size_t gi = 0; gi < cell_gts.size(); ++gi)
        if (!gt_done[gi]) out.dropped.push_back(static_cast<int>(gi));
    std::sort(out.assigned.begin(), out.assigned.end());
    return out;
}

double ma_statistic(const std::vector<std::vector<CellSegment>>& images, const AnchorSet& a) {
    if (images.empty()) throw std::invalid_argument("empty dataset");
    double ratio_sum = 0.0;
    long counted_images = 0;
    for (const auto& segments : images) {
        if (segments.empty()) continue;
        std::map<std::pair<int, int>, std::vector<CellSegment>> cells;
        for (const auto& seg : segments) cells[{seg.row, seg.col}].push_back(seg);
        long dropped = 0;
        for (const auto& [cell, gts] : cells)
            dropped += static_cast<long>(assign_to_anchors(gts, a).dropped.size());
        ratio_sum += static_cast<double>(dropped) / static_cast<double>(segments.size());
        ++counted_images;
    }
    if (counted_images == 0) throw std::invalid_argument("dataset has no ground-truth segments");
    return ratio_sum / static_cast<double>(counted_images);
}

std::array<double, 4> anchor_geometry(const AnchorSet& a, int index, LineRep rep) {
    if (index < 0 || index >= a.count()) throw std::out_of_range("anchor index out of range");
    const auto& c = a.anchors[static_cast<size_t>(index)];
    SegmentGeometry g;
    switch (a.space) {
        case FeatureSpace::MP: g = SegmentMR{{c[0], c[1]}, {1.0, 0.0}}; break;
        case FeatureSpace::Dir: g = SegmentMR{{0.5, 0.5}, {c[0], c[1]}}; break;
        case FeatureSpace::MR: g = SegmentMR{{c[0], c[1]}, {c[2], c[3]}}; break;
        case FeatureSpace::Cart: g = SegmentCart{{c[0], c[1]}, {c[2], c[3]}}; break;
    }
    return geometry_values(convert_geometry(g, rep));
}

Matching assignment_to_matching(const AnchorAssignment& assignment) {
    Matching m;
    m.pairs = assignment.assigned;
    m.total_cost = 0.0;
    return m;
}

std::string anchor_set_to_json(const AnchorSet& a) {
    nlohmann::json j;
    j["space"] = to_string(a.space);
    j["P"] = a.count();
    j["anchors"] = a.anchors;
    return j.dump(2);
}

AnchorSet anchor_set_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    AnchorSet a;
    a.space = feature_space_from_string(j.at("space").get<std::string>());
    a.anchors = j.at("anchors").get<std::vector<std::vector<double>>>();
    const int dim = feature_dimension(a.space);
    for (const auto& c : a.anchors)
        if (static_cast<int>(c.size()) != dim)
            throw std::invalid_argument("anchor dimension does not match space");
    if (j.contains("P") && j.at("P").get<int>() != a.count())
        throw std::invalid_argument("anchor count does not match P");
    return a;
}

}  // namespace gridline
