#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridline/geom.hpp"
#include "gridline/matching.hpp"

namespace gridline {

/// Fixed representatives in a feature space; predictors learn a deviation
/// from "their" anchor.
struct AnchorSet {
    FeatureSpace space = FeatureSpace::MR;
    std::vector<std::vector<double>> anchors;  // feature_dimension(space) each

    int count() const { return static_cast<int>(anchors.size()); }
};

/// Static 1-to-1 assignment of the ground truth in one cell to anchors.
/// assigned pairs are (anchor index, ground-truth index); dropped lists the
/// ground-truth indices displaced by a closer competitor.
struct AnchorAssignment {
    std::vector<std::pair<int, int>> assigned;
    std::vector<int> dropped;
};

/// Evenly distributed anchors. MP: cell-centered lattice; Dir: unit
/// directions at angles 2*pi*k/P; MR: midpoint lattice crossed with
/// directions, truncated to P. Deterministic in (space, P).
AnchorSet uniform_anchors(FeatureSpace space, int P);

/// Lloyd iterations with k-means++ seeding; exposed separately from
/// kmeans_anchors so the inertia trace is observable.
struct KMeansResult {
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment;           // per input point
    std::vector<double> inertia_history;   // after each Lloyd iteration
};
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iterations = 200, double tolerance = 1e-9);

/// Data-driven anchors: cluster the segments' coordinates in the requested
/// feature space. Requires |segments| >= k.
AnchorSet kmeans_anchors(const std::vector<CellSegment>& segments, int k, FeatureSpace space,
                         uint64_t seed);

/// Greedy globally-closest-first static assignment of one cell's ground truth
/// to the anchor set. Ties break toward the lower anchor index, then the
/// lower ground-truth index.
AnchorAssignment assign_to_anchors(const std::vector<CellSegment>& cell_gts, const AnchorSet& a);

/// Fraction of ground-truth segments dropped by static assignment, averaged
/// per image and then over the dataset. Each inner vector holds one image's
/// segments (any cells). Throws on an empty dataset.
double ma_statistic(const std::vector<std::vector<CellSegment>>& images, const AnchorSet& a);

/// Full segment geometry for one anchor in the given representation; missing
/// coordinates take the defaults d=(1,0) for MP anchors and m=(0.5,0.5) for
/// Dir anchors.
std::array<double, 4> anchor_geometry(const AnchorSet& a, int index, LineRep rep);

Matching assignment_to_matching(const AnchorAssignment& assignment);

std::string anchor_set_to_json(const AnchorSet& a);
AnchorSet anchor_set_from_json(const std::string& text);

}  // namespace gridline
