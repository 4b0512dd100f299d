#pragma once

#include <vector>

#include "gridline/geom.hpp"

namespace gridline {

enum class NmsMode { KeepMax, ConfidenceWeightedAverage };

struct NmsConfig {
    double position_eps = 4.0;                 // px, midpoint merge radius
    double angle_eps = 0.39269908169872414;    // pi/8, undirected
    NmsMode mode = NmsMode::KeepMax;
};

struct StitchConfig {
    double join_eps = 2.0;                     // px, endpoint snap distance
    double angle_eps = 0.7853981633974483;     // pi/4, max turn between segments
};

/// Greedy confidence-ordered suppression: an accepted segment removes (or, in
/// average mode, absorbs) every remaining segment whose midpoint lies within
/// position_eps and whose undirected angle differs by less than angle_eps.
std::vector<ImageSegment> nms(const std::vector<ImageSegment>& segments, const NmsConfig& cfg);

/// Chain segments end-to-start into directed polylines. A link requires the
/// gap below join_eps and the turn below angle_eps; where several segments
/// continue a chain the smallest turn wins. Every segment is used once.
std::vector<Polyline> stitch(const std::vector<ImageSegment>& segments, const StitchConfig& cfg);

}  // namespace gridline
