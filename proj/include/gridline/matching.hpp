#pragma once

#include <utility>
#include <vector>

#include "gridline/geom.hpp"

namespace gridline {

/// Dense rectangular cost matrix, rows = predictors, cols = ground truth.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> entries;  // row-major

    CostMatrix() = default;
    CostMatrix(int r, int c) : rows(r), cols(c), entries(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return entries[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return entries[static_cast<size_t>(r) * cols + c]; }
};

/// 1-to-1 assignment: pairs of (predictor index, ground-truth index), sorted
/// by predictor index, covering the smaller side of the matrix.
struct Matching {
    std::vector<std::pair<int, int>> pairs;
    double total_cost = 0.0;
};

/// Minimum-total-cost assignment on the smaller side of the matrix.
/// Rectangular inputs are padded internally; among equal-cost optima the
/// lexicographically smallest pair list is returned. Throws on NaN/inf.
Matching hungarian(const CostMatrix& c);

/// Per-cell optimal assignment of predictions to ground truth; cost is the
/// Euclidean geometry distance in the segments' shared representation.
Matching dynamic_assign(const std::vector<CellSegment>& preds,
                        const std::vector<CellSegment>& gts);

}  // namespace gridline
