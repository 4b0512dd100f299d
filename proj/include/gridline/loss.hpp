#pragma once

#include <array>
#include <vector>

#include "gridline/geom.hpp"
#include "gridline/matching.hpp"

namespace gridline {

struct LossWeights {
    double w_geom = 1.0;
    double w_conf1 = 1.0;  // confidence term when a predictor is assigned
    double w_conf0 = 1.0;  // confidence term when it is not
    double w_class = 1.0;
};

/// total = w_geom*geom + conf + w_class*cls; the conf field already carries
/// its weights. per_predictor holds each predictor's weighted share, indexed
/// by (cell, slot) in input order.
struct LossBreakdown {
    double total = 0.0;
    double geom = 0.0;
    double conf = 0.0;
    double cls = 0.0;
    std::vector<double> per_predictor;
};

/// Gradient of the total loss with respect to one predictor's outputs.
struct PredictorGradient {
    std::array<double, 4> geom{};
    std::vector<double> labels;
    double conf = 0.0;
};

/// Composite loss over per-cell predictions and ground truth. assignment[i]
/// pairs predictor slots of cell i with ground-truth indices of cell i;
/// unassigned predictors contribute only the zero-target confidence term.
LossBreakdown composite_loss(const std::vector<std::vector<CellSegment>>& preds,
                             const std::vector<std::vector<CellSegment>>& gts,
                             const std::vector<Matching>& assignment,
                             const LossWeights& w);

/// Exact partial derivatives of composite_loss with respect to every
/// predictor output (4 geometry + C labels + 1 confidence per predictor).
/// The geometry gradient at zero distance takes the subgradient 0.
std::vector<std::vector<PredictorGradient>> loss_gradients(
    const std::vector<std::vector<CellSegment>>& preds,
    const std::vector<std::vector<CellSegment>>& gts,
    const std::vector<Matching>& assignment,
    const LossWeights& w,
    LossBreakdown* breakdown = nullptr);

}  // namespace gridline
