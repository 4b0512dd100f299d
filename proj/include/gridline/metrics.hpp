#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridline/anchors.hpp"
#include "gridline/geom.hpp"

namespace gridline {

struct OutcomeCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

struct RetrievalMetrics {
    double recall = 0.0, precision = 0.0, f1 = 0.0, accuracy = 0.0;
};

enum class AssignMode { Dynamic, Anchors };

/// Outcome of confidence-gated classification, with the matched true-positive
/// pairs kept in image coordinates for the MAE columns.
struct ClassifyResult {
    OutcomeCounts counts;
    struct TpPair {
        ImageSegment pred;
        ImageSegment gt;
    };
    std::vector<TpPair> tp_pairs;
    double conf_dev_sum = 0.0;  // |c-1| when assigned, |c-0| otherwise, every predictor
    long predictors = 0;

    void merge(const ClassifyResult& other);
};

/// Per predictor: TP if assigned and conf > threshold, FN if assigned and
/// conf <= threshold, FP if unassigned and conf > threshold, TN otherwise.
/// Anchor mode reproduces the static pre-training assignment; dynamic mode
/// matches by minimizing the geometry cost per cell.
ClassifyResult classify_outcomes(const std::vector<std::vector<CellSegment>>& preds,
                                 const std::vector<std::vector<CellSegment>>& gts,
                                 const Grid& grid, AssignMode mode,
                                 const AnchorSet* anchors = nullptr, double threshold = 0.5);

RetrievalMetrics retrieval_metrics(const OutcomeCounts& c);

struct MaeColumns {
    std::optional<double> cart;    // mean endpoint-pair distance, px
    std::optional<double> mp;      // midpoint distance, px
    std::optional<double> len;     // |length difference|, px
    std::optional<double> cf_tp;   // mean |conf - 1| over TPs
    double cf = 0.0;               // mean confidence deviation over all predictors
};

MaeColumns mae_metrics(const ClassifyResult& r);

struct GatePoint {
    double radius = 0.0;
    double f1 = 0.0;
    double cf = 0.0;
    std::optional<double> cf_tp;
    std::optional<double> mae_mp;
    std::optional<double> mae_len;
};

/// Circular uv-gate sweep: for each radius a positive prediction is TP when
/// an unconsumed ground-truth midpoint lies within the gate (globally nearest
/// first, one ground truth per prediction).
std::vector<GatePoint> gate_sweep(const std::vector<std::vector<ImageSegment>>& preds_per_image,
                                  const std::vector<std::vector<ImageSegment>>& gts_per_image,
                                  const std::vector<double>& radii, double threshold = 0.5);

struct MetricsReport {
    RetrievalMetrics retrieval;
    OutcomeCounts counts;
    MaeColumns mae;
    double ma = 0.0;
    std::vector<GatePoint> gate_curve;
};

std::string metrics_report_to_json(const MetricsReport& r);

/// Aligned text table with the columns F1 Re Pr Acc Cf CfTP ||.|| MP L MA.
std::string metrics_report_table(const MetricsReport& r);

std::string gate_curve_csv(const std::vector<GatePoint>& curve);

}  // namespace gridline
