#include "gridline/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridline {

namespace {

// compensated summation keeps the loss independent of evaluation order
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

void check_weights(const LossWeights& w) {
    const double vals[] = {w.w_geom, w.w_conf1, w.w_conf0, w.w_class};
    for (double v : vals)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("loss weights must be finite and non-negative");
}

int gt_label_index(const CellSegment& gt) {
    if (gt.label_probs.empty()) return -1;
    const auto it = std::max_element(gt.label_probs.begin(), gt.label_probs.end());
    return static_cast<int>(it - gt.label_probs.begin());
}

struct Accum {
    KahanSum geom, conf, cls;
};

// Shared walk over all predictors; grads may be null for loss-only evaluation.
void evaluate(const std::vector<std::vector<CellSegment>>& preds,
              const std::vector<std::vector<CellSegment>>& gts,
              const std::vector<Matching>& assignment,
              const LossWeights& w,
              Accum& acc,
              std::vector<double>* per_predictor,
              std::vector<std::vector<PredictorGradient>>* grads) {
    check_weights(w);
    if (preds.size() != gts.size() || preds.size() != assignment.size())
        throw std::invalid_argument("preds, gts and assignment must have equal cell counts");

    for (size_t ci = 0; ci < preds.size(); ++ci) {
        const auto& cell_preds = preds[ci];
        const auto& cell_gts = gts[ci];

        std::vector<int> matched_gt(cell_preds.size(), -1);
        for (const auto& [pi, gi] : assignment[ci].pairs) {
            if (pi < 0 || pi >= static_cast<int>(cell_preds.size()) ||
                gi < 0 || gi >= static_cast<int>(cell_gts.size()))
                throw std::out_of_range("assignment index outside cell");
            matched_gt[static_cast<size_t>(pi)] = gi;
        }

        std::vector<PredictorGradient>* cell_grads = nullptr;
        if (grads) {
            grads->emplace_back(cell_preds.size());
            cell_grads = &grads->back();
        }

        for (size_t pi = 0; pi < cell_preds.size(); ++pi) {
            const CellSegment& pred = cell_preds[pi];
            PredictorGradient* grad = cell_grads ? &(*cell_grads)[pi] : nullptr;
            if (grad) grad->labels.assign(pred.label_probs.size(), 0.0);

            double contribution = 0.0;
            const int gi = matched_gt[pi];
            if (gi >= 0) {
                const CellSegment& gt = cell_gts[static_cast<size_t>(gi)];
                if (segment_rep(pred) != segment_rep(gt))
                    throw std::invalid_argument("prediction/ground-truth representation mismatch");

                const auto pg = geometry_values(pred.geometry);
                const auto gg = geometry_values(gt.geometry);
                double d2 = 0.0;
                for (int k = 0; k < 4; ++k) d2 += (pg[k] - gg[k]) * (pg[k] - gg[k]);
                const double dist = std::sqrt(d2);
                acc.geom.add(dist);
                contribution += w.w_geom * dist;
                if (grad && dist > 0.0)
                    for (int k = 0; k < 4; ++k)
                        grad->geom[k] = w.w_geom * (pg[k] - gg[k]) / dist;

                const double cdev = pred.confidence - 1.0;
                acc.conf.add(w.w_conf1 * cdev * cdev);
                contribution += w.w_conf1 * cdev * cdev;
                if (grad) grad->conf = 2.0 * w.w_conf1 * cdev;

                if (pred.label_probs.size() != gt.label_probs.size())
                    throw std::invalid_argument("label distribution size mismatch");
                const int target = gt_label_index(gt);
                double cls_term = 0.0;
                for (size_t c = 0; c < pred.label_probs.size(); ++c) {
                    const double diff =
                        pred.label_probs[c] - (static_cast<int>(c) == target ? 1.0 : 0.0);
                    cls_term += diff * diff;
                    if (grad) grad->labels[c] = 2.0 * w.w_class * diff;
                }
                acc.cls.add(cls_term);
                contribution += w.w_class * cls_term;
            } else {
                const double c = pred.confidence;
                acc.conf.add(w.w_conf0 * c * c);
                contribution += w.w_conf0 * c * c;
                if (grad) grad->conf = 2.0 * w.w_conf0 * c;
            }
            if (per_predictor) per_predictor->push_back(contribution);
        }
    }
}

LossBreakdown finish(const Accum& acc, const LossWeights& w, std::vector<double> per_predictor) {
    LossBreakdown out;
    out.geom = acc.geom.value();
    out.conf = acc.conf.value();
    out.cls = acc.cls.value();
    out.total = w.w_geom * out.geom + out.conf + w.w_class * out.cls;
    out.per_predictor = std::move(per_predictor);
    return out;
}

}  // namespace

LossBreakdown composite_loss(const std::vector<std::vector<CellSegment>>& preds,
                             const std::vector<std::vector<CellSegment>>& gts,
                             const std::vector<Matching>& assignment,
                             const LossWeights& w) {
    Accum acc;
    std::vector<double> per_predictor;
    evaluate(preds, gts, assignment, w, acc, &per_predictor, nullptr);
    return finish(acc, w, std::move(per_predictor));
}

std::vector<std::vector<PredictorGradient>> loss_gradients(
    const std::vector<std::vector<CellSegment>>& preds,
    const std::vector<std::vector<CellSegment>>& gts,
    const std::vector<Matching>& assignment,
    const LossWeights& w,
    LossBreakdown* breakdown) {
    Accum acc;
    std::vector<double> per_predictor;
    std::vector<std::vector<PredictorGradient>> grads;
    grads.reserve(preds.size());
    evaluate(preds, gts, assignment, w, acc, &per_predictor, &grads);
    if (breakdown) *breakdown = finish(acc, w, std::move(per_predictor));
    return grads;
}

}  // namespace gridline
