#include "gridline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridline/matching.hpp"

namespace gridline {

void ClassifyResult::merge(const ClassifyResult& other) {
    counts.tp += other.counts.tp;
    counts.fp += other.counts.fp;
    counts.tn += other.counts.tn;
    counts.fn += other.counts.fn;
    tp_pairs.insert(tp_pairs.end(), other.tp_pairs.begin(), other.tp_pairs.end());
    conf_dev_sum += other.conf_dev_sum;
    predictors += other.predictors;
}

ClassifyResult classify_outcomes(const std::vector<std::vector<CellSegment>>& preds,
                                 const std::vector<std::vector<CellSegment>>& gts,
                                 const Grid& grid, AssignMode mode, const AnchorSet* anchors,
                                 double threshold) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("prediction and ground-truth cell counts differ");
    if (mode == AssignMode::Anchors && !anchors)
        throw std::invalid_argument("anchor mode requires an anchor set");

    ClassifyResult out;
    for (size_t ci = 0; ci < preds.size(); ++ci) {
        const auto& cell_preds = preds[ci];
        const auto& cell_gts = gts[ci];

        std::vector<int> matched_gt(cell_preds.size(), -1);
        if (!cell_gts.empty()) {
            if (mode == AssignMode::Dynamic) {
                for (const auto& [pi, gi] : dynamic_assign(cell_preds, cell_gts).pairs)
                    matched_gt[static_cast<size_t>(pi)] = gi;
            } else {
                for (const auto& [ai, gi] : assign_to_anchors(cell_gts, *anchors).assigned)
                    if (ai < static_cast<int>(cell_preds.size()))
                        matched_gt[static_cast<size_t>(ai)] = gi;
            }
        }

        for (size_t pi = 0; pi < cell_preds.size(); ++pi) {
            const CellSegment& pred = cell_preds[pi];
            const bool assigned = matched_gt[pi] >= 0;
            const bool positive = pred.confidence > threshold;
            out.conf_dev_sum += assigned ? std::abs(pred.confidence - 1.0)
                                         : std::abs(pred.confidence);
            ++out.predictors;
            if (assigned && positive) {
                ++out.counts.tp;
                out.tp_pairs.push_back(
                    {cell_to_image(pred, grid),
                     cell_to_image(cell_gts[static_cast<size_t>(matched_gt[pi])], grid)});
            } else if (assigned) {
                ++out.counts.fn;
            } else if (positive) {
                ++out.counts.fp;
            } else {
                ++out.counts.tn;
            }
        }
    }
    return out;
}

RetrievalMetrics retrieval_metrics(const OutcomeCounts& c) {
    RetrievalMetrics m;
    const double tp = static_cast<double>(c.tp);
    m.recall = (c.tp + c.fn) > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
    m.precision = (c.tp + c.fp) > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = c.total() > 0 ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total())
                               : 0.0;
    return m;
}

MaeColumns mae_metrics(const ClassifyResult& r) {
    MaeColumns out;
    out.cf = r.predictors > 0 ? r.conf_dev_sum / static_cast<double>(r.predictors) : 0.0;
    if (r.tp_pairs.empty()) return out;

    double cart = 0.0, mp = 0.0, len = 0.0, cf_tp = 0.0;
    for (const auto& pair : r.tp_pairs) {
        cart += 0.5 * (distance(pair.pred.s, pair.gt.s) + distance(pair.pred.e, pair.gt.e));
        mp += distance((pair.pred.s + pair.pred.e) * 0.5, (pair.gt.s + pair.gt.e) * 0.5);
        len += std::abs(distance(pair.pred.s, pair.pred.e) - distance(pair.gt.s, pair.gt.e));
        cf_tp += std::abs(pair.pred.confidence - 1.0);
    }
    const double n = static_cast<double>(r.tp_pairs.size());
    out.cart = cart / n;
    out.mp = mp / n;
    out.len = len / n;
    out.cf_tp = cf_tp / n;
    return out;
}

std::vector<GatePoint> gate_sweep(const std::vector<std::vector<ImageSegment>>& preds_per_image,
                                  const std::vector<std::vector<ImageSegment>>& gts_per_image,
                                  const std::vector<double>& radii, double threshold) {
    if (preds_per_image.size() != gts_per_image.size())
        throw std::invalid_argument("prediction and ground-truth image counts differ");

    struct Candidate {
        double dist;
        size_t image, pred, gt;
    };
    std::vector<Candidate> candidates;
    std::vector<std::vector<size_t>> positives(preds_per_image.size());
    size_t total_positive = 0, total_gts = 0;
    for (size_t im = 0; im < preds_per_image.size(); ++im) {
        total_gts += gts_per_image[im].size();
        for (size_t pi = 0; pi < preds_per_image[im].size(); ++pi) {
            if (preds_per_image[im][pi].confidence > threshold) {
                positives[im].push_back(pi);
                ++total_positive;
            }
        }
        for (size_t pi : positives[im]) {
            const ImageSegment& p = preds_per_image[im][pi];
            const Point2 pm = (p.s + p.e) * 0.5;
            for (size_t gi = 0; gi < gts_per_image[im].size(); ++gi) {
                const ImageSegment& g = gts_per_image[im][gi];
                candidates.push_back({distance(pm, (g.s + g.e) * 0.5), im, pi, gi});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.image != b.image) return a.image < b.image;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gt < b.gt;
    });

    std::vector<double> sorted_radii = radii;
    std::sort(sorted_radii.begin(), sorted_radii.end());

    std::vector<GatePoint> curve;
    for (double radius : sorted_radii) {
        // greedy nearest-first matching under the gate; re-run per radius so
        // each point is self-contained
        std::vector<std::vector<char>> matched_pred(preds_per_image.size());
        std::vector<std::vector<char>> gt_used(gts_per_image.size());
        for (size_t im = 0; im < preds_per_image.size(); ++im) {
            matched_pred[im].assign(preds_per_image[im].size(), 0);
            gt_used[im].assign(gts_per_image[im].size(), 0);
        }

        GatePoint point;
        point.radius = radius;
        long tp = 0;
        double mp_sum = 0.0, len_sum = 0.0, cftp_sum = 0.0;
        for (const Candidate& c : candidates) {
            if (c.dist > radius) break;
            if (matched_pred[c.image][c.pred] || gt_used[c.image][c.gt]) continue;
            matched_pred[c.image][c.pred] = 1;
            gt_used[c.image][c.gt] = 1;
            ++tp;
            const ImageSegment& p = preds_per_image[c.image][c.pred];
            const ImageSegment& g = gts_per_image[c.image][c.gt];
            mp_sum += c.dist;
            len_sum += std::abs(distance(p.s, p.e) - distance(g.s, g.e));
            cftp_sum += std::abs(p.confidence - 1.0);
        }

        const long fp = static_cast<long>(total_positive) - tp;
        const long fn = static_cast<long>(total_gts) - tp;
        point.f1 = (2 * tp + fp + fn) > 0
                       ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn)
                       : 0.0;

        double cf_sum = 0.0;
        long cf_count = 0;
        for (size_t im = 0; im < preds_per_image.size(); ++im) {
            for (size_t pi = 0; pi < preds_per_image[im].size(); ++pi) {
                const double conf = preds_per_image[im][pi].confidence;
                cf_sum += matched_pred[im][pi] ? std::abs(conf - 1.0) : std::abs(conf);
                ++cf_count;
            }
        }
        point.cf = cf_count > 0 ? cf_sum / static_cast<double>(cf_count) : 0.0;
        if (tp > 0) {
            point.cf_tp = cftp_sum / static_cast<double>(tp);
            point.mae_mp = mp_sum / static_cast<double>(tp);
            point.mae_len = len_sum / static_cast<double>(tp);
        }
        curve.push_back(point);
    }
    return curve;
}

std::string metrics_report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["f1"] = r.retrieval.f1;
    j["recall"] = r.retrieval.recall;
    j["precision"] = r.retrieval.precision;
    j["accuracy"] = r.retrieval.accuracy;
    j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
    j["cf"] = r.mae.cf;
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    j["cf_tp"] = opt(r.mae.cf_tp);
    j["mae_cart"] = opt(r.mae.cart);
    j["mae_mp"] = opt(r.mae.mp);
    j["mae_len"] = opt(r.mae.len);
    j["ma"] = r.ma;
    if (!r.gate_curve.empty()) {
        auto& arr = j["gate_curve"] = nlohmann::json::array();
        for (const GatePoint& p : r.gate_curve) {
            arr.push_back({{"radius", p.radius},
                           {"f1", p.f1},
                           {"cf", p.cf},
                           {"cf_tp", opt(p.cf_tp)},
                           {"mae_mp", opt(p.mae_mp)},
                           {"mae_len", opt(p.mae_len)}});
        }
    }
    return j.dump(2);
}

std::string metrics_report_table(const MetricsReport& r) {
    std::ostringstream out;
    auto cell = [&](const std::string& s) { out << std::setw(8) << s; };
    auto num = [&](double v, int prec = 2) {
        std::ostringstream tmp;
        tmp << std::fixed << std::setprecision(prec) << v;
        cell(tmp.str());
    };
    auto opt = [&](const std::optional<double>& v, int prec = 2) {
        if (v) num(*v, prec);
        else cell("-");
    };
    for (const char* h : {"F1", "Re", "Pr", "Acc", "Cf", "CfTP", "||.||", "MP", "L", "MA"})
        cell(h);
    out << "\n";
    num(r.retrieval.f1);
    num(r.retrieval.recall);
    num(r.retrieval.precision);
    num(r.retrieval.accuracy);
    num(r.mae.cf);
    opt(r.mae.cf_tp);
    opt(r.mae.cart);
    opt(r.mae.mp);
    opt(r.mae.len);
    num(r.ma);
    out << "\n";
    return out.str();
}

std::string gate_curve_csv(const std::vector<GatePoint>& curve) {
    std::ostringstream out;
    out << "radius,f1,cf,cf_tp,mae_mp,mae_len\n";
    for (const GatePoint& p : curve) {
        out << p.radius << "," << p.f1 << "," << p.cf << ",";
        auto opt = [&](const std::optional<double>& v) {
            if (v) out << *v;
        };
        opt(p.cf_tp);
        out << ",";
        opt(p.mae_mp);
        out << ",";
        opt(p.mae_len);
        out << "\n";
    }
    return out.str();
}

}  // namespace gridline
