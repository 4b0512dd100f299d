#include "gridline/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace gridline {

namespace {

constexpr double kPi = 3.14159265358979323846;

Point2 midpoint(const ImageSegment& s) { return (s.s + s.e) * 0.5; }

// undirected angle between two segment directions, in [0, pi/2]
double undirected_angle(const ImageSegment& a, const ImageSegment& b) {
    const Point2 da = a.e - a.s;
    const Point2 db = b.e - b.s;
    const double na = norm(da), nb = norm(db);
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = std::clamp(std::abs(dot(da, db)) / (na * nb), 0.0, 1.0);
    return std::acos(c);
}

// directed turn between consecutive segment directions, in [0, pi]
double turn_angle(const ImageSegment& a, const ImageSegment& b) {
    const Point2 da = a.e - a.s;
    const Point2 db = b.e - b.s;
    const double na = norm(da), nb = norm(db);
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = std::clamp(dot(da, db) / (na * nb), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace

std::vector<ImageSegment> nms(const std::vector<ImageSegment>& segments, const NmsConfig& cfg) {
    if (cfg.position_eps <= 0.0 || cfg.angle_eps <= 0.0 || cfg.angle_eps > kPi)
        throw std::invalid_argument("invalid NMS configuration");

    std::vector<size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return segments[a].confidence > segments[b].confidence;
    });

    std::vector<char> suppressed(segments.size(), 0);
    std::vector<ImageSegment> out;
    for (size_t oi = 0; oi < order.size(); ++oi) {
        const size_t i = order[oi];
        if (suppressed[i]) continue;
        ImageSegment kept = segments[i];

        std::vector<size_t> absorbed;
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            const size_t j = order[oj];
            if (suppressed[j]) continue;
            if (distance(midpoint(kept), midpoint(segments[j])) >= cfg.position_eps) continue;
            if (undirected_angle(kept, segments[j]) >= cfg.angle_eps) continue;
            suppressed[j] = 1;
            absorbed.push_back(j);
        }

        if (cfg.mode == NmsMode::ConfidenceWeightedAverage && !absorbed.empty()) {
            // average in midpoint/direction form, flipping anti-parallel
            // members onto the survivor's orientation first
            const Point2 ref_dir = kept.e - kept.s;
            double wsum = kept.confidence;
            Point2 m = midpoint(kept) * kept.confidence;
            Point2 d = ref_dir * kept.confidence;
            double csum = kept.confidence * kept.confidence;
            for (size_t j : absorbed) {
                const ImageSegment& s = segments[j];
                Point2 dj = s.e - s.s;
                if (dot(dj, ref_dir) < 0.0) dj = dj * -1.0;
                m = m + midpoint(s) * s.confidence;
                d = d + dj * s.confidence;
                csum += s.confidence * s.confidence;
                wsum += s.confidence;
            }
            if (wsum > 0.0) {
                m = m * (1.0 / wsum);
                d = d * (1.0 / wsum);
                kept.s = m - d * 0.5;
                kept.e = m + d * 0.5;
                kept.confidence = csum / wsum;  // confidence-weighted mean of confidences
            }
        }
        out.push_back(kept);
    }
    return out;
}

std::vector<Polyline> stitch(const std::vector<ImageSegment>& segments, const StitchConfig& cfg) {
    if (cfg.join_eps <= 0.0 || cfg.angle_eps <= 0.0)
        throw std::invalid_argument("invalid stitch configuration");

    const size_t n = segments.size();
    // successors[i]: candidate continuations sorted by (turn, index)
    std::vector<std::vector<size_t>> successors(n);
    std::vector<char> has_predecessor(n, 0);
    for (size_t i = 0; i < n; ++i) {
        struct Cand { double turn; size_t j; };
        std::vector<Cand> cands;
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (distance(segments[i].e, segments[j].s) >= cfg.join_eps) continue;
            const double turn = turn_angle(segments[i], segments[j]);
            if (turn >= cfg.angle_eps) continue;
            cands.push_back({turn, j});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.turn != b.turn) return a.turn < b.turn;
            return a.j < b.j;
        });
        for (const Cand& c : cands) {
            successors[i].push_back(c.j);
            has_predecessor[c.j] = 1;
        }
    }

    std::vector<char> used(n, 0);
    std::vector<Polyline> out;
    auto walk = [&](size_t start) {
        std::vector<size_t> chain{start};
        used[start] = 1;
        size_t cur = start;
        while (true) {
            size_t next = n;
            for (size_t cand : successors[cur]) {
                if (!used[cand]) { next = cand; break; }
            }
            if (next == n) break;
            used[next] = 1;
            chain.push_back(next);
            cur = next;
        }

        Polyline p;
        std::map<int, int> label_votes;
        for (size_t idx : chain) {
            const ImageSegment& s = segments[idx];
            if (p.points.empty() || distance(p.points.back(), s.s) > 1e-9) p.points.push_back(s.s);
            p.points.push_back(s.e);
            if (s.label) ++label_votes[*s.label];
        }
        if (!label_votes.empty()) {
            int best_label = label_votes.begin()->first;
            int best_count = label_votes.begin()->second;
            for (const auto& [label, count] : label_votes)
                if (count > best_count) { best_label = label; best_count = count; }
            p.label = best_label;
        }
        if (p.points.size() >= 2) out.push_back(std::move(p));
    };

    // chains start at segments no other segment continues into
    for (size_t i = 0; i < n; ++i)
        if (!used[i] && !has_predecessor[i]) walk(i);
    // leftovers (cycles, or mid-chain segments claimed by a better head)
    for (size_t i = 0; i < n; ++i)
        if (!used[i]) walk(i);
    return out;
}

}  // namespace gridline
