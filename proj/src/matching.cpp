#include "gridline/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridline {

namespace {

// O(n^3) Hungarian method with row/column potentials on an n x n matrix.
// Returns the matched column per row. a is row-major.
std::vector<int> solve_square(const std::vector<double>& a, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, n), way(n + 1, n);  // p[col] = matched row, n = free
    for (int i = 0; i < n; ++i) {
        p[n] = i;
        int j0 = n;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = a[static_cast<size_t>(i0) * n + j] - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<int> match(n, -1);
    for (int j = 0; j < n; ++j)
        if (p[j] != n) match[p[j]] = j;
    return match;
}

// Minimum assignment cost of a rectangular matrix restricted to the given
// row/col subsets (counted on the smaller side).
double min_cost(const CostMatrix& c, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int nr = static_cast<int>(rows.size());
    const int nc = static_cast<int>(cols.size());
    if (nr == 0 || nc == 0) return 0.0;
    const int n = std::max(nr, nc);
    double max_entry = 0.0;
    for (int r : rows)
        for (int cidx : cols) max_entry = std::max(max_entry, c.at(r, cidx));
    const double pad = 2.0 * max_entry;
    std::vector<double> sq(static_cast<size_t>(n) * n, pad);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) sq[static_cast<size_t>(i) * n + j] = c.at(rows[i], cols[j]);
    const auto match = solve_square(sq, n);
    double cost = 0.0;
    for (int i = 0; i < nr; ++i)
        if (match[i] >= 0 && match[i] < nc) cost += c.at(rows[i], cols[match[i]]);
    return cost;
}

}  // namespace

Matching hungarian(const CostMatrix& c) {
    for (double e : c.entries)
        if (!std::isfinite(e)) throw std::invalid_argument("cost matrix entry is not finite");

    Matching m;
    if (c.rows == 0 || c.cols == 0) return m;

    std::vector<int> all_rows(c.rows), all_cols(c.cols);
    for (int i = 0; i < c.rows; ++i) all_rows[i] = i;
    for (int j = 0; j < c.cols; ++j) all_cols[j] = j;
    const double target = min_cost(c, all_rows, all_cols);
    const double tol = 1e-9 * (1.0 + std::abs(target));
    const int want = std::min(c.rows, c.cols);

    // Fix pairs in lexicographic order, keeping only choices that still reach
    // the optimal total. This pins the result whenever several optima exist.
    std::vector<int> free_cols = all_cols;
    double fixed_cost = 0.0;
    for (int r = 0; r < c.rows && static_cast<int>(m.pairs.size()) < want; ++r) {
        const int remaining_rows = c.rows - r - 1;
        const int still_needed = want - static_cast<int>(m.pairs.size());
        std::vector<int> rest_rows;
        for (int rr = r + 1; rr < c.rows; ++rr) rest_rows.push_back(rr);

        bool fixed = false;
        for (size_t k = 0; k < free_cols.size(); ++k) {
            const int col = free_cols[k];
            std::vector<int> rest_cols;
            for (size_t k2 = 0; k2 < free_cols.size(); ++k2)
                if (k2 != k) rest_cols.push_back(free_cols[k2]);
            const double completion = min_cost(c, rest_rows, rest_cols);
            if (fixed_cost + c.at(r, col) + completion <= target + tol) {
                m.pairs.emplace_back(r, col);
                fixed_cost += c.at(r, col);
                free_cols.erase(free_cols.begin() + static_cast<long>(k));
                fixed = true;
                break;
            }
        }
        if (!fixed && remaining_rows < still_needed)
            throw std::logic_error("hungarian: failed to complete optimal matching");
    }

    m.total_cost = 0.0;
    for (const auto& [r, col] : m.pairs) m.total_cost += c.at(r, col);
    return m;
}

Matching dynamic_assign(const std::vector<CellSegment>& preds,
                        const std::vector<CellSegment>& gts) {
    if (gts.empty() || preds.empty()) return {};
    const LineRep rep = segment_rep(preds.front());
    for (const auto& s : preds)
        if (segment_rep(s) != rep) throw std::invalid_argument("mixed representations in predictions");
    for (const auto& s : gts)
        if (segment_rep(s) != rep) throw std::invalid_argument("prediction/ground-truth representation mismatch");

    const FeatureSpace space = rep == LineRep::Cart ? FeatureSpace::Cart : FeatureSpace::MR;
    CostMatrix c(static_cast<int>(preds.size()), static_cast<int>(gts.size()));
    for (size_t i = 0; i < preds.size(); ++i)
        for (size_t j = 0; j < gts.size(); ++j)
            c.at(static_cast<int>(i), static_cast<int>(j)) = segment_distance(preds[i], gts[j], space);
    return hungarian(c);
}

}  // namespace gridline
