#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gridline {

struct Point2 {
    double u = 0.0;
    double v = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.u + b.u, a.v + b.v}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.u - b.u, a.v - b.v}; }
inline Point2 operator*(Point2 a, double s) { return {a.u * s, a.v * s}; }
inline double dot(Point2 a, Point2 b) { return a.u * b.u + a.v * b.v; }
inline double norm(Point2 a) { return std::hypot(a.u, a.v); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// Ordered image-space vertices; the order encodes travel direction.
struct Polyline {
    std::vector<Point2> points;
    std::optional<int> label;
};

/// The cell lattice over an image. Image width is cols*cell_size pixels,
/// height is rows*cell_size pixels.
struct Grid {
    int rows = 1;
    int cols = 1;
    int cell_size = 32;

    int width() const { return cols * cell_size; }
    int height() const { return rows * cell_size; }
};

/// Line segment as an ordered start/end point pair in cell-normalized
/// coordinates (origin at the upper left corner of the cell, side length 1).
struct SegmentCart {
    Point2 s;
    Point2 e;
};

/// Line segment as midpoint plus full displacement d = e - s, both in cell
/// units. m lives in [0,1]^2, d in [-1,1]^2 for segments inside the cell.
struct SegmentMR {
    Point2 m;
    Point2 d;
};

enum class LineRep { Cart, MR };

using SegmentGeometry = std::variant<SegmentCart, SegmentMR>;

/// One cell-local line hypothesis: geometry + label distribution + confidence.
/// label_probs is empty when the pipeline runs without classification.
struct CellSegment {
    SegmentGeometry geometry;
    std::vector<double> label_probs;
    double confidence = 1.0;
    int row = 0;
    int col = 0;
};

/// Segment in image pixel coordinates, as produced by cell_to_image / predict.
struct ImageSegment {
    Point2 s;
    Point2 e;
    std::optional<int> label;
    double confidence = 1.0;
};

/// Distance spaces used for matching and anchor clustering.
enum class FeatureSpace { Cart, MR, MP, Dir };

int feature_dimension(FeatureSpace space);
std::string to_string(FeatureSpace space);
FeatureSpace feature_space_from_string(const std::string& name);

// --- Representation conversions -------------------------------------------

SegmentMR cart_to_mr(const SegmentCart& c);

/// Inverse of cart_to_mr. Endpoints m +- d/2 must lie in [0,1]^2 within tol;
/// values inside the tolerance band are clamped, anything further throws.
SegmentCart mr_to_cart(const SegmentMR& r, double tol = 1e-9);

LineRep segment_rep(const CellSegment& seg);

/// Raw geometry values: (s.u, s.v, e.u, e.v) for Cart, (m.u, m.v, d.u, d.v)
/// for MR.
std::array<double, 4> geometry_values(const SegmentGeometry& g);
SegmentGeometry geometry_from_values(LineRep rep, const std::array<double, 4>& v);

/// Convert a segment to the requested representation. Purely algebraic, no
/// range validation (predictions may legitimately fall outside the cell box).
SegmentGeometry convert_geometry(const SegmentGeometry& g, LineRep rep);
CellSegment with_representation(const CellSegment& seg, LineRep rep);

/// Coordinates of a segment in the given feature space. Writes
/// feature_dimension(space) values into out, returns the dimension.
int feature_vector(const SegmentGeometry& g, FeatureSpace space, std::array<double, 4>& out);

/// Euclidean distance between two segments in the given feature space.
double segment_distance(const SegmentGeometry& a, const SegmentGeometry& b, FeatureSpace space);
double segment_distance(const CellSegment& a, const CellSegment& b, FeatureSpace space);

// --- Grid operations --------------------------------------------------------

/// Cut a polyline at cell borders into cell-local segments (confidence 1,
/// one-hot label over num_classes categories when num_classes > 0).
/// Throws std::out_of_range when the polyline leaves the image and
/// std::invalid_argument for degenerate input.
std::vector<CellSegment> split_polyline(const Polyline& p, const Grid& g, int num_classes = 0);

/// Collapse consecutive same-cell segments of one split polyline into their
/// chord while the turn between neighbours stays below max_turn (radians).
/// Smooth curves cross a cell as several short pieces after splitting; for
/// training and evaluation those pieces are one hypothesis, not many.
std::vector<CellSegment> merge_collinear_chain(const std::vector<CellSegment>& chain,
                                               double max_turn);

/// Map a cell-local segment back to image pixel coordinates.
ImageSegment cell_to_image(const CellSegment& seg, const Grid& g);

/// Inverse of cell_to_image for a segment known to live in one cell; the cell
/// is taken from the segment midpoint (half-open cells).
CellSegment image_to_cell(const ImageSegment& seg, const Grid& g, LineRep rep, int num_classes = 0);

}  // namespace gridline
