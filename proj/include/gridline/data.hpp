#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridline/geom.hpp"

namespace gridline {

/// Row-major 8-bit grayscale image.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
    uint8_t& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
};

/// Knobs for the synthetic scene generator. Count ranges are inclusive.
struct SceneConfig {
    int width = 64;
    int height = 64;
    int min_lines = 1, max_lines = 2;
    int min_curves = 0, max_curves = 1;
    int min_crossings = 0, max_crossings = 0;
    int min_merges = 0, max_merges = 0;
    int num_labels = 2;        // lines/crossings/merges get label 0, curves label 1
    double stroke = 2.0;       // px
    uint8_t background = 0;
    uint8_t foreground = 255;
    uint64_t seed = 1;
};

struct Scene {
    Raster raster;
    std::vector<Polyline> truth;
};

/// Deterministic affine map p -> linear * p + offset with positive
/// determinant (no mirroring).
struct Affine {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // row-major linear part
    double tu = 0.0, tv = 0.0;

    Point2 apply(Point2 p) const { return {a * p.u + b * p.v + tu, c * p.u + d * p.v + tv}; }
};

Affine affine_identity();
Affine affine_rotation_about(double radians, Point2 center);
Affine affine_compose(const Affine& outer, const Affine& inner);
Affine affine_invert(const Affine& m);

/// Generate n scenes; scene i depends only on (cfg.seed, i).
std::vector<Scene> generate(const SceneConfig& cfg, int n);

/// Draw polylines with the given stroke width (pixels whose center lies
/// within stroke/2 of a segment are set to the foreground value).
Raster rasterize(const std::vector<Polyline>& truth, int width, int height, double stroke,
                 uint8_t background, uint8_t foreground);

/// Apply an affine map to raster (nearest-neighbour resampling) and truth
/// consistently; truth polylines are clipped to the image rectangle (possibly
/// splitting them). Source pixels outside the image read as background.
Scene transform_scene(const Scene& scene, const Affine& m, uint8_t background = 0);

/// Random rotation (max +-15 degrees) and crop-with-resize, never mirrored.
Scene augment(const Scene& scene, uint64_t seed, uint8_t background = 0);

/// Clip a polyline to [0,w]x[0,h]; exiting and re-entering splits the chain.
std::vector<Polyline> clip_polyline(const Polyline& p, double w, double h);

// --- File formats -----------------------------------------------------------

void save_pgm(const std::string& path, const Raster& r);
Raster load_pgm(const std::string& path);

/// One JSON object per line:
/// {"image":{"w":..,"h":..},"polylines":[{"label":..,"points":[[u,v],..],"confidence":..}]}
/// label and confidence are optional per polyline.
struct Annotation {
    int width = 0;
    int height = 0;
    std::vector<Polyline> polylines;
    std::vector<double> confidences;  // parallel to polylines, 1.0 when absent
};

std::string annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const std::string& line, size_t line_number = 0);
void save_annotations(const std::string& path, const std::vector<Annotation>& all);
std::vector<Annotation> load_annotations(const std::string& path);

/// Dataset manifest: annotation file plus (raster path, annotation line) pairs.
struct DatasetManifest {
    std::string annotations;
    std::vector<std::pair<std::string, int>> entries;
};

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

/// Write text atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace gridline
