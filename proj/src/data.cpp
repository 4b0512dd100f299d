#include "gridline/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridline/rng.hpp"

namespace gridline {

namespace {

constexpr double kPi = 3.14159265358979323846;

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * t);
}

Point2 random_point(Rng& rng, double w, double h, double margin) {
    return {rng.uniform(margin, w - margin), rng.uniform(margin, h - margin)};
}

double scene_margin(double w, double h) { return std::min(3.0, 0.1 * std::min(w, h)); }

Polyline make_line(Rng& rng, double w, double h, int label) {
    const double margin = scene_margin(w, h);
    double min_len = 0.4 * std::min(w, h);
    Point2 a = random_point(rng, w, h, margin);
    Point2 b = random_point(rng, w, h, margin);
    for (int attempt = 0; distance(a, b) < min_len; ++attempt) {
        b = random_point(rng, w, h, margin);
        if (attempt > 0 && attempt % 64 == 0) min_len *= 0.5;  // tiny images
    }
    return {{a, b}, label};
}

// quadratic Bezier sampled roughly every 4 px of arc
Polyline make_curve(Rng& rng, double w, double h, int label) {
    const double margin = scene_margin(w, h);
    const Point2 p0 = random_point(rng, w, h, margin);
    const Point2 p2 = random_point(rng, w, h, margin);
    const Point2 p1 = random_point(rng, w, h, margin);
    auto eval = [&](double t) {
        const double s = 1.0 - t;
        return p0 * (s * s) + p1 * (2.0 * s * t) + p2 * (t * t);
    };
    double arc = 0.0;
    Point2 prev = p0;
    const int fine = 200;
    for (int i = 1; i <= fine; ++i) {
        const Point2 cur = eval(static_cast<double>(i) / fine);
        arc += distance(prev, cur);
        prev = cur;
    }
    Polyline out;
    out.label = label;
    out.points.push_back(p0);
    double next_mark = 4.0;
    double walked = 0.0;
    prev = p0;
    for (int i = 1; i <= fine; ++i) {
        const Point2 cur = eval(static_cast<double>(i) / fine);
        walked += distance(prev, cur);
        prev = cur;
        if (walked >= next_mark) {
            out.points.push_back(cur);
            next_mark += 4.0;
        }
    }
    if (distance(out.points.back(), p2) > 1e-9) out.points.push_back(p2);
    if (out.points.size() < 2 || arc < 8.0) return make_line(rng, w, h, label);
    return out;
}

// two straight lines meeting inside the image
std::vector<Polyline> make_crossing(Rng& rng, double w, double h, int label) {
    const double margin = scene_margin(w, h);
    const Point2 x = random_point(rng, w, h, w * 0.25);
    std::vector<Polyline> out;
    double base = rng.uniform(0.0, kPi);
    for (int i = 0; i < 2; ++i) {
        const double angle = base + (i == 0 ? 0.0 : rng.uniform(kPi / 4.0, 3.0 * kPi / 4.0));
        const Point2 dir{std::cos(angle), std::sin(angle)};
        // extend to the image border on both sides, then pull in by the margin
        double t_min = 0.0, t_max = 0.0;
        for (double sgn : {-1.0, 1.0}) {
            double t = 1e18;
            if (dir.u * sgn > 1e-12) t = std::min(t, (w - margin - x.u) / (dir.u * sgn));
            if (dir.u * sgn < -1e-12) t = std::min(t, (margin - x.u) / (dir.u * sgn));
            if (dir.v * sgn > 1e-12) t = std::min(t, (h - margin - x.v) / (dir.v * sgn));
            if (dir.v * sgn < -1e-12) t = std::min(t, (margin - x.v) / (dir.v * sgn));
            if (t > 1e17) t = 0.0;
            (sgn < 0 ? t_min : t_max) = t;
        }
        const Point2 a = x - dir * t_min;
        const Point2 b = x + dir * t_max;
        if (distance(a, b) < 8.0) continue;
        out.push_back({{a, b}, label});
    }
    return out;
}

// Give every polyline a pixel-visible travel direction (left to right, ties
// downward). Without a convention the direction sign cannot be inferred from
// the raster and segment direction becomes untrainable.
void canonicalize_direction(Polyline& p) {
    const Point2 d = p.points.back() - p.points.front();
    if (d.u < 0.0 || (d.u == 0.0 && d.v < 0.0))
        std::reverse(p.points.begin(), p.points.end());
}

// branches sharing a terminal vertex
std::vector<Polyline> make_merge(Rng& rng, double w, double h, int label) {
    const double margin = scene_margin(w, h);
    const Point2 m = random_point(rng, w, h, w * 0.3);
    std::vector<Polyline> out;
    const int branches = static_cast<int>(rng.uniform_int(2, 3));
    for (int i = 0; i < branches; ++i) {
        Point2 src = random_point(rng, w, h, margin);
        double min_len = 0.3 * std::min(w, h);
        for (int attempt = 0; distance(src, m) < min_len; ++attempt) {
            src = random_point(rng, w, h, margin);
            if (attempt > 0 && attempt % 64 == 0) min_len *= 0.5;
        }
        out.push_back({{src, m}, label});
    }
    return out;
}

}  // namespace

Affine affine_identity() { return {}; }

Affine affine_rotation_about(double radians, Point2 center) {
    const double cs = std::cos(radians), sn = std::sin(radians);
    Affine m;
    m.a = cs; m.b = -sn; m.c = sn; m.d = cs;
    m.tu = center.u - (cs * center.u - sn * center.v);
    m.tv = center.v - (sn * center.u + cs * center.v);
    return m;
}

Affine affine_compose(const Affine& o, const Affine& i) {
    Affine m;
    m.a = o.a * i.a + o.b * i.c;
    m.b = o.a * i.b + o.b * i.d;
    m.c = o.c * i.a + o.d * i.c;
    m.d = o.c * i.b + o.d * i.d;
    m.tu = o.a * i.tu + o.b * i.tv + o.tu;
    m.tv = o.c * i.tu + o.d * i.tv + o.tv;
    return m;
}

Affine affine_invert(const Affine& m) {
    const double det = m.a * m.d - m.b * m.c;
    if (std::abs(det) < 1e-12) throw std::invalid_argument("affine map is singular");
    Affine inv;
    inv.a = m.d / det;
    inv.b = -m.b / det;
    inv.c = -m.c / det;
    inv.d = m.a / det;
    inv.tu = -(inv.a * m.tu + inv.b * m.tv);
    inv.tv = -(inv.c * m.tu + inv.d * m.tv);
    return inv;
}

std::vector<Scene> generate(const SceneConfig& cfg, int n) {
    if (cfg.width < 4 || cfg.height < 4) throw std::invalid_argument("image too small");
    if (cfg.stroke <= 0 || cfg.stroke >= std::min(cfg.width, cfg.height))
        throw std::invalid_argument("stroke must be positive and narrower than the image");
    if (cfg.min_lines > cfg.max_lines || cfg.min_curves > cfg.max_curves ||
        cfg.min_crossings > cfg.max_crossings || cfg.min_merges > cfg.max_merges)
        throw std::invalid_argument("count range is inverted");
    if (n < 0) throw std::invalid_argument("negative scene count");

    const double w = cfg.width, h = cfg.height;
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(i)));
        Scene scene;
        const int lines = static_cast<int>(rng.uniform_int(cfg.min_lines, cfg.max_lines));
        const int curves = static_cast<int>(rng.uniform_int(cfg.min_curves, cfg.max_curves));
        const int crossings = static_cast<int>(rng.uniform_int(cfg.min_crossings, cfg.max_crossings));
        const int merges = static_cast<int>(rng.uniform_int(cfg.min_merges, cfg.max_merges));
        const int straight_label = 0;
        const int curve_label = cfg.num_labels > 1 ? 1 : 0;
        for (int k = 0; k < lines; ++k) scene.truth.push_back(make_line(rng, w, h, straight_label));
        for (int k = 0; k < curves; ++k) scene.truth.push_back(make_curve(rng, w, h, curve_label));
        for (int k = 0; k < crossings; ++k) {
            auto pair = make_crossing(rng, w, h, straight_label);
            scene.truth.insert(scene.truth.end(), pair.begin(), pair.end());
        }
        for (int k = 0; k < merges; ++k) {
            auto branches = make_merge(rng, w, h, straight_label);
            scene.truth.insert(scene.truth.end(), branches.begin(), branches.end());
        }
        for (Polyline& p : scene.truth) canonicalize_direction(p);
        scene.raster = rasterize(scene.truth, cfg.width, cfg.height, cfg.stroke, cfg.background,
                                 cfg.foreground);
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

Raster rasterize(const std::vector<Polyline>& truth, int width, int height, double stroke,
                 uint8_t background, uint8_t foreground) {
    Raster r;
    r.width = width;
    r.height = height;
    r.pixels.assign(static_cast<size_t>(width) * height, background);
    const double radius = stroke * 0.5;
    for (const Polyline& p : truth) {
        for (size_t i = 0; i + 1 < p.points.size(); ++i) {
            const Point2 a = p.points[i];
            const Point2 b = p.points[i + 1];
            const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.u, b.u) - radius)) - 1);
            const int c1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.u, b.u) + radius)) + 1);
            const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.v, b.v) - radius)) - 1);
            const int r1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.v, b.v) + radius)) + 1);
            for (int row = r0; row <= r1; ++row) {
                for (int col = c0; col <= c1; ++col) {
                    const Point2 center{col + 0.5, row + 0.5};
                    if (point_segment_distance(center, a, b) <= radius)
                        r.at(row, col) = foreground;
                }
            }
        }
    }
    return r;
}

std::vector<Polyline> clip_polyline(const Polyline& p, double w, double h) {
    std::vector<Polyline> out;
    Polyline current;
    current.label = p.label;

    auto inside = [&](Point2 q) { return q.u >= 0 && q.u <= w && q.v >= 0 && q.v <= h; };
    auto flush = [&]() {
        // drop chains that collapsed to (near) nothing
        if (current.points.size() >= 2) {
            double len = 0.0;
            for (size_t i = 0; i + 1 < current.points.size(); ++i)
                len += distance(current.points[i], current.points[i + 1]);
            if (len > 1e-6) out.push_back(current);
        }
        current.points.clear();
    };
    auto push = [&](Point2 q) {
        if (current.points.empty() || distance(current.points.back(), q) > 1e-9)
            current.points.push_back(q);
    };

    for (size_t i = 0; i + 1 < p.points.size(); ++i) {
        const Point2 a = p.points[i];
        const Point2 b = p.points[i + 1];
        // Liang-Barsky parameter window of the inside piece
        double t0 = 0.0, t1 = 1.0;
        const double du = b.u - a.u, dv = b.v - a.v;
        const double pq[4][2] = {{-du, a.u - 0.0}, {du, w - a.u}, {-dv, a.v - 0.0}, {dv, h - a.v}};
        bool reject = false;
        for (const auto& [pp, qq] : pq) {
            if (pp == 0.0) {
                if (qq < 0.0) { reject = true; break; }
            } else {
                const double t = qq / pp;
                if (pp < 0.0) t0 = std::max(t0, t);
                else t1 = std::min(t1, t);
            }
        }
        if (reject || t0 > t1) {
            flush();
            continue;
        }
        const Point2 qa = inside(a) && t0 == 0.0 ? a : a + Point2{du, dv} * t0;
        const Point2 qb = inside(b) && t1 == 1.0 ? b : a + Point2{du, dv} * t1;
        if (t0 > 0.0) flush();
        push(qa);
        push(qb);
        if (t1 < 1.0) flush();
    }
    flush();
    return out;
}

Scene transform_scene(const Scene& scene, const Affine& m, uint8_t background) {
    const double det = m.a * m.d - m.b * m.c;
    if (det <= 0.0) throw std::invalid_argument("transform would mirror the scene");

    Scene out;
    out.raster.width = scene.raster.width;
    out.raster.height = scene.raster.height;
    out.raster.pixels.assign(scene.raster.pixels.size(), background);
    const Affine inv = affine_invert(m);
    for (int row = 0; row < out.raster.height; ++row) {
        for (int col = 0; col < out.raster.width; ++col) {
            const Point2 src = inv.apply({col + 0.5, row + 0.5});
            const int sc = static_cast<int>(std::floor(src.u));
            const int sr = static_cast<int>(std::floor(src.v));
            if (sc >= 0 && sc < scene.raster.width && sr >= 0 && sr < scene.raster.height)
                out.raster.at(row, col) = scene.raster.at(sr, sc);
        }
    }
    for (const Polyline& p : scene.truth) {
        Polyline moved;
        moved.label = p.label;
        moved.points.reserve(p.points.size());
        for (Point2 q : p.points) moved.points.push_back(m.apply(q));
        auto clipped = clip_polyline(moved, out.raster.width, out.raster.height);
        out.truth.insert(out.truth.end(), clipped.begin(), clipped.end());
    }
    return out;
}

Scene augment(const Scene& scene, uint64_t seed, uint8_t background) {
    Rng rng(seed);
    const double w = scene.raster.width, h = scene.raster.height;
    const double angle = rng.uniform(-15.0, 15.0) * kPi / 180.0;
    const double scale = 1.0 / rng.uniform(0.85, 1.0);  // crop-with-resize zooms in
    const double max_off_u = w - w / scale;
    const double max_off_v = h - h / scale;
    const double x0 = rng.uniform(0.0, std::max(0.0, max_off_u));
    const double y0 = rng.uniform(0.0, std::max(0.0, max_off_v));

    const Affine rot = affine_rotation_about(angle, {w * 0.5, h * 0.5});
    Affine crop;
    crop.a = scale; crop.d = scale;
    crop.tu = -x0 * scale;
    crop.tv = -y0 * scale;
    return transform_scene(scene, affine_compose(crop, rot), background);
}

// --- PGM --------------------------------------------------------------------

void save_pgm(const std::string& path, const Raster& r) {
    std::ostringstream out;
    out << "P5\n" << r.width << " " << r.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(r.pixels.data()),
              static_cast<std::streamsize>(r.pixels.size()));
    write_file_atomic(path, out.str());
}

Raster load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error(path + ": not a binary PGM (P5) file");
    auto next_int = [&]() {
        // skip whitespace and '#' comment lines per the netpbm header rules
        int c = in.get();
        while (c != EOF && (std::isspace(c) || c == '#')) {
            if (c == '#')
                while (c != EOF && c != '\n') c = in.get();
            c = in.get();
        }
        int value = 0;
        bool any = false;
        while (c != EOF && std::isdigit(c)) {
            value = value * 10 + (c - '0');
            c = in.get();
            any = true;
        }
        if (!any) throw std::runtime_error(path + ": malformed PGM header");
        return value;
    };
    Raster r;
    r.width = next_int();
    r.height = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw std::runtime_error(path + ": unsupported PGM maxval");
    if (r.width <= 0 || r.height <= 0) throw std::runtime_error(path + ": bad PGM dimensions");
    r.pixels.resize(static_cast<size_t>(r.width) * r.height);
    in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.pixels.size()))
        throw std::runtime_error(path + ": truncated PGM payload");
    return r;
}

// --- Annotations ------------------------------------------------------------

std::string annotation_to_json(const Annotation& a) {
    nlohmann::json j;
    j["image"] = {{"w", a.width}, {"h", a.height}};
    auto& arr = j["polylines"] = nlohmann::json::array();
    for (size_t i = 0; i < a.polylines.size(); ++i) {
        const Polyline& p = a.polylines[i];
        nlohmann::json jp;
        if (p.label) jp["label"] = *p.label;
        auto& pts = jp["points"] = nlohmann::json::array();
        for (Point2 q : p.points) pts.push_back({q.u, q.v});
        if (i < a.confidences.size() && a.confidences[i] != 1.0)
            jp["confidence"] = a.confidences[i];
        arr.push_back(std::move(jp));
    }
    return j.dump();
}

Annotation annotation_from_json(const std::string& line, size_t line_number) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("annotation line " + std::to_string(line_number) +
                                 ": " + e.what());
    }
    Annotation a;
    a.width = j.at("image").at("w").get<int>();
    a.height = j.at("image").at("h").get<int>();
    for (const auto& jp : j.at("polylines")) {
        Polyline p;
        if (jp.contains("label") && !jp.at("label").is_null())
            p.label = jp.at("label").get<int>();
        for (const auto& pt : jp.at("points"))
            p.points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        a.polylines.push_back(std::move(p));
        a.confidences.push_back(jp.value("confidence", 1.0));
    }
    return a;
}

void save_annotations(const std::string& path, const std::vector<Annotation>& all) {
    std::ostringstream out;
    for (const Annotation& a : all) out << annotation_to_json(a) << "\n";
    write_file_atomic(path, out.str());
}

std::vector<Annotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<Annotation> out;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        out.push_back(annotation_from_json(line, line_number));
    }
    return out;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j;
    j["annotations"] = m.annotations;
    auto& arr = j["entries"] = nlohmann::json::array();
    for (const auto& [raster, index] : m.entries)
        arr.push_back({{"raster", raster}, {"line", index}});
    write_file_atomic(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    DatasetManifest m;
    m.annotations = j.at("annotations").get<std::string>();
    for (const auto& e : j.at("entries"))
        m.entries.emplace_back(e.at("raster").get<std::string>(), e.at("line").get<int>());
    return m;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace gridline
