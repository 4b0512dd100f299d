#include "gridline/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gridline/metrics.hpp"
#include "gridline/rng.hpp"

namespace gridline {

namespace {

constexpr double kLeakySlope = 0.1;
constexpr double kMomentum = 0.9;
constexpr const char* kCheckpointVersion = "gridline-v1";

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_shapes(const ModelParams& p) {
    const ModelConfig& c = p.config;
    if (c.cell_size < 1 || c.hidden < 1 || c.predictors < 1 || c.classes < 0)
        throw std::invalid_argument("invalid model configuration");
    if (p.w1.size() != static_cast<size_t>(c.hidden) * c.inputs() ||
        p.b1.size() != static_cast<size_t>(c.hidden) ||
        p.w2.size() != static_cast<size_t>(c.outputs()) * c.hidden ||
        p.b2.size() != static_cast<size_t>(c.outputs()))
        throw std::invalid_argument("parameter shapes do not match the configuration");
    if (c.anchors && c.anchors->count() != c.predictors)
        throw std::invalid_argument("anchor count must equal the predictor count");
}

// per-cell intermediate values kept for backpropagation
struct CellCache {
    std::vector<double> h_pre, h, y_pre, y_act;  // y_act excludes the anchor offset
};

void forward_cell(const ModelParams& p, const double* x, CellCache& cache) {
    const ModelConfig& c = p.config;
    const int in = c.inputs();
    const int hidden = c.hidden;
    const int out = c.outputs();
    cache.h_pre.resize(static_cast<size_t>(hidden));
    cache.h.resize(static_cast<size_t>(hidden));
    cache.y_pre.resize(static_cast<size_t>(out));
    cache.y_act.resize(static_cast<size_t>(out));

    for (int i = 0; i < hidden; ++i) {
        double acc = p.b1[static_cast<size_t>(i)];
        const double* w = &p.w1[static_cast<size_t>(i) * in];
        for (int j = 0; j < in; ++j) acc += w[j] * x[j];
        cache.h_pre[static_cast<size_t>(i)] = acc;
        cache.h[static_cast<size_t>(i)] = acc > 0.0 ? acc : kLeakySlope * acc;
    }
    for (int k = 0; k < out; ++k) {
        double acc = p.b2[static_cast<size_t>(k)];
        const double* w = &p.w2[static_cast<size_t>(k) * hidden];
        for (int i = 0; i < hidden; ++i) acc += w[i] * cache.h[static_cast<size_t>(i)];
        cache.y_pre[static_cast<size_t>(k)] = acc;
    }

    const int v = c.values_per_predictor();
    for (int pr = 0; pr < c.predictors; ++pr) {
        double* y = &cache.y_act[static_cast<size_t>(pr) * v];
        const double* z = &cache.y_pre[static_cast<size_t>(pr) * v];
        // geometry
        for (int k = 0; k < 4; ++k) {
            if (c.geometry_activation == Activation::Linear) {
                y[k] = z[k];
            } else if (c.representation == LineRep::MR && k >= 2) {
                y[k] = 2.0 * sigmoid(z[k]) - 1.0;  // displacement spans [-1,1]
            } else {
                y[k] = sigmoid(z[k]);
            }
        }
        // labels: normalized exponential
        if (c.classes > 0) {
            double maxz = z[4];
            for (int k = 1; k < c.classes; ++k) maxz = std::max(maxz, z[4 + k]);
            double sum = 0.0;
            for (int k = 0; k < c.classes; ++k) {
                y[4 + k] = std::exp(z[4 + k] - maxz);
                sum += y[4 + k];
            }
            for (int k = 0; k < c.classes; ++k) y[4 + k] /= sum;
        }
        // confidence
        const int ck = 4 + c.classes;
        y[ck] = c.confidence_activation == Activation::Sigmoid ? sigmoid(z[ck]) : z[ck];
    }
}

// gradient w.r.t. activated outputs -> parameter gradients, accumulated
void backward_cell(const ModelParams& p, const double* x, const CellCache& cache,
                   const std::vector<double>& dy_act, ModelGrads& g) {
    const ModelConfig& c = p.config;
    const int in = c.inputs();
    const int hidden = c.hidden;
    const int out = c.outputs();
    const int v = c.values_per_predictor();

    std::vector<double> dy(static_cast<size_t>(out), 0.0);
    for (int pr = 0; pr < c.predictors; ++pr) {
        const double* ya = &cache.y_act[static_cast<size_t>(pr) * v];
        const double* da = &dy_act[static_cast<size_t>(pr) * v];
        double* dz = &dy[static_cast<size_t>(pr) * v];
        for (int k = 0; k < 4; ++k) {
            if (c.geometry_activation == Activation::Linear) {
                dz[k] = da[k];
            } else if (c.representation == LineRep::MR && k >= 2) {
                const double s = (ya[k] + 1.0) * 0.5;
                dz[k] = da[k] * 2.0 * s * (1.0 - s);
            } else {
                dz[k] = da[k] * ya[k] * (1.0 - ya[k]);
            }
        }
        if (c.classes > 0) {
            double inner = 0.0;
            for (int k = 0; k < c.classes; ++k) inner += da[4 + k] * ya[4 + k];
            for (int k = 0; k < c.classes; ++k)
                dz[4 + k] = ya[4 + k] * (da[4 + k] - inner);
        }
        const int ck = 4 + c.classes;
        dz[ck] = c.confidence_activation == Activation::Sigmoid
                     ? da[ck] * ya[ck] * (1.0 - ya[ck])
                     : da[ck];
    }

    std::vector<double> dh(static_cast<size_t>(hidden), 0.0);
    for (int k = 0; k < out; ++k) {
        const double d = dy[static_cast<size_t>(k)];
        if (d == 0.0) continue;
        double* gw = &g.w2[static_cast<size_t>(k) * hidden];
        const double* w = &p.w2[static_cast<size_t>(k) * hidden];
        for (int i = 0; i < hidden; ++i) {
            gw[i] += d * cache.h[static_cast<size_t>(i)];
            dh[static_cast<size_t>(i)] += d * w[i];
        }
        g.b2[static_cast<size_t>(k)] += d;
    }
    for (int i = 0; i < hidden; ++i) {
        const double slope = cache.h_pre[static_cast<size_t>(i)] > 0.0 ? 1.0 : kLeakySlope;
        const double d = dh[static_cast<size_t>(i)] * slope;
        if (d == 0.0) continue;
        double* gw = &g.w1[static_cast<size_t>(i) * in];
        for (int j = 0; j < in; ++j) gw[j] += d * x[j];
        g.b1[static_cast<size_t>(i)] += d;
    }
}

std::vector<double> extract_patches(const Raster& raster, const Grid& grid) {
    if (raster.width != grid.width() || raster.height != grid.height())
        throw std::invalid_argument("raster dimensions do not match the grid");
    const int cs = grid.cell_size;
    std::vector<double> patches(static_cast<size_t>(grid.rows) * grid.cols * cs * cs);
    size_t idx = 0;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c)
            for (int dr = 0; dr < cs; ++dr)
                for (int dc = 0; dc < cs; ++dc)
                    patches[idx++] = raster.at(r * cs + dr, c * cs + dc) / 255.0;
    return patches;
}

std::array<double, 4> anchor_offset(const ModelConfig& c, int predictor) {
    if (!c.anchors) return {0.0, 0.0, 0.0, 0.0};
    return anchor_geometry(*c.anchors, predictor, c.representation);
}

GridTensor assemble_tensor(const ModelConfig& c, const Grid& grid,
                           const std::vector<CellCache>& caches) {
    GridTensor t;
    t.rows = grid.rows;
    t.cols = grid.cols;
    t.predictors = c.predictors;
    t.values = c.values_per_predictor();
    t.data.resize(static_cast<size_t>(t.rows) * t.cols * t.predictors * t.values);
    const int v = t.values;
    for (int cell = 0; cell < grid.rows * grid.cols; ++cell) {
        const auto& y = caches[static_cast<size_t>(cell)].y_act;
        for (int pr = 0; pr < c.predictors; ++pr) {
            const auto offset = anchor_offset(c, pr);
            for (int k = 0; k < v; ++k) {
                double value = y[static_cast<size_t>(pr) * v + k];
                if (k < 4) value += offset[static_cast<size_t>(k)];
                t.data[(static_cast<size_t>(cell) * c.predictors + pr) * v + k] = value;
            }
        }
    }
    return t;
}

void forward_image(const ModelParams& p, const std::vector<double>& patches, const Grid& grid,
                   std::vector<CellCache>& caches) {
    const int cells = grid.rows * grid.cols;
    const int in = p.config.inputs();
    caches.resize(static_cast<size_t>(cells));
    for (int cell = 0; cell < cells; ++cell)
        forward_cell(p, &patches[static_cast<size_t>(cell) * in], caches[static_cast<size_t>(cell)]);
}

void zero_grads(const ModelConfig& c, ModelGrads& g) {
    g.w1.assign(static_cast<size_t>(c.hidden) * c.inputs(), 0.0);
    g.b1.assign(static_cast<size_t>(c.hidden), 0.0);
    g.w2.assign(static_cast<size_t>(c.outputs()) * c.hidden, 0.0);
    g.b2.assign(static_cast<size_t>(c.outputs()), 0.0);
}

void add_grads(ModelGrads& into, const ModelGrads& from) {
    for (size_t i = 0; i < into.w1.size(); ++i) into.w1[i] += from.w1[i];
    for (size_t i = 0; i < into.b1.size(); ++i) into.b1[i] += from.b1[i];
    for (size_t i = 0; i < into.w2.size(); ++i) into.w2[i] += from.w2[i];
    for (size_t i = 0; i < into.b2.size(); ++i) into.b2[i] += from.b2[i];
}

// Loss and gradients given precomputed patches. Core of model_loss and train.
LossBreakdown image_loss(const ModelParams& params, const std::vector<double>& patches,
                         const std::vector<std::vector<CellSegment>>& cell_gts, const Grid& grid,
                         const LossWeights& weights, bool dynamic,
                         const std::vector<Matching>* fixed_assignment, ModelGrads* grads,
                         std::vector<Matching>* out_assignment) {
    const ModelConfig& c = params.config;
    const int cells = grid.rows * grid.cols;
    if (static_cast<int>(cell_gts.size()) != cells)
        throw std::invalid_argument("ground-truth cell count does not match the grid");

    std::vector<CellCache> caches;
    forward_image(params, patches, grid, caches);
    const GridTensor tensor = assemble_tensor(c, grid, caches);
    const auto pred_cells = tensor_to_cells(tensor, c.representation, c.classes);

    std::vector<Matching> assignment;
    if (fixed_assignment) {
        assignment = *fixed_assignment;
    } else if (dynamic) {
        assignment.reserve(static_cast<size_t>(cells));
        for (int cell = 0; cell < cells; ++cell)
            assignment.push_back(dynamic_assign(pred_cells[static_cast<size_t>(cell)],
                                                cell_gts[static_cast<size_t>(cell)]));
    } else {
        if (!c.anchors) throw std::invalid_argument("anchor assignment requires anchors");
        assignment.reserve(static_cast<size_t>(cells));
        for (int cell = 0; cell < cells; ++cell)
            assignment.push_back(
                assignment_to_matching(assign_to_anchors(cell_gts[static_cast<size_t>(cell)], *c.anchors)));
    }
    if (out_assignment) *out_assignment = assignment;

    LossBreakdown loss;
    if (!grads) {
        loss = composite_loss(pred_cells, cell_gts, assignment, weights);
        return loss;
    }

    const auto output_grads = loss_gradients(pred_cells, cell_gts, assignment, weights, &loss);
    const int v = c.values_per_predictor();
    std::vector<double> dy_act(static_cast<size_t>(c.outputs()));
    const int in = c.inputs();
    for (int cell = 0; cell < cells; ++cell) {
        std::fill(dy_act.begin(), dy_act.end(), 0.0);
        const auto& cell_grads = output_grads[static_cast<size_t>(cell)];
        for (int pr = 0; pr < c.predictors; ++pr) {
            const PredictorGradient& pg = cell_grads[static_cast<size_t>(pr)];
            for (int k = 0; k < 4; ++k)
                dy_act[static_cast<size_t>(pr) * v + k] = pg.geom[static_cast<size_t>(k)];
            for (int k = 0; k < c.classes; ++k)
                dy_act[static_cast<size_t>(pr) * v + 4 + k] = pg.labels[static_cast<size_t>(k)];
            dy_act[static_cast<size_t>(pr) * v + 4 + c.classes] = pg.conf;
        }
        backward_cell(params, &patches[static_cast<size_t>(cell) * in],
                      caches[static_cast<size_t>(cell)], dy_act, *grads);
    }
    return loss;
}

void run_indexed(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(threads, count);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
    ModelParams p;
    p.config = config;
    p.seed = seed;
    Rng rng(mix_seed(seed, 0xA11C));
    const double s1 = std::sqrt(6.0 / (config.inputs() + config.hidden));
    const double s2 = std::sqrt(6.0 / (config.hidden + config.outputs()));
    p.w1.resize(static_cast<size_t>(config.hidden) * config.inputs());
    p.b1.assign(static_cast<size_t>(config.hidden), 0.0);
    p.w2.resize(static_cast<size_t>(config.outputs()) * config.hidden);
    p.b2.assign(static_cast<size_t>(config.outputs()), 0.0);
    for (double& w : p.w1) w = rng.uniform(-s1, s1);
    for (double& w : p.w2) w = rng.uniform(-s2, s2);

    // Spread the predictors' initial geometry over a direction fan so the
    // dynamic assignment is stable from the first steps; identically
    // initialised predictors keep swapping their matched ground truth, which
    // stalls the confidence targets. No effect in anchor mode (offsets start
    // near zero there).
    if (!config.anchors) {
        const int v = config.values_per_predictor();
        for (int pr = 0; pr < config.predictors; ++pr) {
            const double angle = 2.0 * 3.14159265358979323846 * pr / config.predictors;
            double* geom = &p.b2[static_cast<size_t>(pr) * v];
            if (config.geometry_activation == Activation::Linear) {
                if (config.representation == LineRep::MR) {
                    geom[0] = 0.5;
                    geom[1] = 0.5;
                    geom[2] = 0.4 * std::cos(angle);
                    geom[3] = 0.4 * std::sin(angle);
                } else {
                    geom[0] = 0.5 - 0.2 * std::cos(angle);
                    geom[1] = 0.5 - 0.2 * std::sin(angle);
                    geom[2] = 0.5 + 0.2 * std::cos(angle);
                    geom[3] = 0.5 + 0.2 * std::sin(angle);
                }
            } else {
                // pre-activation biases giving roughly the same spread
                if (config.representation == LineRep::MR) {
                    geom[2] = 0.9 * std::cos(angle);
                    geom[3] = 0.9 * std::sin(angle);
                } else {
                    geom[0] = -0.9 * std::cos(angle);
                    geom[1] = -0.9 * std::sin(angle);
                    geom[2] = 0.9 * std::cos(angle);
                    geom[3] = 0.9 * std::sin(angle);
                }
            }
        }
    }
    check_shapes(p);
    return p;
}

GridTensor forward(const ModelParams& params, const Raster& raster, const Grid& grid) {
    check_shapes(params);
    if (grid.cell_size != params.config.cell_size)
        throw std::invalid_argument("grid cell size does not match the model");
    const auto patches = extract_patches(raster, grid);
    std::vector<CellCache> caches;
    forward_image(params, patches, grid, caches);
    return assemble_tensor(params.config, grid, caches);
}

std::vector<std::vector<CellSegment>> tensor_to_cells(const GridTensor& t, LineRep rep,
                                                      int classes) {
    if (t.values != 4 + classes + 1)
        throw std::invalid_argument("tensor value count does not match classes");
    std::vector<std::vector<CellSegment>> cells(static_cast<size_t>(t.rows) * t.cols);
    for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.cols; ++c) {
            auto& cell = cells[static_cast<size_t>(r) * t.cols + c];
            cell.reserve(static_cast<size_t>(t.predictors));
            for (int p = 0; p < t.predictors; ++p) {
                CellSegment seg;
                seg.geometry = geometry_from_values(
                    rep, {t.at(r, c, p, 0), t.at(r, c, p, 1), t.at(r, c, p, 2), t.at(r, c, p, 3)});
                seg.label_probs.resize(static_cast<size_t>(classes));
                for (int k = 0; k < classes; ++k) seg.label_probs[static_cast<size_t>(k)] = t.at(r, c, p, 4 + k);
                seg.confidence = t.at(r, c, p, 4 + classes);
                seg.row = r;
                seg.col = c;
                cell.push_back(std::move(seg));
            }
        }
    }
    return cells;
}

TrainSample prepare_sample(const Raster& raster, const std::vector<Polyline>& truth,
                           const Grid& grid, LineRep rep, int num_classes,
                           double collinear_merge_eps) {
    TrainSample s;
    s.raster = raster;
    s.cells.assign(static_cast<size_t>(grid.rows) * grid.cols, {});
    for (const Polyline& p : truth) {
        const auto chain =
            merge_collinear_chain(split_polyline(p, grid, num_classes), collinear_merge_eps);
        for (const CellSegment& seg : chain) {
            CellSegment converted = with_representation(seg, rep);
            s.cells[static_cast<size_t>(seg.row) * grid.cols + seg.col].push_back(std::move(converted));
        }
    }
    return s;
}

LossBreakdown model_loss(const ModelParams& params, const Raster& raster,
                         const std::vector<std::vector<CellSegment>>& cell_gts, const Grid& grid,
                         const LossWeights& weights, bool dynamic,
                         const std::vector<Matching>* fixed_assignment, ModelGrads* grads,
                         std::vector<Matching>* out_assignment) {
    check_shapes(params);
    const auto patches = extract_patches(raster, grid);
    if (grads) zero_grads(params.config, *grads);
    return image_loss(params, patches, cell_gts, grid, weights, dynamic, fixed_assignment, grads,
                      out_assignment);
}

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const Grid& grid,
                  const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("empty training set");
    if (cfg.learning_rate < 0 || cfg.epochs <= 0 || cfg.batch_size <= 0)
        throw std::invalid_argument("learning rate must be non-negative, epochs and batch size positive");
    if (cfg.lr_decay <= 0 || cfg.lr_decay > 1.0)
        throw std::invalid_argument("lr_decay must be in (0, 1]");
    if (!cfg.dynamic_assignment && !cfg.anchors)
        throw std::invalid_argument("anchor assignment requires an anchor set");
    if (cfg.anchors && !cfg.dynamic_assignment && cfg.anchors->count() != cfg.predictors)
        throw std::invalid_argument("anchor count must equal the predictor count");

    ModelConfig mc;
    mc.cell_size = grid.cell_size;
    mc.hidden = cfg.hidden;
    mc.predictors = cfg.predictors;
    mc.classes = cfg.classes;
    mc.representation = cfg.representation;
    mc.geometry_activation = cfg.geometry_activation;
    mc.confidence_activation = cfg.confidence_activation;
    if (!cfg.dynamic_assignment) mc.anchors = cfg.anchors;

    TrainResult result;
    result.params = init_params(mc, cfg.seed);

    const int n = static_cast<int>(train_set.size());
    std::vector<std::vector<double>> patches(train_set.size());
    for (int i = 0; i < n; ++i) patches[static_cast<size_t>(i)] = extract_patches(train_set[static_cast<size_t>(i)].raster, grid);
    std::vector<std::vector<double>> val_patches(val_set.size());
    for (size_t i = 0; i < val_set.size(); ++i) val_patches[i] = extract_patches(val_set[i].raster, grid);

    for (const TrainSample& s : train_set)
        if (static_cast<int>(s.cells.size()) != grid.rows * grid.cols)
            throw std::invalid_argument("sample cell count does not match the grid");

    // anchor mode: the assignment is fixed before training starts
    std::vector<std::vector<Matching>> static_assignment;
    if (!cfg.dynamic_assignment) {
        static_assignment.resize(train_set.size());
        for (int i = 0; i < n; ++i) {
            auto& per_cell = static_assignment[static_cast<size_t>(i)];
            per_cell.reserve(train_set[static_cast<size_t>(i)].cells.size());
            for (const auto& cell : train_set[static_cast<size_t>(i)].cells)
                per_cell.push_back(assignment_to_matching(assign_to_anchors(cell, *cfg.anchors)));
        }
    }

    ModelGrads velocity;
    zero_grads(mc, velocity);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5F0FF));
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    double rate = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates with our own rng so runs are reproducible bit for bit
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

        double epoch_total = 0.0, epoch_geom = 0.0, epoch_conf = 0.0, epoch_cls = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - start);
            std::vector<ModelGrads> batch_grads(static_cast<size_t>(count));
            std::vector<LossBreakdown> batch_loss(static_cast<size_t>(count));
            run_indexed(count, cfg.threads, [&](int bi) {
                const int si = order[static_cast<size_t>(start + bi)];
                zero_grads(mc, batch_grads[static_cast<size_t>(bi)]);
                batch_loss[static_cast<size_t>(bi)] = image_loss(
                    result.params, patches[static_cast<size_t>(si)],
                    train_set[static_cast<size_t>(si)].cells, grid, cfg.weights,
                    cfg.dynamic_assignment,
                    cfg.dynamic_assignment ? nullptr : &static_assignment[static_cast<size_t>(si)],
                    &batch_grads[static_cast<size_t>(bi)], nullptr);
            });

            // reduce in index order regardless of thread completion order
            ModelGrads grads;
            zero_grads(mc, grads);
            for (int bi = 0; bi < count; ++bi) {
                add_grads(grads, batch_grads[static_cast<size_t>(bi)]);
                const LossBreakdown& l = batch_loss[static_cast<size_t>(bi)];
                if (!std::isfinite(l.total))
                    throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                             std::to_string(epoch));
                epoch_total += l.total;
                epoch_geom += l.geom;
                epoch_conf += l.conf;
                epoch_cls += l.cls;
            }

            const double scale = rate / static_cast<double>(count);
            auto update = [&](std::vector<double>& w, std::vector<double>& vel,
                              const std::vector<double>& g) {
                for (size_t i = 0; i < w.size(); ++i) {
                    vel[i] = kMomentum * vel[i] - scale * g[i];
                    w[i] += vel[i];
                }
            };
            update(result.params.w1, velocity.w1, grads.w1);
            update(result.params.b1, velocity.b1, grads.b1);
            update(result.params.w2, velocity.w2, grads.w2);
            update(result.params.b2, velocity.b2, grads.b2);
        }

        EpochStats stats;
        stats.loss.total = epoch_total / n;
        stats.loss.geom = epoch_geom / n;
        stats.loss.conf = epoch_conf / n;
        stats.loss.cls = epoch_cls / n;

        if (!val_set.empty()) {
            ClassifyResult pooled;
            for (size_t i = 0; i < val_set.size(); ++i) {
                std::vector<CellCache> caches;
                forward_image(result.params, val_patches[i], grid, caches);
                const GridTensor tensor = assemble_tensor(mc, grid, caches);
                const auto pred_cells = tensor_to_cells(tensor, mc.representation, mc.classes);
                pooled.merge(classify_outcomes(
                    pred_cells, val_set[i].cells, grid,
                    cfg.dynamic_assignment ? AssignMode::Dynamic : AssignMode::Anchors,
                    cfg.anchors ? &*cfg.anchors : nullptr));
            }
            stats.val_f1 = retrieval_metrics(pooled.counts).f1;
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(stats);
        rate *= cfg.lr_decay;
    }
    return result;
}

std::vector<ImageSegment> predict(const ModelParams& params, const Raster& raster,
                                  const Grid& grid, double conf_threshold) {
    const GridTensor tensor = forward(params, raster, grid);
    auto cells = tensor_to_cells(tensor, params.config.representation, params.config.classes);
    std::vector<ImageSegment> out;
    for (auto& cell : cells) {
        for (CellSegment& seg : cell) {
            if (!(seg.confidence > conf_threshold)) continue;
            auto vals = geometry_values(seg.geometry);
            if (params.config.representation == LineRep::MR) {
                vals[0] = std::clamp(vals[0], 0.0, 1.0);
                vals[1] = std::clamp(vals[1], 0.0, 1.0);
                vals[2] = std::clamp(vals[2], -1.0, 1.0);
                vals[3] = std::clamp(vals[3], -1.0, 1.0);
            } else {
                for (double& x : vals) x = std::clamp(x, 0.0, 1.0);
            }
            seg.geometry = geometry_from_values(params.config.representation, vals);
            out.push_back(cell_to_image(seg, grid));
        }
    }
    return out;
}

namespace {

const char* activation_name(Activation a) {
    return a == Activation::Linear ? "linear" : "sigmoid";
}

Activation activation_from(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["seed"] = params.seed;
    const ModelConfig& c = params.config;
    j["config"] = {
        {"cell_size", c.cell_size},
        {"hidden", c.hidden},
        {"predictors", c.predictors},
        {"classes", c.classes},
        {"representation", c.representation == LineRep::MR ? "mr" : "cart"},
        {"geometry_activation", activation_name(c.geometry_activation)},
        {"confidence_activation", activation_name(c.confidence_activation)},
    };
    if (c.anchors)
        j["config"]["anchors"] = nlohmann::json::parse(anchor_set_to_json(*c.anchors));
    j["params"] = {{"w1", params.w1}, {"b1", params.b1}, {"w2", params.w2}, {"b2", params.b2}};
    write_file_atomic(path, j.dump());
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("version", "") != kCheckpointVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version");
    ModelParams p;
    const auto& jc = j.at("config");
    p.config.cell_size = jc.at("cell_size").get<int>();
    p.config.hidden = jc.at("hidden").get<int>();
    p.config.predictors = jc.at("predictors").get<int>();
    p.config.classes = jc.at("classes").get<int>();
    p.config.representation =
        jc.at("representation").get<std::string>() == "mr" ? LineRep::MR : LineRep::Cart;
    p.config.geometry_activation = activation_from(jc.at("geometry_activation").get<std::string>());
    p.config.confidence_activation =
        activation_from(jc.at("confidence_activation").get<std::string>());
    if (jc.contains("anchors")) p.config.anchors = anchor_set_from_json(jc.at("anchors").dump());
    p.seed = j.at("seed").get<uint64_t>();
    p.w1 = j.at("params").at("w1").get<std::vector<double>>();
    p.b1 = j.at("params").at("b1").get<std::vector<double>>();
    p.w2 = j.at("params").at("w2").get<std::vector<double>>();
    p.b2 = j.at("params").at("b2").get<std::vector<double>>();
    check_shapes(p);
    return p;
}

}  // namespace gridline
