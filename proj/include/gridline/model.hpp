#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridline/anchors.hpp"
#include "gridline/data.hpp"
#include "gridline/geom.hpp"
#include "gridline/loss.hpp"
#include "gridline/matching.hpp"

namespace gridline {

enum class Activation { Linear, Sigmoid };

/// Structure of the per-cell prediction head: a one-hidden-layer map from the
/// cell's pixel patch (cell_size^2 inputs) to predictors*(4+classes+1)
/// outputs, shared across all cells.
struct ModelConfig {
    int cell_size = 8;
    int hidden = 32;
    int predictors = 2;
    int classes = 0;
    LineRep representation = LineRep::MR;
    Activation geometry_activation = Activation::Linear;
    Activation confidence_activation = Activation::Sigmoid;
    std::optional<AnchorSet> anchors;  // geometry outputs become offsets when set

    int inputs() const { return cell_size * cell_size; }
    int values_per_predictor() const { return 4 + classes + 1; }
    int outputs() const { return predictors * values_per_predictor(); }
};

struct ModelParams {
    ModelConfig config;
    uint64_t seed = 0;
    std::vector<double> w1, b1;  // hidden x inputs, hidden
    std::vector<double> w2, b2;  // outputs x hidden, outputs
};

ModelParams init_params(const ModelConfig& config, uint64_t seed);

/// rows x cols x predictors x values block of activated outputs; value layout
/// per predictor is [geometry 4, labels classes, confidence].
struct GridTensor {
    int rows = 0, cols = 0, predictors = 0, values = 0;
    std::vector<double> data;

    double at(int r, int c, int p, int k) const {
        return data[((static_cast<size_t>(r) * cols + c) * predictors + p) * values + k];
    }
    double& at(int r, int c, int p, int k) {
        return data[((static_cast<size_t>(r) * cols + c) * predictors + p) * values + k];
    }
};

/// Activated forward pass; anchor geometry offsets are already resolved, so
/// the tensor always holds absolute geometry in the configured representation.
GridTensor forward(const ModelParams& params, const Raster& raster, const Grid& grid);

/// View the tensor as per-cell CellSegments (cells row-major).
std::vector<std::vector<CellSegment>> tensor_to_cells(const GridTensor& t, LineRep rep,
                                                      int classes);

struct TrainConfig {
    LineRep representation = LineRep::MR;
    bool dynamic_assignment = true;
    std::optional<AnchorSet> anchors;  // required when dynamic_assignment is false
    LossWeights weights;
    double learning_rate = 1e-2;
    double lr_decay = 1.0;  // multiplicative per epoch, 1 = constant rate
    int epochs = 100;
    int batch_size = 8;
    uint64_t seed = 1;
    Activation geometry_activation = Activation::Linear;
    Activation confidence_activation = Activation::Sigmoid;
    int hidden = 32;
    int predictors = 2;
    int classes = 0;
    int threads = 1;
};

/// One image with its ground truth discretized per cell (row-major cells, in
/// the training representation).
struct TrainSample {
    Raster raster;
    std::vector<std::vector<CellSegment>> cells;
};

/// Discretize one image's truth into per-cell ground truth. Consecutive
/// same-cell pieces of a polyline turning less than collinear_merge_eps
/// radians collapse into their chord (0 disables merging).
TrainSample prepare_sample(const Raster& raster, const std::vector<Polyline>& truth,
                           const Grid& grid, LineRep rep, int num_classes,
                           double collinear_merge_eps = 0.35);

struct EpochStats {
    LossBreakdown loss;  // mean per-image loss, per-predictor share omitted
    double val_f1 = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

/// Mini-batch gradient descent with momentum 0.9 on the composite loss.
/// Dynamic mode recomputes the per-cell assignment from the live prediction
/// at every step; anchor mode assigns the ground truth once up front.
/// Deterministic for a fixed seed; throws on divergence (NaN loss).
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const Grid& grid,
                  const TrainConfig& cfg);

/// Forward, clamp geometry to the valid cell box, keep hypotheses with
/// confidence above the threshold, return image-space segments.
std::vector<ImageSegment> predict(const ModelParams& params, const Raster& raster,
                                  const Grid& grid, double conf_threshold);

/// Flat parameter gradients, same shapes as ModelParams.
struct ModelGrads {
    std::vector<double> w1, b1, w2, b2;
};

/// Loss (and optionally parameter gradients) of one sample. Used by the
/// training loop and by the finite-difference checks; fixed_assignment pins
/// the per-cell matching so the loss is differentiable in the parameters.
LossBreakdown model_loss(const ModelParams& params, const Raster& raster,
                         const std::vector<std::vector<CellSegment>>& cell_gts,
                         const Grid& grid, const LossWeights& weights, bool dynamic,
                         const std::vector<Matching>* fixed_assignment = nullptr,
                         ModelGrads* grads = nullptr,
                         std::vector<Matching>* out_assignment = nullptr);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace gridline
