#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pathrec/gradient.hpp"

namespace pathrec {

struct AdamConfig {
    double alpha = 1e7;
    double eta1 = 0.9;
    double eta2 = 0.999;
    double eps_guard = 1e-8;
    bool project_nonneg = true;
    /// Per-unknown step multipliers (reflectometry scales the exponent);
    /// empty means 1 everywhere.
    std::vector<double> step_scale;
};

struct Stage {
    int rows = 0, cols = 0;   // detector resolution at this stage
    uint64_t n_paths = 0;
};

struct Schedule {
    int recycle_period = 30;  // N_r
    int max_iterations = 100;
    std::vector<Stage> stages;
    int saturation_window = 20;
    double saturation_rel_improvement = 0.01;
    int checkpoint_every = 0;  // 0 disables checkpoints
};

struct OptState {
    ParamSet params;
    std::vector<double> m1, m2;  // moment vectors over the flattened unknowns
    int64_t t = 0;               // completed updates
    uint64_t store_generation = 0;
    ParamSet ref_params;
    std::vector<double> loss_history;
};

struct IterationLog {
    int iter = 0;
    double time_s = 0.0;
    double loss = 0.0;
    double eps = 0.0;
    double delta = 0.0;
    int stage = 0;
};

struct ReconstructResult {
    ParamSet params;
    std::vector<IterationLog> history;
    uint64_t sampling_phases = 0;  // number of path-tracing rounds
    uint64_t truncated_paths = 0;
};

struct ReconstructOptions {
    AdamConfig adam;
    Schedule schedule;
    uint64_t seed = 0;
    int workers = 1;
    /// Optional ground-truth unknowns for the per-iteration quality metrics.
    const ParamSet* truth = nullptr;
    std::string checkpoint_dir;
    /// Called once per iteration after logging; may observe progress.
    std::function<void(const IterationLog&)> on_iteration;
};

double loss(const ImageSet& forward, const ImageSet& gt);

/// One optimizer update over the flattened unknowns of state.params
/// (tomography: the extinction field; reflectometry: kappa_s then gamma).
void adam_step(OptState& state, const SparseGradient& grad, const AdamConfig& config);

struct CarveResult {
    std::vector<uint8_t> mask;  // per voxel, 1 = occupied
    ParamSet initial;
};

/// Visual-hull initialization: a voxel is occupied when its projection
/// exceeds the threshold fraction of the per-view maximum in every view;
/// occupied voxels start at fill_extinction.
CarveResult space_carve(const Scene& scene, const ImageSet& gt, double threshold_fraction,
                        double fill_extinction);

/// The recycling optimization loop: resample, sort and rebind the reference
/// every recycle_period iterations, otherwise reuse the store through the
/// corrected estimator. Stage changes are applied at resample boundaries.
ReconstructResult reconstruct(const Scene& scene, const ImageSet& gt, ParamSet initial,
                              const ReconstructOptions& opt);

struct Metrics {
    double eps = 0.0;
    double delta = 0.0;
};

/// L1 relative error and relative mass bias between unknown vectors.
Metrics metrics(const std::vector<double>& estimate, const std::vector<double>& truth);

/// Block-sum downsampling of ground-truth images to a stage resolution
/// (pixel values are sums of path contributions, so blocks add).
ImageSet downsample_images(const ImageSet& images, int rows, int cols);

}  // namespace pathrec
