#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathrec/transport.hpp"

namespace pathrec {

/// Frozen batch of sampled paths plus the parameters they were sampled
/// under. `by_stream[i]` locates the record with stream index i, so sorting
/// never changes any reduction order.
struct PathStore {
    std::vector<PathRecord> records;
    std::vector<uint32_t> by_stream;
    bool sorted_flag = false;
    uint64_t generation = 0;
    uint64_t seed = 0;
    ParamSet ref_params;

    void rebuild_index();
    size_t memory_bytes() const;
};

/// Stable sort by ascending path size B; estimates are unchanged because
/// evaluation walks by_stream.
void sort_by_size(PathStore& store);

/// Whole-path recycling correction factor r = mu(path|t) / mu(path|ref) in
/// cancelled form (geometry and initial-ray factors drop). Returned in
/// plain space; log-space internally.
double correction_factor(const Scene& scene, const PathRecord& path, const ParamSet& params_t,
                         const ParamSet& params_ref);

/// Recomputes the voxel intersections of every segment of a path from the
/// grid geometry alone.
std::vector<SegmentIntersections> segment_lengths(const PathRecord& path,
                                                  const GridGeometry& geom);

struct EvalOptions {
    int workers = 1;
    bool normalize = true;  // divide by the record count (raw sums otherwise)
    bool want_grad = false;
    bool legacy_score = false;    // drops the cross-species phase ratio from the score
    bool self_normalize = false;  // weighted-importance normalization by mean r
    /// Per-detector pixel weights folded into the gradient (residuals for a
    /// loss gradient; null means weight 1 everywhere).
    const ImageSet* pixel_weights = nullptr;
};

struct EvalResult {
    ImageSet images;
    std::vector<double> grad_beta;  // per-voxel, present when want_grad and tomography
    double grad_kappa = 0.0;
    double grad_gamma = 0.0;
    uint64_t clamp_events = 0;
    double mean_correction = 1.0;
};

/// Evaluates the stored paths under params_t with every factor taken from
/// stored intersections; with params_t == store.ref_params this is
/// bit-identical to a fresh render from the same store.
EvalResult evaluate_store(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                          const EvalOptions& opt);

/// Recycled forward images (evaluate_store without gradients).
ImageSet recycled_render(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                         int workers = 1);

void save_store(const PathStore& store, const std::string& path);
PathStore load_store(const std::string& path);

}  // namespace pathrec
