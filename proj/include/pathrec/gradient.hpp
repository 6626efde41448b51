#pragma once

#include <map>

#include "pathrec/pathstore.hpp"

namespace pathrec {

/// Sparse per-unknown derivative container. Tomography indexes voxels of the
/// unknown species; the reflectometry problem uses indices 0 (kappa_s) and
/// 1 (gamma).
struct SparseGradient {
    enum class Kind : uint8_t { Tomography, Phong } kind = Kind::Tomography;
    std::map<int, double> entries;

    double at(int v) const {
        auto it = entries.find(v);
        return it == entries.end() ? 0.0 : it->second;
    }
    void add(int v, double value) {
        if (value != 0.0) entries[v] += value;
    }
};

/// Per-event prefix score of one stored path with respect to the unknown
/// extinction field: for the event at vertex b, the score covers the
/// segments and scatter vertices up to b plus the event's own connection.
/// Returns one SparseGradient per event, aligned with path.events.
std::vector<SparseGradient> psf_tomography(const Scene& scene, const ParamSet& params,
                                           const PathRecord& path, bool legacy_score = false);

/// Per-event prefix score pair (d/d kappa_s, d/d gamma) over the target
/// surface's reflection vertices.
std::vector<std::pair<double, double>> psf_phong(const Scene& scene, const ParamSet& params,
                                                 const PathRecord& path);

/// Derivative of the summed forward images with respect to the unknowns,
/// optionally weighted per pixel (pass residuals for a loss gradient);
/// fused with the recycled evaluation so every factor is shared.
SparseGradient grad_forward(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                            const EvalOptions& opt = {});

/// Chain rule over the quadratic loss from per-pixel forward derivatives:
/// sum of (forward - gt) * grad entries. grads is indexed [detector][pixel].
SparseGradient loss_gradient(const ImageSet& forward, const ImageSet& gt,
                             const std::vector<std::vector<SparseGradient>>& grads);

}  // namespace pathrec
