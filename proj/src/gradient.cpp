#include "pathrec/gradient.hpp"

#include <cmath>
#include <stdexcept>

namespace pathrec {

namespace {

double species_beta(const Scene& scene, const ParamSet& p, int j, int voxel) {
    return species_extinction(scene, p, j, voxel);
}

double scat_num(const Scene& scene, const ParamSet& p, int voxel, double cos_theta) {
    double num = 0.0;
    for (size_t j = 0; j < scene.species.size(); ++j)
        num += scene.species[j].albedo *
               species_beta(scene, p, static_cast<int>(j), voxel) *
               scene.species[j].phase.eval(cos_theta);
    return num;
}

double score_term(const Scene& scene, const ParamSet& p, int unknown, int voxel,
                  double cos_theta, bool legacy) {
    if (legacy) {
        double bt = 0.0;
        for (size_t j = 0; j < scene.species.size(); ++j)
            bt += species_beta(scene, p, static_cast<int>(j), voxel);
        return bt > 0.0 ? 1.0 / bt : 0.0;
    }
    const auto& u = scene.species[static_cast<size_t>(unknown)];
    const double num = scat_num(scene, p, voxel, cos_theta);
    return num > 0.0 ? u.albedo * u.phase.eval(cos_theta) / num : 0.0;
}

}  // namespace

std::vector<SparseGradient> psf_tomography(const Scene& scene, const ParamSet& params,
                                           const PathRecord& path, bool legacy_score) {
    const int unknown = scene.unknown_species();
    if (unknown < 0) throw std::logic_error("psf_tomography: no unknown species in scene");

    std::vector<SparseGradient> out;
    out.reserve(path.events.size());
    SparseGradient prefix;
    prefix.kind = SparseGradient::Kind::Tomography;

    size_t ei = 0;
    const int B = path.size();
    for (int b = 1; b <= B && ei < path.events.size(); ++b) {
        const VertexRec& v = path.vertices[static_cast<size_t>(b)];
        for (uint32_t s = v.span_begin; s < v.span_end; ++s)
            prefix.add(static_cast<int>(path.spans[s].voxel), -path.spans[s].length);
        while (ei < path.events.size() && path.events[ei].vertex == static_cast<uint32_t>(b)) {
            const EventRec& e = path.events[ei];
            SparseGradient g = prefix;
            for (uint32_t s = e.span_begin; s < e.span_end; ++s)
                g.add(static_cast<int>(path.le_spans[s].voxel), -path.le_spans[s].length);
            if (v.kind == EventKind::VolumeScatter)
                g.add(v.voxel, score_term(scene, params, unknown, v.voxel, e.cos_le,
                                          legacy_score));
            out.push_back(std::move(g));
            ++ei;
        }
        if (v.kind == EventKind::VolumeScatter)
            prefix.add(v.voxel,
                       score_term(scene, params, unknown, v.voxel, v.cos_theta, legacy_score));
    }
    return out;
}

std::vector<std::pair<double, double>> psf_phong(const Scene& scene, const ParamSet& params,
                                                 const PathRecord& path) {
    const int target = scene.target_surface();
    if (target < 0) throw std::logic_error("psf_phong: no target surface in scene");
    const PhongBrdf ph{params.kappa_s, params.gamma};

    std::vector<std::pair<double, double>> out;
    out.reserve(path.events.size());
    double pk = 0.0, pg = 0.0;  // prefix scores over earlier target reflections

    size_t ei = 0;
    const int B = path.size();
    for (int b = 1; b <= B && ei < path.events.size(); ++b) {
        const VertexRec& v = path.vertices[static_cast<size_t>(b)];
        const bool on_target = v.kind == EventKind::SurfaceReflect && v.surface == target;
        while (ei < path.events.size() && path.events[ei].vertex == static_cast<uint32_t>(b)) {
            const EventRec& e = path.events[ei];
            double sk = pk, sg = pg;
            if (on_target) {
                const double fr = ph.eval(e.cos_le);
                if (fr > 0.0) {
                    sk += ph.d_kappa(e.cos_le) / fr;
                    sg += ph.d_gamma(e.cos_le) / fr;
                }
            }
            out.emplace_back(sk, sg);
            ++ei;
        }
        if (on_target) {
            const double fr = ph.eval(v.cos_theta);
            if (fr > 0.0) {
                pk += ph.d_kappa(v.cos_theta) / fr;
                pg += ph.d_gamma(v.cos_theta) / fr;
            }
        }
    }
    return out;
}

SparseGradient grad_forward(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                            const EvalOptions& opt) {
    EvalOptions eopt = opt;
    eopt.want_grad = true;
    const EvalResult res = evaluate_store(scene, store, params_t, eopt);

    SparseGradient g;
    if (scene.unknown_species() >= 0) {
        g.kind = SparseGradient::Kind::Tomography;
        for (size_t v = 0; v < res.grad_beta.size(); ++v)
            g.add(static_cast<int>(v), res.grad_beta[v]);
    } else {
        g.kind = SparseGradient::Kind::Phong;
        g.add(0, res.grad_kappa);
        g.add(1, res.grad_gamma);
    }
    return g;
}

SparseGradient loss_gradient(const ImageSet& forward, const ImageSet& gt,
                             const std::vector<std::vector<SparseGradient>>& grads) {
    if (forward.size() != gt.size() || forward.size() != grads.size())
        throw std::invalid_argument("loss_gradient: detector count mismatch");
    SparseGradient out;
    bool kind_set = false;
    for (size_t d = 0; d < forward.size(); ++d) {
        if (forward[d].data.size() != gt[d].data.size() ||
            forward[d].data.size() != grads[d].size())
            throw std::invalid_argument("loss_gradient: image shape mismatch");
        for (size_t p = 0; p < grads[d].size(); ++p) {
            if (!kind_set) {
                out.kind = grads[d][p].kind;
                kind_set = true;
            }
            const double residual = forward[d].data[p] - gt[d].data[p];
            if (residual == 0.0) continue;
            for (const auto& [v, dv] : grads[d][p].entries) out.add(v, residual * dv);
        }
    }
    return out;
}

}  // namespace pathrec
