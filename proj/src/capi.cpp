#include "pathrec.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "pathrec/inverse.hpp"
#include "pathrec/io.hpp"
#include "pathrec/oracles.hpp"
#include "pathrec/pathstore.hpp"

#define PRC_EXPORT __attribute__((visibility("default")))

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

int classify(const std::exception& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("truncated") != std::string::npos ||
        what.find("write failure") != std::string::npos)
        return PRC_ERR_IO;
    if (what.find("non-finite") != std::string::npos) return PRC_ERR_NUMERIC;
    return PRC_ERR_CONFIG;
}

}  // namespace

struct prc_scene {
    pathrec::Scene scene;
};

struct prc_result {
    pathrec::ImageSet images;
    pathrec::ParamSet params;
    std::vector<pathrec::IterationLog> history;
    const pathrec::GridGeometry* geom = nullptr;  // owned by nothing; copy below
    pathrec::GridGeometry geom_copy;
    pathrec::LengthUnit unit = pathrec::LengthUnit::Meters;
    bool has_grid = false;
    bool has_phong = false;
};

struct prc_grid {
    pathrec::VoxelGridField field;
    pathrec::LengthUnit unit = pathrec::LengthUnit::Meters;
};

extern "C" {

PRC_EXPORT const char* prc_version(void) {
    static const std::string v = pathrec::library_version();
    return v.c_str();
}

PRC_EXPORT const char* prc_last_error(void) { return g_last_error.c_str(); }

PRC_EXPORT int prc_scene_load(const char* path, prc_scene** out) {
    if (!path || !out) return fail(PRC_ERR_INVALID, "prc_scene_load: null argument");
    try {
        auto* s = new prc_scene{pathrec::load_scene(path)};
        *out = s;
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT void prc_scene_free(prc_scene* scene) { delete scene; }

PRC_EXPORT int prc_scene_validate(const prc_scene* scene, char* buf, size_t buflen,
                                  int* n_violations) {
    if (!scene) return fail(PRC_ERR_INVALID, "prc_scene_validate: null scene");
    const auto violations = pathrec::validate_scene(scene->scene);
    if (n_violations) *n_violations = static_cast<int>(violations.size());
    if (buf && buflen > 0) {
        std::string all;
        for (const auto& v : violations) {
            all += v.what;
            all += '\n';
        }
        const size_t n = std::min(buflen - 1, all.size());
        std::memcpy(buf, all.data(), n);
        buf[n] = '\0';
    }
    return PRC_OK;
}

PRC_EXPORT int prc_scene_detector_count(const prc_scene* scene, int* out) {
    if (!scene || !out) return fail(PRC_ERR_INVALID, "prc_scene_detector_count: null argument");
    *out = static_cast<int>(scene->scene.detectors.size());
    return PRC_OK;
}

PRC_EXPORT int prc_render(const prc_scene* scene, const prc_render_opts* opts,
                          prc_result** out) {
    if (!scene || !opts || !out) return fail(PRC_ERR_INVALID, "prc_render: null argument");
    if (opts->n_paths == 0) return fail(PRC_ERR_CONFIG, "prc_render: n_paths must be >= 1");
    try {
        pathrec::RenderOptions ropt;
        ropt.n_paths = opts->n_paths;
        ropt.seed = opts->seed;
        ropt.workers = opts->workers;
        ropt.max_bounces = opts->max_bounces > 0 ? opts->max_bounces : 500;
        ropt.keep_paths = opts->store_dump_path != nullptr;
        pathrec::RenderResult rr = pathrec::render(scene->scene, ropt);
        if (opts->store_dump_path) pathrec::save_store(*rr.store, opts->store_dump_path);
        auto* r = new prc_result;
        r->images = std::move(rr.images);
        *out = r;
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_reconstruct(const prc_scene* scene, const prc_reconstruct_opts* opts,
                               prc_result** out) {
    if (!scene || !opts || !out) return fail(PRC_ERR_INVALID, "prc_reconstruct: null argument");
    if (!opts->gt_dir) return fail(PRC_ERR_CONFIG, "prc_reconstruct: gt_dir is required");
    try {
        const pathrec::Scene& sc = scene->scene;
        const bool tomography = sc.unknown_species() >= 0;
        if (!tomography && sc.target_surface() < 0)
            return fail(PRC_ERR_CONFIG,
                        "prc_reconstruct: scene declares no unknown species or target surface");

        pathrec::ImageSet gt;
        for (size_t d = 0; d < sc.detectors.size(); ++d) {
            char name[64];
            std::snprintf(name, sizeof(name), "gt_%03zu.pfm", d);
            gt.push_back(
                pathrec::load_pfm((std::filesystem::path(opts->gt_dir) / name).string()));
        }

        pathrec::ReconstructOptions ro;
        ro.seed = opts->seed;
        ro.workers = opts->workers;
        ro.adam.alpha = opts->alpha > 0.0 ? opts->alpha : 1e7;
        ro.schedule.recycle_period = opts->recycle_period > 0 ? opts->recycle_period : 30;
        ro.schedule.max_iterations = opts->max_iterations;
        const int n_stages = opts->n_stages > 0 ? opts->n_stages : 1;
        uint64_t n = opts->n_paths > 0 ? opts->n_paths : 100000;
        for (int s = 0; s < n_stages; ++s) {
            pathrec::Stage st;
            st.n_paths = n;
            ro.schedule.stages.push_back(st);
            n *= 2;
        }
        if (opts->out_dir) {
            ro.checkpoint_dir = opts->out_dir;
            ro.schedule.checkpoint_every = 25;
        }

        pathrec::ParamSet initial;
        pathrec::ParamSet truth;
        bool have_truth = false;
        if (tomography) {
            const auto carve = pathrec::space_carve(
                sc, gt, opts->carve_threshold > 0.0 ? opts->carve_threshold : 0.02,
                opts->carve_fill);
            initial = carve.initial;
            if (opts->truth_grid) {
                truth.beta = pathrec::load_grid(opts->truth_grid).values;
                have_truth = true;
            }
        } else {
            initial.kappa_s = opts->init_kappa;
            initial.gamma = opts->init_gamma;
            ro.adam.step_scale = {1.0,
                                  opts->gamma_step_scale > 0.0 ? opts->gamma_step_scale : 1.0};
            if (opts->truth_kappa > 0.0 || opts->truth_gamma > 0.0) {
                truth.kappa_s = opts->truth_kappa;
                truth.gamma = opts->truth_gamma;
                have_truth = true;
            }
        }
        if (have_truth) ro.truth = &truth;

        pathrec::ReconstructResult res = pathrec::reconstruct(sc, gt, std::move(initial), ro);

        auto* r = new prc_result;
        r->params = std::move(res.params);
        r->history = std::move(res.history);
        if (tomography && sc.grid()) {
            r->geom_copy = *sc.grid();
            r->has_grid = true;
            r->unit = sc.unit;
        } else {
            r->has_phong = true;
        }
        *out = r;
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_result_image(const prc_result* result, int detector, const double** data,
                                int* rows, int* cols) {
    if (!result || !data || !rows || !cols)
        return fail(PRC_ERR_INVALID, "prc_result_image: null argument");
    if (detector < 0 || detector >= static_cast<int>(result->images.size()))
        return fail(PRC_ERR_INVALID, "prc_result_image: detector index out of range");
    const pathrec::Image& im = result->images[static_cast<size_t>(detector)];
    *data = im.data.data();
    *rows = im.rows;
    *cols = im.cols;
    return PRC_OK;
}

PRC_EXPORT int prc_result_save_pfm(const prc_result* result, int detector, const char* path) {
    if (!result || !path) return fail(PRC_ERR_INVALID, "prc_result_save_pfm: null argument");
    if (detector < 0 || detector >= static_cast<int>(result->images.size()))
        return fail(PRC_ERR_INVALID, "prc_result_save_pfm: detector index out of range");
    try {
        pathrec::save_pfm(result->images[static_cast<size_t>(detector)], path);
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_result_save_pgm(const prc_result* result, int detector, const char* path) {
    if (!result || !path) return fail(PRC_ERR_INVALID, "prc_result_save_pgm: null argument");
    if (detector < 0 || detector >= static_cast<int>(result->images.size()))
        return fail(PRC_ERR_INVALID, "prc_result_save_pgm: detector index out of range");
    try {
        pathrec::save_pgm_preview(result->images[static_cast<size_t>(detector)], path);
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_result_params(const prc_result* result, double* kappa_s, double* gamma) {
    if (!result || !kappa_s || !gamma)
        return fail(PRC_ERR_INVALID, "prc_result_params: null argument");
    if (!result->has_phong)
        return fail(PRC_ERR_INVALID, "prc_result_params: not a reflectometry result");
    *kappa_s = result->params.kappa_s;
    *gamma = result->params.gamma;
    return PRC_OK;
}

PRC_EXPORT int prc_result_grid_save(const prc_result* result, const char* path) {
    if (!result || !path) return fail(PRC_ERR_INVALID, "prc_result_grid_save: null argument");
    if (!result->has_grid)
        return fail(PRC_ERR_INVALID, "prc_result_grid_save: not a tomography result");
    try {
        pathrec::VoxelGridField f{result->geom_copy, result->params.beta};
        pathrec::save_grid(f, result->unit, path);
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_result_final_loss(const prc_result* result, double* loss) {
    if (!result || !loss) return fail(PRC_ERR_INVALID, "prc_result_final_loss: null argument");
    if (result->history.empty())
        return fail(PRC_ERR_INVALID, "prc_result_final_loss: no optimization history");
    *loss = result->history.back().loss;
    return PRC_OK;
}

PRC_EXPORT int prc_result_save_csv(const prc_result* result, const char* path) {
    if (!result || !path) return fail(PRC_ERR_INVALID, "prc_result_save_csv: null argument");
    try {
        pathrec::save_csv(result->history, path);
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT void prc_result_free(prc_result* result) { delete result; }

PRC_EXPORT int prc_grid_load(const char* path, prc_grid** out) {
    if (!path || !out) return fail(PRC_ERR_INVALID, "prc_grid_load: null argument");
    try {
        auto* g = new prc_grid;
        g->field = pathrec::load_grid(path, &g->unit);
        *out = g;
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_grid_save(const prc_grid* grid, const char* path) {
    if (!grid || !path) return fail(PRC_ERR_INVALID, "prc_grid_save: null argument");
    try {
        pathrec::save_grid(grid->field, grid->unit, path);
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(classify(e), e.what());
    }
}

PRC_EXPORT int prc_grid_metrics(const prc_grid* estimate, const prc_grid* truth, double* eps,
                                double* delta) {
    if (!estimate || !truth || !eps || !delta)
        return fail(PRC_ERR_INVALID, "prc_grid_metrics: null argument");
    try {
        const pathrec::Metrics m =
            pathrec::metrics(estimate->field.values, truth->field.values);
        *eps = m.eps;
        *delta = m.delta;
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(PRC_ERR_CONFIG, e.what());
    }
}

PRC_EXPORT void prc_grid_free(prc_grid* grid) { delete grid; }

PRC_EXPORT int prc_selftest(void) {
    using namespace pathrec;
    try {
        // phase normalization by sphere quadrature
        std::vector<double> nodes, weights;
        oracles::gauss_legendre(128, nodes, weights);
        for (const auto& pf : {PhaseFunction::rayleigh(), PhaseFunction::henyey_greenstein(0.85),
                               PhaseFunction::henyey_greenstein(0.0)}) {
            double total = 0.0;
            for (size_t i = 0; i < nodes.size(); ++i)
                total += weights[i] * pf.eval(nodes[i]) * 2.0 * std::numbers::pi;
            if (std::abs(total - 1.0) > 1e-6)
                return fail(PRC_ERR_NUMERIC, "selftest: phase normalization failed");
        }
        // midpoint integration
        if (std::abs(oracles::riemann_integrate([](double u) { return 3.0 * u * u; }, 100000) -
                     1.0) > 1e-8)
            return fail(PRC_ERR_NUMERIC, "selftest: midpoint integration failed");
        // uniform mc within 5 sigma
        Rng rng(123, 0);
        const auto est = oracles::mc_uniform([](double u) { return 3.0 * u * u; }, 200000, rng);
        if (std::abs(est.estimate - 1.0) > 5.0 * est.std_error)
            return fail(PRC_ERR_NUMERIC, "selftest: uniform mc estimate out of bounds");
        return PRC_OK;
    } catch (const std::exception& e) {
        return fail(PRC_ERR_NUMERIC, e.what());
    }
}

}  // extern "C"
