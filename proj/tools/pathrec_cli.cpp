#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pathrec.h"

namespace {

int exit_code_for(int prc_code) {
    if (prc_code == PRC_OK) return 0;
    if (prc_code == PRC_ERR_NUMERIC) return 3;
    return 2;
}

int report(int prc_code, const char* what) {
    if (prc_code != PRC_OK)
        std::cerr << what << ": " << prc_last_error() << "\n";
    return exit_code_for(prc_code);
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& scene, uint64_t seed, uint64_t paths, int workers,
                    const std::string& extra) {
    std::ofstream os(out_dir + "/manifest.txt");
    os << "command=" << command << "\n"
       << "scene=" << scene << "\n"
       << "seed=" << seed << "\n"
       << "paths=" << paths << "\n"
       << "workers=" << workers << "\n"
       << "version=" << prc_version() << "\n"
       << extra;
}

int resolve_workers(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("PATHREC_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 0;  // library default: hardware concurrency
}

struct SceneHandle {
    prc_scene* ptr = nullptr;
    ~SceneHandle() { prc_scene_free(ptr); }
};

struct ResultHandle {
    prc_result* ptr = nullptr;
    ~ResultHandle() { prc_result_free(ptr); }
};

struct GridHandle {
    prc_grid* ptr = nullptr;
    ~GridHandle() { prc_grid_free(ptr); }
};

int load_and_validate(const std::string& scene_path, SceneHandle& scene) {
    const int rc = prc_scene_load(scene_path.c_str(), &scene.ptr);
    if (rc != PRC_OK) return report(rc, "scene");
    char buf[4096];
    int violations = 0;
    prc_scene_validate(scene.ptr, buf, sizeof(buf), &violations);
    if (violations > 0) {
        std::cerr << "scene has " << violations << " violation(s):\n" << buf;
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pathrec: recycled-path volumetric renderer and inverse solver"};
    app.require_subcommand(1);

    std::string scene_path, gt_dir, out_dir = ".", store_dump, truth_grid;
    std::string est_path, true_path;
    uint64_t n_paths = 1000000, seed = 0;
    int workers = 0, max_bounces = 500, recycle_period = 30, stages = 1, iters = 100;
    double alpha = 1e7, carve_threshold = 0.02, carve_fill = -1.0;
    double init_kappa = 0.5, init_gamma = 10.0, truth_kappa = 0.0, truth_gamma = 0.0;
    double gamma_step_scale = 25.0;

    auto add_common = [&](CLI::App* cmd, bool needs_scene) {
        if (needs_scene) cmd->add_option("--scene", scene_path, "scene file")->required();
        cmd->add_option("--seed", seed, "rng seed");
        cmd->add_option("--workers", workers, "worker threads (PATHREC_WORKERS fallback)");
        cmd->add_option("--out,-o", out_dir, "output directory");
        cmd->add_option("--max-bounces", max_bounces, "path length cap");
    };

    auto* render = app.add_subcommand("render", "forward render all detectors");
    add_common(render, true);
    render->add_option("--paths", n_paths, "path count");
    render->add_option("--store-dump", store_dump, "dump the sampled path store");

    auto* reconstruct = app.add_subcommand("reconstruct", "scattering tomography");
    add_common(reconstruct, true);
    reconstruct->add_option("--paths", n_paths, "first-stage path count");
    reconstruct->add_option("--gt-dir", gt_dir, "ground-truth image directory")->required();
    reconstruct->add_option("--recycle-period", recycle_period, "iterations between resamples");
    reconstruct->add_option("--stages", stages, "schedule stage count");
    reconstruct->add_option("--alpha", alpha, "optimizer step size");
    reconstruct->add_option("--iters", iters, "total iterations");
    reconstruct->add_option("--carve-threshold", carve_threshold, "carving threshold fraction");
    reconstruct->add_option("--carve-fill", carve_fill, "initial extinction for carved voxels")
        ->required();
    reconstruct->add_option("--truth", truth_grid, "truth grid for metric logging");

    auto* reflect = app.add_subcommand("reflectometry", "surface parameter recovery");
    add_common(reflect, true);
    reflect->add_option("--paths", n_paths, "path count per stage");
    reflect->add_option("--gt-dir", gt_dir, "ground-truth image directory")->required();
    reflect->add_option("--recycle-period", recycle_period, "iterations between resamples");
    reflect->add_option("--alpha", alpha, "optimizer step size");
    reflect->add_option("--iters", iters, "total iterations");
    reflect->add_option("--init-kappa", init_kappa, "starting kappa_s");
    reflect->add_option("--init-gamma", init_gamma, "starting gamma");
    reflect->add_option("--truth-kappa", truth_kappa, "truth kappa_s for metric logging");
    reflect->add_option("--truth-gamma", truth_gamma, "truth gamma for metric logging");
    reflect->add_option("--gamma-step-scale", gamma_step_scale, "step multiplier for gamma");

    auto* metrics = app.add_subcommand("metrics", "compare two grids");
    metrics->add_option("--est", est_path, "estimated grid")->required();
    metrics->add_option("--true", true_path, "truth grid")->required();

    app.add_subcommand("selftest", "internal consistency checks");

    CLI11_PARSE(app, argc, argv);
    workers = resolve_workers(workers);

    if (app.got_subcommand("selftest")) {
        const int rc = prc_selftest();
        if (rc == PRC_OK) {
            std::cout << "selftest ok (" << prc_version() << ")\n";
            return 0;
        }
        return report(rc, "selftest");
    }

    if (app.got_subcommand("metrics")) {
        GridHandle est, tru;
        int rc = prc_grid_load(est_path.c_str(), &est.ptr);
        if (rc != PRC_OK) return report(rc, "metrics");
        rc = prc_grid_load(true_path.c_str(), &tru.ptr);
        if (rc != PRC_OK) return report(rc, "metrics");
        double eps = 0.0, delta = 0.0;
        rc = prc_grid_metrics(est.ptr, tru.ptr, &eps, &delta);
        if (rc != PRC_OK) return report(rc, "metrics");
        std::printf("eps=%.6g delta=%.6g\n", eps, delta);
        return 0;
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    SceneHandle scene;
    if (const int rc = load_and_validate(scene_path, scene)) return rc;

    if (app.got_subcommand("render")) {
        prc_render_opts opts{};
        opts.n_paths = n_paths;
        opts.seed = seed;
        opts.workers = workers;
        opts.max_bounces = max_bounces;
        opts.store_dump_path = store_dump.empty() ? nullptr : store_dump.c_str();
        ResultHandle res;
        const int rc = prc_render(scene.ptr, &opts, &res.ptr);
        if (rc != PRC_OK) return report(rc, "render");
        int n_det = 0;
        prc_scene_detector_count(scene.ptr, &n_det);
        for (int d = 0; d < n_det; ++d) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s/render_%03d.pfm", out_dir.c_str(), d);
            if (const int src = prc_result_save_pfm(res.ptr, d, name); src != PRC_OK)
                return report(src, "render output");
            std::snprintf(name, sizeof(name), "%s/render_%03d.pgm", out_dir.c_str(), d);
            prc_result_save_pgm(res.ptr, d, name);
        }
        write_manifest(out_dir, "render", scene_path, seed, n_paths, workers, "");
        return 0;
    }

    // reconstruct or reflectometry
    const bool tomo = app.got_subcommand("reconstruct");
    prc_reconstruct_opts opts{};
    opts.seed = seed;
    opts.n_paths = n_paths;
    opts.workers = workers;
    opts.max_bounces = max_bounces;
    opts.recycle_period = recycle_period;
    opts.max_iterations = iters;
    opts.n_stages = tomo ? stages : 1;
    opts.alpha = alpha;
    opts.carve_threshold = carve_threshold;
    opts.carve_fill = carve_fill;
    opts.init_kappa = init_kappa;
    opts.init_gamma = init_gamma;
    opts.gamma_step_scale = gamma_step_scale;
    opts.gt_dir = gt_dir.c_str();
    opts.out_dir = out_dir.c_str();
    opts.truth_grid = truth_grid.empty() ? nullptr : truth_grid.c_str();
    opts.truth_kappa = truth_kappa;
    opts.truth_gamma = truth_gamma;
    if (tomo && carve_fill <= 0.0) {
        std::cerr << "reconstruct: --carve-fill must be positive\n";
        return 2;
    }

    ResultHandle res;
    const int rc = prc_reconstruct(scene.ptr, &opts, &res.ptr);
    if (rc != PRC_OK) return report(rc, tomo ? "reconstruct" : "reflectometry");
    prc_result_save_csv(res.ptr, (out_dir + "/loss.csv").c_str());
    std::string extra;
    if (tomo) {
        const std::string grid_out = out_dir + "/reconstruction.vgrd";
        if (const int grc = prc_result_grid_save(res.ptr, grid_out.c_str()); grc != PRC_OK)
            return report(grc, "reconstruct output");
    } else {
        double kappa = 0.0, gamma = 0.0;
        prc_result_params(res.ptr, &kappa, &gamma);
        std::printf("kappa_s=%.8g gamma=%.8g\n", kappa, gamma);
        extra = "kappa_s=" + std::to_string(kappa) + "\ngamma=" + std::to_string(gamma) + "\n";
    }
    write_manifest(out_dir, tomo ? "reconstruct" : "reflectometry", scene_path, seed, n_paths,
                   workers, extra);
    return 0;
}
