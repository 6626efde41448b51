#include "pathrec/inverse.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "pathrec/io.hpp"

namespace pathrec {

double loss(const ImageSet& forward, const ImageSet& gt) {
    if (forward.size() != gt.size()) throw std::invalid_argument("loss: detector count mismatch");
    double acc = 0.0;
    for (size_t d = 0; d < forward.size(); ++d) {
        if (forward[d].data.size() != gt[d].data.size())
            throw std::invalid_argument("loss: image shape mismatch");
        for (size_t p = 0; p < forward[d].data.size(); ++p) {
            const double r = forward[d].data[p] - gt[d].data[p];
            acc += r * r;
        }
    }
    return 0.5 * acc;
}

namespace {

std::vector<double*> unknown_slots(ParamSet& p) {
    std::vector<double*> slots;
    if (!p.beta.empty()) {
        slots.reserve(p.beta.size());
        for (auto& b : p.beta) slots.push_back(&b);
    } else {
        slots.push_back(&p.kappa_s);
        slots.push_back(&p.gamma);
    }
    return slots;
}

}  // namespace

void adam_step(OptState& state, const SparseGradient& grad, const AdamConfig& config) {
    auto slots = unknown_slots(state.params);
    const size_t n = slots.size();
    if (state.m1.size() != n) state.m1.assign(n, 0.0);
    if (state.m2.size() != n) state.m2.assign(n, 0.0);
    ++state.t;
    const double c1 = 1.0 - std::pow(config.eta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(config.eta2, static_cast<double>(state.t));

    const bool phong = state.params.beta.empty();
    for (size_t i = 0; i < n; ++i) {
        const double g = grad.at(static_cast<int>(i));
        state.m1[i] = config.eta1 * state.m1[i] + (1.0 - config.eta1) * g;
        state.m2[i] = config.eta2 * state.m2[i] + (1.0 - config.eta2) * g * g;
        const double mhat = state.m1[i] / c1;
        const double vhat = state.m2[i] / c2;
        const double scale = i < config.step_scale.size() ? config.step_scale[i] : 1.0;
        *slots[i] -= config.alpha * scale * mhat / (std::sqrt(vhat) + config.eps_guard);
        if (!phong) {
            if (config.project_nonneg && *slots[i] < 0.0) *slots[i] = 0.0;
        }
    }
    if (phong) {
        state.params.kappa_s = std::clamp(state.params.kappa_s, 0.0, 1.0);
        state.params.gamma = std::max(state.params.gamma, 0.0);
    }
}

CarveResult space_carve(const Scene& scene, const ImageSet& gt, double threshold_fraction,
                        double fill_extinction) {
    if (scene.detectors.size() < 2)
        throw std::invalid_argument("space_carve: needs at least 2 detectors");
    const GridGeometry* geom = scene.grid();
    if (!geom) throw std::invalid_argument("space_carve: scene has no medium");

    std::vector<double> view_max(scene.detectors.size(), 0.0);
    for (size_t d = 0; d < gt.size(); ++d)
        for (double px : gt[d].data) view_max[d] = std::max(view_max[d], px);

    CarveResult out;
    const int V = geom->voxel_count();
    out.mask.assign(static_cast<size_t>(V), 0);
    out.initial.beta.assign(static_cast<size_t>(V), 0.0);
    for (int v = 0; v < V; ++v) {
        const Vec3 c = geom->voxel_center(v);
        bool occupied = true;
        for (size_t d = 0; d < scene.detectors.size(); ++d) {
            const int pixel = scene.detectors[d].pixel_of(c);
            if (pixel < 0 ||
                gt[d].data[static_cast<size_t>(pixel)] <= threshold_fraction * view_max[d]) {
                occupied = false;
                break;
            }
        }
        if (occupied) {
            out.mask[static_cast<size_t>(v)] = 1;
            out.initial.beta[static_cast<size_t>(v)] = fill_extinction;
        }
    }
    return out;
}

Metrics metrics(const std::vector<double>& estimate, const std::vector<double>& truth) {
    if (estimate.size() != truth.size())
        throw std::invalid_argument("metrics: dimension mismatch");
    double diff = 0.0, nt = 0.0, ne = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        diff += std::abs(truth[i] - estimate[i]);
        nt += std::abs(truth[i]);
        ne += std::abs(estimate[i]);
    }
    if (nt == 0.0) throw std::invalid_argument("metrics: zero-norm truth");
    return {diff / nt, (nt - ne) / nt};
}

ImageSet downsample_images(const ImageSet& images, int rows, int cols) {
    ImageSet out;
    out.reserve(images.size());
    for (const auto& im : images) {
        if (im.rows == rows && im.cols == cols) {
            out.push_back(im);
            continue;
        }
        Image coarse = Image::zeros(rows, cols);
        for (int r = 0; r < im.rows; ++r) {
            const int cr = r * rows / im.rows;
            for (int c = 0; c < im.cols; ++c)
                coarse.at(cr, c * cols / im.cols) += im.at(r, c);
        }
        out.push_back(std::move(coarse));
    }
    return out;
}

namespace {

std::vector<double> unknown_vector(const ParamSet& p) {
    if (!p.beta.empty()) return p.beta;
    return {p.kappa_s, p.gamma};
}

/// Writes the current unknowns into the scene copy so fresh tracing happens
/// under the iterate.
void bind_params(Scene& scene, const ParamSet& p) {
    const int u = scene.unknown_species();
    if (u >= 0 && !p.beta.empty())
        scene.species[static_cast<size_t>(u)].extinction.values = p.beta;
    const int s = scene.target_surface();
    if (s >= 0) scene.surfaces[static_cast<size_t>(s)].brdf = Brdf::make_phong(p.kappa_s, p.gamma);
}

}  // namespace

ReconstructResult reconstruct(const Scene& scene, const ImageSet& gt, ParamSet initial,
                              const ReconstructOptions& opt) {
    if (opt.schedule.stages.empty())
        throw std::invalid_argument("reconstruct: schedule needs at least one stage");
    const auto t0 = std::chrono::steady_clock::now();

    Scene work = scene;
    ReconstructResult out;
    OptState state;
    state.params = std::move(initial);

    int stage = 0;
    int applied_stage = -1;
    int pending_stage = 0;
    int stage_start_iter = 0;
    ImageSet gt_stage;
    std::shared_ptr<PathStore> store;
    ImageSet forward;

    const int n_r = std::max(1, opt.schedule.recycle_period);
    for (int t = 0; t < opt.schedule.max_iterations; ++t) {
        const bool resample = t % n_r == 0;
        if (resample) {
            if (pending_stage != applied_stage) {
                stage = pending_stage;
                applied_stage = stage;
                stage_start_iter = t;
                const Stage& st = opt.schedule.stages[static_cast<size_t>(stage)];
                for (auto& det : work.detectors) {
                    if (st.rows > 0) det.rows = st.rows;
                    if (st.cols > 0) det.cols = st.cols;
                }
                work.finalize();
                const int rows = work.detectors[0].rows, cols = work.detectors[0].cols;
                gt_stage = downsample_images(gt, rows, cols);
            }
            bind_params(work, state.params);
            RenderOptions ropt;
            ropt.n_paths = opt.schedule.stages[static_cast<size_t>(stage)].n_paths;
            ropt.seed = opt.seed + 0x9E3779B97F4A7C15ull * (out.sampling_phases + 1);
            ropt.workers = opt.workers;
            ropt.keep_paths = true;
            RenderResult rr = render(work, ropt);
            out.truncated_paths += rr.truncated_paths;
            store = rr.store;
            sort_by_size(*store);
            store->generation = static_cast<uint64_t>(t);
            ++out.sampling_phases;
            state.ref_params = store->ref_params;
            forward = std::move(rr.images);
        } else {
            forward = recycled_render(work, *store, state.params, opt.workers);
        }

        const double loss_t = loss(forward, gt_stage);
        if (!std::isfinite(loss_t))
            throw std::runtime_error("reconstruct: non-finite loss at iteration " +
                                     std::to_string(t));
        state.loss_history.push_back(loss_t);

        IterationLog row;
        row.iter = t;
        row.time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.loss = loss_t;
        row.stage = stage;
        if (opt.truth) {
            const Metrics m = metrics(unknown_vector(state.params), unknown_vector(*opt.truth));
            row.eps = m.eps;
            row.delta = m.delta;
        }
        out.history.push_back(row);
        if (opt.on_iteration) opt.on_iteration(row);

        if (!opt.checkpoint_dir.empty() && opt.schedule.checkpoint_every > 0 &&
            (t + 1) % opt.schedule.checkpoint_every == 0) {
            if (!state.params.beta.empty() && work.grid()) {
                VoxelGridField f{*work.grid(), state.params.beta};
                save_grid(f, work.unit, opt.checkpoint_dir + "/checkpoint_" + std::to_string(t) +
                                            ".vgrd");
            }
            save_csv(out.history, opt.checkpoint_dir + "/loss.csv");
        }

        // residual-weighted gradient pass over the same store
        ImageSet residual = forward;
        for (size_t d = 0; d < residual.size(); ++d)
            for (size_t p = 0; p < residual[d].data.size(); ++p)
                residual[d].data[p] -= gt_stage[d].data[p];
        EvalOptions gopt;
        gopt.workers = opt.workers;
        gopt.pixel_weights = &residual;
        const SparseGradient grad = grad_forward(work, *store, state.params, gopt);
        adam_step(state, grad, opt.adam);

        // stage saturation: relative improvement within the window
        const int w = opt.schedule.saturation_window;
        const int since = t - stage_start_iter;
        if (pending_stage == stage && stage + 1 < static_cast<int>(opt.schedule.stages.size()) &&
            since >= w) {
            const double past = state.loss_history[static_cast<size_t>(t - w)];
            const double now = state.loss_history.back();
            if (past > 0.0 && (past - now) / past < opt.schedule.saturation_rel_improvement)
                pending_stage = stage + 1;
        }
    }

    out.params = std::move(state.params);
    return out;
}

}  // namespace pathrec
