#include "pathrec/pathstore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pathrec/parallel.hpp"

namespace pathrec {

namespace {

constexpr double kLogClamp = 700.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SpeciesCtx {
    const double* t;    // per-voxel extinction under the evaluated parameters
    const double* ref;  // per-voxel extinction under the sampling parameters
    double albedo;
    PhaseFunction phase = PhaseFunction::rayleigh();
};

struct EvalContext {
    const Scene* scene;
    std::vector<SpeciesCtx> sp;
    std::vector<double> beta_t_tot, beta_ref_tot, dbeta;
    std::vector<Brdf> brdf_t;
    int unknown = -1;
    int target = -1;
    double prefactor = 1.0;
    bool want_grad = false;
    bool legacy_score = false;
    const ImageSet* weights = nullptr;
};

EvalContext make_context(const Scene& scene, const ParamSet& t, const ParamSet& ref,
                         const EvalOptions& opt) {
    EvalContext ctx;
    ctx.scene = &scene;
    ctx.unknown = scene.unknown_species();
    ctx.target = scene.target_surface();
    ctx.prefactor = emission_prefactor(scene);
    ctx.want_grad = opt.want_grad;
    ctx.legacy_score = opt.legacy_score;
    ctx.weights = opt.pixel_weights;

    const size_t n = scene.species.size();
    ctx.sp.resize(n);
    for (size_t j = 0; j < n; ++j) {
        const auto& spj = scene.species[j];
        const bool unk = static_cast<int>(j) == ctx.unknown;
        ctx.sp[j].t = unk && !t.beta.empty() ? t.beta.data() : spj.extinction.values.data();
        ctx.sp[j].ref = unk && !ref.beta.empty() ? ref.beta.data() : spj.extinction.values.data();
        ctx.sp[j].albedo = spj.albedo;
        ctx.sp[j].phase = spj.phase;
    }
    if (const GridGeometry* g = scene.grid()) {
        const size_t V = static_cast<size_t>(g->voxel_count());
        ctx.beta_t_tot.assign(V, 0.0);
        ctx.beta_ref_tot.assign(V, 0.0);
        ctx.dbeta.assign(V, 0.0);
        for (size_t v = 0; v < V; ++v) {
            double bt = 0.0, br = 0.0;
            for (const auto& s : ctx.sp) {
                bt += s.t[v];
                br += s.ref[v];
            }
            ctx.beta_t_tot[v] = bt;
            ctx.beta_ref_tot[v] = br;
            ctx.dbeta[v] = bt - br;
        }
    }
    ctx.brdf_t.reserve(scene.surfaces.size());
    for (size_t s = 0; s < scene.surfaces.size(); ++s)
        ctx.brdf_t.push_back(surface_brdf(scene, t, static_cast<int>(s)));
    return ctx;
}

double scat_num_t(const EvalContext& ctx, int voxel, double cos_theta) {
    double num = 0.0;
    for (const auto& s : ctx.sp) num += s.albedo * s.t[voxel] * s.phase.eval(cos_theta);
    return num;
}

double ext_num_ref(const EvalContext& ctx, int voxel, double cos_theta) {
    double num = 0.0;
    for (const auto& s : ctx.sp) num += s.ref[voxel] * s.phase.eval(cos_theta);
    return num;
}

/// d/d(beta_unknown) of log scat_num at this voxel/angle.
double score_term(const EvalContext& ctx, int voxel, double cos_theta) {
    if (ctx.legacy_score) {
        const double bt = ctx.beta_t_tot[static_cast<size_t>(voxel)];
        return bt > 0.0 ? 1.0 / bt : 0.0;
    }
    const auto& u = ctx.sp[static_cast<size_t>(ctx.unknown)];
    const double num = scat_num_t(ctx, voxel, cos_theta);
    return num > 0.0 ? u.albedo * u.phase.eval(cos_theta) / num : 0.0;
}

struct Partial {
    std::vector<std::vector<double>> images;  // per detector, flat pixels
    std::vector<double> grad_beta;
    double grad_kappa = 0.0, grad_gamma = 0.0;
    uint64_t clamps = 0;
    double sum_r = 0.0;
};

void eval_record(const EvalContext& ctx, const PathRecord& rec, Partial& out,
                 std::vector<double>& wbuf) {
    const size_t n_events = rec.events.size();
    wbuf.assign(n_events, 0.0);
    const bool medium = !ctx.beta_t_tot.empty();

    double log_prefix = 0.0;
    bool dead = false;
    size_t ei = 0;
    const int B = rec.size();
    for (int b = 1; b <= B; ++b) {
        const VertexRec& v = rec.vertices[static_cast<size_t>(b)];
        if (!dead && medium) {
            double diff = 0.0;
            for (uint32_t s = v.span_begin; s < v.span_end; ++s)
                diff += ctx.dbeta[rec.spans[s].voxel] * rec.spans[s].length;
            log_prefix -= diff;
        }
        while (ei < n_events && rec.events[ei].vertex == static_cast<uint32_t>(b)) {
            const EventRec& e = rec.events[ei];
            if (!dead) {
                double logval = kNegInf;
                if (v.kind == EventKind::VolumeScatter) {
                    const double num = scat_num_t(ctx, v.voxel, e.cos_le);
                    const double den = ctx.beta_ref_tot[static_cast<size_t>(v.voxel)];
                    if (num > 0.0 && den > 0.0)
                        logval = log_prefix + std::log(num) - std::log(den);
                } else {
                    const double fr = ctx.brdf_t[static_cast<size_t>(v.surface)].eval(e.cos_le);
                    if (fr > 0.0) logval = log_prefix + std::log(fr);
                }
                if (logval != kNegInf) {
                    if (medium) {
                        double od = 0.0;
                        for (uint32_t s = e.span_begin; s < e.span_end; ++s)
                            od += ctx.beta_t_tot[rec.le_spans[s].voxel] * rec.le_spans[s].length;
                        logval -= od;
                    }
                    if (logval > kLogClamp || logval < -kLogClamp) {
                        logval = std::clamp(logval, -kLogClamp, kLogClamp);
                        ++out.clamps;
                    }
                    const double val = std::exp(logval) * e.geom * ctx.prefactor;
                    out.images[e.detector][static_cast<size_t>(e.pixel)] += val;
                    const double w =
                        ctx.weights
                            ? (*ctx.weights)[e.detector].data[static_cast<size_t>(e.pixel)]
                            : 1.0;
                    wbuf[ei] = val * w;
                }
            }
            ++ei;
        }
        if (dead || b == B) continue;
        if (v.kind == EventKind::VolumeScatter) {
            const double num = scat_num_t(ctx, v.voxel, v.cos_theta);
            const double den = ext_num_ref(ctx, v.voxel, v.cos_theta);
            if (num <= 0.0 || den <= 0.0) {
                dead = true;
                continue;
            }
            log_prefix += std::log(num) - std::log(den);
        } else if (v.kind == EventKind::SurfaceReflect) {
            const double fr = ctx.brdf_t[static_cast<size_t>(v.surface)].eval(v.cos_theta);
            if (fr <= 0.0) {
                dead = true;
                continue;
            }
            log_prefix += std::log(std::numbers::pi * fr);
        }
    }

    if (!ctx.want_grad) return;

    // Reverse pass with suffix sums: `after` holds the event-weight total of
    // vertices strictly beyond b, `from_here` includes b's own events.
    double after = 0.0;
    size_t er = n_events;  // one past the last unprocessed event
    for (int b = B; b >= 1; --b) {
        const VertexRec& v = rec.vertices[static_cast<size_t>(b)];
        double own = 0.0;
        while (er > 0 && rec.events[er - 1].vertex == static_cast<uint32_t>(b)) {
            --er;
            const EventRec& e = rec.events[er];
            const double w = wbuf[er];
            if (w == 0.0) continue;
            own += w;
            if (ctx.unknown >= 0) {
                for (uint32_t s = e.span_begin; s < e.span_end; ++s)
                    out.grad_beta[rec.le_spans[s].voxel] -= w * rec.le_spans[s].length;
                if (v.kind == EventKind::VolumeScatter)
                    out.grad_beta[static_cast<size_t>(v.voxel)] +=
                        w * score_term(ctx, v.voxel, e.cos_le);
            }
            if (ctx.target >= 0 && v.kind == EventKind::SurfaceReflect &&
                v.surface == ctx.target) {
                const PhongBrdf& ph = ctx.brdf_t[static_cast<size_t>(v.surface)].phong;
                const double fr = ph.eval(e.cos_le);
                if (fr > 0.0) {
                    out.grad_kappa += w * ph.d_kappa(e.cos_le) / fr;
                    out.grad_gamma += w * ph.d_gamma(e.cos_le) / fr;
                }
            }
        }
        const double from_here = after + own;
        if (from_here != 0.0 && ctx.unknown >= 0)
            for (uint32_t s = v.span_begin; s < v.span_end; ++s)
                out.grad_beta[rec.spans[s].voxel] -= from_here * rec.spans[s].length;
        if (after != 0.0) {
            if (v.kind == EventKind::VolumeScatter && ctx.unknown >= 0)
                out.grad_beta[static_cast<size_t>(v.voxel)] +=
                    after * score_term(ctx, v.voxel, v.cos_theta);
            if (ctx.target >= 0 && v.kind == EventKind::SurfaceReflect &&
                v.surface == ctx.target) {
                const PhongBrdf& ph = ctx.brdf_t[static_cast<size_t>(v.surface)].phong;
                const double fr = ph.eval(v.cos_theta);
                if (fr > 0.0) {
                    out.grad_kappa += after * ph.d_kappa(v.cos_theta) / fr;
                    out.grad_gamma += after * ph.d_gamma(v.cos_theta) / fr;
                }
            }
        }
        after = from_here;
    }
}

}  // namespace

void PathStore::rebuild_index() {
    by_stream.resize(records.size());
    std::iota(by_stream.begin(), by_stream.end(), 0u);
    std::sort(by_stream.begin(), by_stream.end(), [&](uint32_t a, uint32_t b) {
        return records[a].stream < records[b].stream;
    });
}

size_t PathStore::memory_bytes() const {
    size_t bytes = sizeof(PathStore) + by_stream.capacity() * sizeof(uint32_t) +
                   ref_params.beta.capacity() * sizeof(double);
    for (const auto& r : records)
        bytes += sizeof(PathRecord) + r.vertices.capacity() * sizeof(VertexRec) +
                 r.spans.capacity() * sizeof(VoxelSpan) + r.events.capacity() * sizeof(EventRec) +
                 r.le_spans.capacity() * sizeof(VoxelSpan);
    return bytes;
}

void sort_by_size(PathStore& store) {
    if (store.records.empty()) throw std::invalid_argument("sort_by_size: empty store");
    std::stable_sort(store.records.begin(), store.records.end(),
                     [](const PathRecord& a, const PathRecord& b) { return a.size() < b.size(); });
    store.sorted_flag = true;
    store.rebuild_index();
}

double correction_factor(const Scene& scene, const PathRecord& path, const ParamSet& params_t,
                         const ParamSet& params_ref) {
    EvalOptions opt;
    const EvalContext ctx = make_context(scene, params_t, params_ref, opt);
    double lr = 0.0;
    const int B = path.size();
    for (int b = 1; b <= B; ++b) {
        const VertexRec& v = path.vertices[static_cast<size_t>(b)];
        if (!ctx.dbeta.empty())
            for (uint32_t s = v.span_begin; s < v.span_end; ++s)
                lr -= ctx.dbeta[path.spans[s].voxel] * path.spans[s].length;
        if (b == B) break;
        if (v.kind == EventKind::VolumeScatter) {
            const double num = ext_num_ref(ctx, v.voxel, v.cos_theta);  // under ref
            double num_t = 0.0;
            for (const auto& s : ctx.sp)
                num_t += s.t[v.voxel] * s.phase.eval(v.cos_theta);
            if (num <= 0.0)
                throw std::logic_error("correction_factor: zero reference extinction at a vertex");
            if (num_t <= 0.0) return 0.0;
            lr += std::log(num_t) - std::log(num);
        }
        // surface vertices: the direction pdf is parameter-free
    }
    return std::exp(std::clamp(lr, -kLogClamp, kLogClamp));
}

std::vector<SegmentIntersections> segment_lengths(const PathRecord& path,
                                                  const GridGeometry& geom) {
    std::vector<SegmentIntersections> out;
    const int B = path.size();
    out.reserve(static_cast<size_t>(std::max(B, 0)));
    for (int b = 1; b <= B; ++b) {
        const Vec3& a = path.vertices[static_cast<size_t>(b - 1)].position;
        const Vec3& c = path.vertices[static_cast<size_t>(b)].position;
        const Vec3 d = c - a;
        const double len = d.norm();
        if (len == 0.0) {
            out.emplace_back();
            continue;
        }
        out.push_back(traverse(geom, {a, d * (1.0 / len)}, len));
    }
    return out;
}

EvalResult evaluate_store(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                          const EvalOptions& opt) {
    const EvalContext ctx = make_context(scene, params_t, store.ref_params, opt);
    const size_t n = store.records.size();
    const size_t n_chunks = n == 0 ? 0 : (n + kChunkSize - 1) / kChunkSize;
    const size_t V = ctx.beta_t_tot.size();

    std::vector<Partial> partials(n_chunks);
    parallel_chunks(n, opt.workers, [&](size_t c, size_t b, size_t e) {
        Partial& part = partials[c];
        part.images.resize(scene.detectors.size());
        for (size_t d = 0; d < scene.detectors.size(); ++d)
            part.images[d].assign(
                static_cast<size_t>(scene.detectors[d].rows) * scene.detectors[d].cols, 0.0);
        if (opt.want_grad && ctx.unknown >= 0) part.grad_beta.assign(V, 0.0);
        std::vector<double> wbuf;
        for (size_t pos = b; pos < e; ++pos) {
            const PathRecord& rec = store.records[store.by_stream[pos]];
            eval_record(ctx, rec, part, wbuf);
            if (opt.self_normalize)
                part.sum_r += correction_factor(scene, rec, params_t, store.ref_params);
        }
    });

    EvalResult out;
    out.images.reserve(scene.detectors.size());
    for (const auto& det : scene.detectors) out.images.push_back(Image::zeros(det.rows, det.cols));
    if (opt.want_grad && ctx.unknown >= 0) out.grad_beta.assign(V, 0.0);
    double sum_r = 0.0;
    for (size_t c = 0; c < n_chunks; ++c) {
        const Partial& part = partials[c];
        for (size_t d = 0; d < out.images.size(); ++d)
            for (size_t p = 0; p < out.images[d].data.size(); ++p)
                out.images[d].data[p] += part.images[d][p];
        for (size_t v = 0; v < out.grad_beta.size(); ++v) out.grad_beta[v] += part.grad_beta[v];
        out.grad_kappa += part.grad_kappa;
        out.grad_gamma += part.grad_gamma;
        out.clamp_events += part.clamps;
        sum_r += part.sum_r;
    }
    double scale = opt.normalize && n > 0 ? 1.0 / static_cast<double>(n) : 1.0;
    if (opt.self_normalize && n > 0) {
        out.mean_correction = sum_r / static_cast<double>(n);
        if (out.mean_correction > 0.0) scale /= out.mean_correction;
    }
    if (scale != 1.0) {
        for (auto& im : out.images)
            for (auto& px : im.data) px *= scale;
        for (auto& g : out.grad_beta) g *= scale;
        out.grad_kappa *= scale;
        out.grad_gamma *= scale;
    }
    return out;
}

ImageSet recycled_render(const Scene& scene, const PathStore& store, const ParamSet& params_t,
                         int workers) {
    EvalOptions opt;
    opt.workers = workers;
    return evaluate_store(scene, store, params_t, opt).images;
}

namespace {

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void put_spans(std::ofstream& os, const std::vector<VoxelSpan>& spans) {
    put<uint32_t>(os, static_cast<uint32_t>(spans.size()));
    for (const auto& s : spans) {
        put<uint32_t>(os, s.voxel);
        put<double>(os, s.length);
    }
}

std::vector<VoxelSpan> get_spans(std::ifstream& is) {
    const uint32_t n = get<uint32_t>(is);
    std::vector<VoxelSpan> spans(n);
    for (auto& s : spans) {
        s.voxel = get<uint32_t>(is);
        s.length = get<double>(is);
    }
    return spans;
}

}  // namespace

void save_store(const PathStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_store: cannot open " + path);
    os.write("PSTR", 4);
    put<uint32_t>(os, 1u);
    put<uint64_t>(os, store.records.size());
    put<uint64_t>(os, store.generation);
    put<uint64_t>(os, store.seed);
    put<uint8_t>(os, store.sorted_flag ? 1 : 0);
    put<uint64_t>(os, store.ref_params.beta.size());
    for (double b : store.ref_params.beta) put<double>(os, b);
    put<double>(os, store.ref_params.kappa_s);
    put<double>(os, store.ref_params.gamma);
    for (const auto& r : store.records) {
        put<uint64_t>(os, r.stream);
        put<uint8_t>(os, r.truncated ? 1 : 0);
        put<double>(os, r.dir0.x);
        put<double>(os, r.dir0.y);
        put<double>(os, r.dir0.z);
        put<uint32_t>(os, static_cast<uint32_t>(r.vertices.size()));
        for (const auto& v : r.vertices) {
            put<double>(os, v.position.x);
            put<double>(os, v.position.y);
            put<double>(os, v.position.z);
            put<double>(os, v.cos_theta);
            put<double>(os, v.cos_in);
            put<double>(os, v.cos_out);
            put<uint32_t>(os, v.span_begin);
            put<uint32_t>(os, v.span_end);
            put<int32_t>(os, v.voxel);
            put<int16_t>(os, v.surface);
            put<int8_t>(os, v.species);
            put<uint8_t>(os, static_cast<uint8_t>(v.kind));
        }
        put_spans(os, r.spans);
        put<uint32_t>(os, static_cast<uint32_t>(r.events.size()));
        for (const auto& e : r.events) {
            put<uint32_t>(os, e.vertex);
            put<uint16_t>(os, e.detector);
            put<int32_t>(os, e.pixel);
            put<double>(os, e.cos_le);
            put<double>(os, e.geom);
            put<uint32_t>(os, e.span_begin);
            put<uint32_t>(os, e.span_end);
        }
        put_spans(os, r.le_spans);
    }
    if (!os) throw std::runtime_error("save_store: write failure on " + path);
}

PathStore load_store(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_store: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PSTR", 4) != 0)
        throw std::runtime_error("load_store: bad magic at offset 0 in " + path);
    const uint32_t version = get<uint32_t>(is);
    if (version != 1) throw std::runtime_error("load_store: unsupported version");
    PathStore store;
    const uint64_t count = get<uint64_t>(is);
    store.generation = get<uint64_t>(is);
    store.seed = get<uint64_t>(is);
    store.sorted_flag = get<uint8_t>(is) != 0;
    store.ref_params.beta.resize(get<uint64_t>(is));
    for (auto& b : store.ref_params.beta) b = get<double>(is);
    store.ref_params.kappa_s = get<double>(is);
    store.ref_params.gamma = get<double>(is);
    store.records.resize(count);
    for (auto& r : store.records) {
        r.stream = get<uint64_t>(is);
        r.truncated = get<uint8_t>(is) != 0;
        r.dir0.x = get<double>(is);
        r.dir0.y = get<double>(is);
        r.dir0.z = get<double>(is);
        r.vertices.resize(get<uint32_t>(is));
        for (auto& v : r.vertices) {
            v.position.x = get<double>(is);
            v.position.y = get<double>(is);
            v.position.z = get<double>(is);
            v.cos_theta = get<double>(is);
            v.cos_in = get<double>(is);
            v.cos_out = get<double>(is);
            v.span_begin = get<uint32_t>(is);
            v.span_end = get<uint32_t>(is);
            v.voxel = get<int32_t>(is);
            v.surface = get<int16_t>(is);
            v.species = get<int8_t>(is);
            v.kind = static_cast<EventKind>(get<uint8_t>(is));
        }
        r.spans = get_spans(is);
        r.events.resize(get<uint32_t>(is));
        for (auto& e : r.events) {
            e.vertex = get<uint32_t>(is);
            e.detector = get<uint16_t>(is);
            e.pixel = get<int32_t>(is);
            e.cos_le = get<double>(is);
            e.geom = get<double>(is);
            e.span_begin = get<uint32_t>(is);
            e.span_end = get<uint32_t>(is);
        }
        r.le_spans = get_spans(is);
        if (!is) throw std::runtime_error("load_store: truncated file " + path);
    }
    store.rebuild_index();
    return store;
}

}  // namespace pathrec
