#include "pathrec/transport.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pathrec/parallel.hpp"
#include "pathrec/pathstore.hpp"

namespace pathrec {

namespace {

constexpr double kSelfHitEps = 1e-9;

double aabb_exit(const Aabb& box, const Ray& ray) {
    double t1 = std::numeric_limits<double>::infinity();
    const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
    const double d[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
    const double lo[3] = {box.min.x, box.min.y, box.min.z};
    const double hi[3] = {box.max.x, box.max.y, box.max.z};
    for (int a = 0; a < 3; ++a) {
        if (d[a] > 0.0)
            t1 = std::min(t1, (hi[a] - o[a]) / d[a]);
        else if (d[a] < 0.0)
            t1 = std::min(t1, (lo[a] - o[a]) / d[a]);
    }
    return t1;
}

std::optional<double> hit_sphere(const Sphere& s, const Ray& ray, double t_min, double t_max) {
    const Vec3 oc = ray.origin - s.center;
    const double b = dot(oc, ray.direction);
    const double c = dot(oc, oc) - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t < t_min) t = -b + sq;
    if (t < t_min || t > t_max) return std::nullopt;
    return t;
}

std::optional<double> hit_face(const BoxFace& f, const Ray& ray, double t_min, double t_max) {
    const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
    const double d[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
    const int a = f.axis;
    if (d[a] == 0.0) return std::nullopt;
    const double t = (f.coord - o[a]) / d[a];
    if (t < t_min || t > t_max) return std::nullopt;
    const int u = (a + 1) % 3, v = (a + 2) % 3;
    const double pu = o[u] + t * d[u];
    const double pv = o[v] + t * d[v];
    if (pu < f.lo[0] || pu > f.hi[0] || pv < f.lo[1] || pv > f.hi[1]) return std::nullopt;
    return t;
}

Vec3 uniform_sphere_dir(Rng& rng) {
    const double z = 1.0 - 2.0 * rng.next_double();
    const double phi = 2.0 * std::numbers::pi * rng.next_double();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

/// Outcome of one segment walk; voxel spans are appended to `spans`.
struct SegmentEnd {
    enum class Kind : uint8_t { Scatter, Surface, Escape } kind = Kind::Escape;
    Vec3 point;
    double distance = 0.0;
    int surface = -1;
    int voxel = -1;  // scatter voxel
};

SegmentEnd walk_segment(const Scene& scene, const Ray& ray, double tau,
                        std::vector<VoxelSpan>* spans, int exclude) {
    SegmentEnd out;
    double t_lim = aabb_exit(scene.bounds, ray);
    out.kind = SegmentEnd::Kind::Escape;
    if (auto hit = intersect_surfaces(scene, ray, kSelfHitEps, t_lim, exclude)) {
        t_lim = hit->first;
        out.kind = SegmentEnd::Kind::Surface;
        out.surface = hit->second;
    }
    out.distance = t_lim;
    out.point = ray.origin + ray.direction * t_lim;

    const GridGeometry* geom = scene.grid();
    if (!geom) return out;
    const auto& betas = scene.species;

    double od = 0.0;
    bool scattered = false;
    walk_voxels(*geom, ray, t_lim, [&](int v, double ta, double tb) {
        double beta = 0.0;
        for (const auto& sp : betas) beta += sp.extinction.at(v);
        const double seg_od = beta * (tb - ta);
        if (tau >= 0.0 && od + seg_od >= tau && beta > 0.0) {
            const double t_sc = ta + (tau - od) / beta;
            if (spans) spans->push_back({static_cast<uint32_t>(v), t_sc - ta});
            out.kind = SegmentEnd::Kind::Scatter;
            out.distance = t_sc;
            out.point = ray.origin + ray.direction * t_sc;
            out.surface = -1;
            out.voxel = v;
            scattered = true;
            return false;
        }
        od += seg_od;
        if (spans) spans->push_back({static_cast<uint32_t>(v), tb - ta});
        return true;
    });
    (void)scattered;
    return out;
}

}  // namespace

ParamSet params_from_scene(const Scene& scene) {
    ParamSet p;
    const int u = scene.unknown_species();
    if (u >= 0) p.beta = scene.species[static_cast<size_t>(u)].extinction.values;
    const int s = scene.target_surface();
    if (s >= 0 && scene.surfaces[static_cast<size_t>(s)].brdf.kind == Brdf::Kind::Phong) {
        p.kappa_s = scene.surfaces[static_cast<size_t>(s)].brdf.phong.kappa_s;
        p.gamma = scene.surfaces[static_cast<size_t>(s)].brdf.phong.gamma;
    }
    return p;
}

double transmittance(const Scene& scene, const Vec3& x, const Vec3& y) {
    const GridGeometry* geom = scene.grid();
    if (!geom) return 1.0;
    const Vec3 d = y - x;
    const double len = d.norm();
    if (len == 0.0) return 1.0;
    const Ray ray{x, d * (1.0 / len)};
    double od = 0.0;
    walk_voxels(*geom, ray, len, [&](int v, double ta, double tb) {
        double beta = 0.0;
        for (const auto& sp : scene.species) beta += sp.extinction.at(v);
        od += beta * (tb - ta);
        return true;
    });
    return std::exp(-od);
}

std::optional<std::pair<double, int>> intersect_surfaces(const Scene& scene, const Ray& ray,
                                                         double t_min, double t_max, int exclude) {
    std::optional<std::pair<double, int>> best;
    for (size_t s = 0; s < scene.surfaces.size(); ++s) {
        if (static_cast<int>(s) == exclude) continue;
        const Surface& sf = scene.surfaces[s];
        std::optional<double> t;
        if (sf.kind == Surface::Kind::Sphere)
            t = hit_sphere(sf.sphere, ray, t_min, t_max);
        else
            t = hit_face(sf.face, ray, t_min, t_max);
        if (t && (!best || *t < best->first)) best = {{*t, static_cast<int>(s)}};
    }
    return best;
}

DistanceSample sample_distance(const Scene& scene, const Ray& ray, Rng& rng, int exclude) {
    const double tau = -std::log1p(-rng.next_double());
    const SegmentEnd end = walk_segment(scene, ray, tau, nullptr, exclude);
    DistanceSample out;
    out.point = end.point;
    out.distance = end.distance;
    out.surface = end.surface;
    switch (end.kind) {
        case SegmentEnd::Kind::Scatter: out.kind = DistanceSample::Kind::Scatter; break;
        case SegmentEnd::Kind::Surface: out.kind = DistanceSample::Kind::HitSurface; break;
        case SegmentEnd::Kind::Escape: out.kind = DistanceSample::Kind::Escaped; break;
    }
    return out;
}

DirectionSample sample_direction(const Scene& scene, const Vec3& x, const Vec3& omega_prev,
                                 Rng& rng) {
    const size_t n = scene.species.size();
    double total = 0.0;
    double beta[16];
    if (n > 16) throw std::logic_error("sample_direction: too many species");
    for (size_t j = 0; j < n; ++j) {
        const int v = scene.species[j].extinction.geom.voxel_of(x);
        beta[j] = v >= 0 ? scene.species[j].extinction.at(v) : 0.0;
        total += beta[j];
    }
    if (total <= 0.0) throw std::logic_error("sample_direction: vacuum point");
    const double u = rng.next_double() * total;
    size_t j = 0;
    double acc = beta[0];
    while (j + 1 < n && u >= acc) acc += beta[++j];

    const auto [cos_theta, phi] = scene.species[j].phase.sample(rng);
    const Frame frame(omega_prev);
    DirectionSample out;
    out.direction = frame.from_local(cos_theta, phi);
    out.cos_theta = cos_theta;
    out.species = static_cast<int>(j);
    return out;
}

double local_estimate(const Scene& scene, const Vec3& x_b, const Vec3& omega_prev,
                      const Detector& detector, int pixel) {
    if (detector.pixel_of(x_b) != pixel) return 0.0;
    const Vec3 d = detector.position - x_b;
    const double r = d.norm();
    if (r == 0.0) return 0.0;
    const Vec3 w = d * (1.0 / r);
    if (intersect_surfaces(scene, {x_b, w}, kSelfHitEps, r - kSelfHitEps)) return 0.0;
    const double fp = mixture_phase_eval(scene, x_b, dot(omega_prev, w));
    return fp * transmittance(scene, x_b, detector.position) / (r * r);
}

namespace {

void add_events(const Scene& scene, PathRecord& rec, uint32_t vertex_index, const Vec3& dir_ref,
                int own_surface, const Vec3* surface_normal) {
    const VertexRec& vr = rec.vertices[vertex_index];
    const GridGeometry* geom = scene.grid();
    for (size_t d = 0; d < scene.detectors.size(); ++d) {
        const Detector& det = scene.detectors[d];
        const int pixel = det.pixel_of(vr.position);
        if (pixel < 0) continue;
        const Vec3 to_det = det.position - vr.position;
        const double r = to_det.norm();
        if (r <= 0.0) continue;
        const Vec3 w = to_det * (1.0 / r);
        double geom_factor = 1.0 / (r * r);
        if (surface_normal) {
            const double c_out = dot(*surface_normal, w);
            if (c_out <= 0.0) continue;
            geom_factor *= c_out;
        }
        if (intersect_surfaces(scene, {vr.position, w}, kSelfHitEps, r - kSelfHitEps, own_surface))
            continue;
        EventRec ev;
        ev.vertex = vertex_index;
        ev.detector = static_cast<uint16_t>(d);
        ev.pixel = pixel;
        ev.cos_le = dot(dir_ref, w);
        ev.geom = geom_factor;
        ev.span_begin = static_cast<uint32_t>(rec.le_spans.size());
        if (geom) {
            walk_voxels(*geom, {vr.position, w}, r, [&](int v, double ta, double tb) {
                rec.le_spans.push_back({static_cast<uint32_t>(v), tb - ta});
                return true;
            });
        }
        ev.span_end = static_cast<uint32_t>(rec.le_spans.size());
        rec.events.push_back(ev);
    }
}

}  // namespace

PathRecord trace_path(const Scene& scene, uint64_t seed, uint64_t stream, int max_bounces,
                      int max_events) {
    Rng rng(seed, stream);
    PathRecord rec;
    rec.stream = stream;

    Vec3 pos, dir;
    if (scene.light.kind == LightSource::Kind::IsotropicPoint) {
        pos = scene.light.position;
        dir = uniform_sphere_dir(rng);
    } else {
        const double u = rng.next_double(), v = rng.next_double();
        pos = {scene.bounds.min.x + u * (scene.bounds.max.x - scene.bounds.min.x),
               scene.bounds.min.y + v * (scene.bounds.max.y - scene.bounds.min.y),
               scene.bounds.max.z};
        dir = scene.light.direction;
    }
    rec.dir0 = dir;

    const GridGeometry* geom = scene.grid();
    VertexRec v0;
    v0.position = pos;
    v0.kind = EventKind::Emission;
    if (geom) v0.voxel = geom->voxel_of(pos);
    rec.vertices.push_back(v0);

    int cur_surface = -1;
    int interactions = 0;
    for (;;) {
        const double tau = scene.has_medium() ? -std::log1p(-rng.next_double()) : -1.0;
        const uint32_t span_begin = static_cast<uint32_t>(rec.spans.size());
        const SegmentEnd end = walk_segment(scene, {pos, dir}, tau, &rec.spans, cur_surface);

        VertexRec vr;
        vr.position = end.point;
        vr.span_begin = span_begin;
        vr.span_end = static_cast<uint32_t>(rec.spans.size());
        if (geom) vr.voxel = end.voxel >= 0 ? end.voxel : geom->voxel_of(end.point);

        if (end.kind == SegmentEnd::Kind::Escape) {
            vr.kind = EventKind::Escape;
            rec.vertices.push_back(vr);
            break;
        }
        const bool budget_hit = interactions >= max_bounces ||
                                (max_events >= 0 && interactions >= max_events);
        if (budget_hit) {
            vr.kind = EventKind::Escape;
            rec.vertices.push_back(vr);
            rec.truncated = interactions >= max_bounces;
            break;
        }
        ++interactions;

        if (end.kind == SegmentEnd::Kind::Scatter) {
            vr.kind = EventKind::VolumeScatter;
            const uint32_t vi = static_cast<uint32_t>(rec.vertices.size());
            rec.vertices.push_back(vr);
            add_events(scene, rec, vi, dir, -1, nullptr);
            const DirectionSample ds = sample_direction(scene, end.point, dir, rng);
            rec.vertices[vi].cos_theta = ds.cos_theta;
            rec.vertices[vi].species = static_cast<int8_t>(ds.species);
            dir = ds.direction;
            cur_surface = -1;
        } else {
            const int s = end.surface;
            Vec3 n = scene.surfaces[static_cast<size_t>(s)].normal_at(end.point);
            if (dot(n, dir) > 0.0) n = n * -1.0;  // face the incoming ray
            const Vec3 wr = dir - n * (2.0 * dot(dir, n));  // mirror direction
            vr.kind = EventKind::SurfaceReflect;
            vr.surface = static_cast<int16_t>(s);
            vr.cos_in = -dot(n, dir);
            const uint32_t vi = static_cast<uint32_t>(rec.vertices.size());
            rec.vertices.push_back(vr);
            add_events(scene, rec, vi, wr, s, &n);
            // cosine-hemisphere continuation around the facing normal
            const double u1 = rng.next_double(), u2 = rng.next_double();
            const double cos_n = std::sqrt(1.0 - u1);
            const Frame frame(n);
            dir = frame.from_local(cos_n, 2.0 * std::numbers::pi * u2);
            rec.vertices[vi].cos_out = cos_n;
            rec.vertices[vi].cos_theta = dot(wr, dir);
            cur_surface = s;
        }
        pos = rec.vertices.back().position;
    }
    return rec;
}

double emission_prefactor(const Scene& scene) {
    if (scene.light.kind == LightSource::Kind::IsotropicPoint)
        return kFourPi * scene.light.radiance;
    return scene.sun_entry_area() * scene.light.radiance;
}

double path_pdf_log(const Scene& scene, const ParamSet& params, const PathRecord& path) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    double lp = scene.light.kind == LightSource::Kind::IsotropicPoint
                    ? -std::log(kFourPi)
                    : -std::log(scene.sun_entry_area());
    const int B = path.size();
    for (int b = 1; b <= B; ++b) {
        const VertexRec& v = path.vertices[static_cast<size_t>(b)];
        // transmittance of the incoming segment
        for (uint32_t s = v.span_begin; s < v.span_end; ++s) {
            const VoxelSpan& sp = path.spans[s];
            double beta = 0.0;
            for (size_t j = 0; j < scene.species.size(); ++j)
                beta += species_extinction(scene, params, static_cast<int>(j),
                                           static_cast<int>(sp.voxel));
            lp -= beta * sp.length;
        }
        if (b == B) break;  // terminal vertex: transmittance only
        const Vec3 seg = v.position - path.vertices[static_cast<size_t>(b - 1)].position;
        const double r2 = dot(seg, seg);
        if (v.kind == EventKind::VolumeScatter) {
            double num = 0.0;
            for (size_t j = 0; j < scene.species.size(); ++j) {
                const double bj =
                    species_extinction(scene, params, static_cast<int>(j), v.voxel);
                num += bj * scene.species[j].phase.eval(v.cos_theta);
            }
            if (num <= 0.0) return neg_inf;
            lp += std::log(num) - std::log(r2);
        } else {  // surface
            lp += std::log(v.cos_out / std::numbers::pi) + std::log(v.cos_in) - std::log(r2);
        }
    }
    return lp;
}

double path_contribution(const Scene& scene, const ParamSet& params, const PathRecord& path,
                         int detector, int pixel) {
    // Per-event estimator value: measurement contribution of each event
    // divided by the sampling density of its prefix, with shared geometry
    // cancelled. Summed over the record's events landing in the pixel.
    EvalOptions opt;
    PathStore one;
    one.records.push_back(path);
    one.records[0].stream = 0;
    one.rebuild_index();
    one.ref_params = params;
    EvalResult res = evaluate_store(scene, one, params, opt);
    const Image& im = res.images[static_cast<size_t>(detector)];
    return im.data[static_cast<size_t>(pixel)];
}

RenderResult render(const Scene& scene, const RenderOptions& opt) {
    if (opt.n_paths == 0) throw std::invalid_argument("render: n_paths must be >= 1");
    const size_t n = static_cast<size_t>(opt.n_paths);
    const size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;

    RenderResult out;
    const ParamSet params = params_from_scene(scene);
    if (opt.keep_paths) {
        out.store = std::make_shared<PathStore>();
        out.store->records.resize(n);
        out.store->seed = opt.seed;
        out.store->ref_params = params;
    }

    std::vector<ImageSet> partials(n_chunks);
    std::vector<uint64_t> trunc(n_chunks, 0);

    parallel_chunks(n, opt.workers, [&](size_t c, size_t b, size_t e) {
        PathStore chunk;
        chunk.ref_params = params;
        chunk.records.reserve(e - b);
        for (size_t i = b; i < e; ++i) {
            chunk.records.push_back(
                trace_path(scene, opt.seed, i, opt.max_bounces, opt.max_scatter_events));
            if (chunk.records.back().truncated) ++trunc[c];
        }
        chunk.rebuild_index();
        EvalOptions eopt;
        eopt.normalize = false;
        EvalResult res = evaluate_store(scene, chunk, params, eopt);
        partials[c] = std::move(res.images);
        if (out.store)
            for (size_t i = b; i < e; ++i)
                out.store->records[i] = std::move(chunk.records[i - b]);
    });

    out.images.reserve(scene.detectors.size());
    for (const auto& det : scene.detectors) out.images.push_back(Image::zeros(det.rows, det.cols));
    for (size_t c = 0; c < n_chunks; ++c) {
        out.truncated_paths += trunc[c];
        for (size_t d = 0; d < out.images.size(); ++d)
            for (size_t p = 0; p < out.images[d].data.size(); ++p)
                out.images[d].data[p] += partials[c][d].data[p];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t d = 0; d < out.images.size(); ++d)
        for (auto& px : out.images[d].data) px *= inv_n;
    if (out.store) out.store->rebuild_index();
    return out;
}

}  // namespace pathrec
