#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "pathrec/rng.hpp"
#include "pathrec/scene.hpp"
#include "pathrec/traverse.hpp"

namespace pathrec {

enum class EventKind : uint8_t { Emission, VolumeScatter, SurfaceReflect, Escape };

/// One path vertex. The incoming segment's voxel intersections live in the
/// owning record's span arena at [span_begin, span_end); the emission vertex
/// has an empty range.
struct VertexRec {
    Vec3 position;
    double cos_theta = 1.0;  // scattering angle cosine; Phong lobe cosine at surfaces
    double cos_in = 1.0;     // |n . omega_in| at surface vertices (area-measure pdf)
    double cos_out = 1.0;    // n . omega_out at surface vertices
    uint32_t span_begin = 0, span_end = 0;
    int32_t voxel = -1;      // grid voxel at the vertex, -1 when no medium
    int16_t surface = -1;    // surface index for reflection vertices
    int8_t species = -1;     // sampled species at volume scatter vertices
    EventKind kind = EventKind::Emission;
};

/// One local-estimation connection from a vertex to a detector pixel.
/// geom bundles visibility, the departure cosine at surfaces, and 1/r^2;
/// the connection's voxel intersections live at [span_begin, span_end) in
/// the record's le_span arena.
struct EventRec {
    uint32_t vertex = 0;
    uint16_t detector = 0;
    int32_t pixel = -1;
    double cos_le = 1.0;  // phase angle cosine (volume) or lobe cosine (surface)
    double geom = 0.0;
    uint32_t span_begin = 0, span_end = 0;
};

/// A complete light path with everything recycled evaluation needs; no ray
/// is ever re-cast against the stored record.
struct PathRecord {
    uint64_t stream = 0;  // original path index, keys the rng and the reduction order
    Vec3 dir0;
    std::vector<VertexRec> vertices;
    std::vector<VoxelSpan> spans;     // concatenated incoming-segment intersections
    std::vector<EventRec> events;     // ordered by vertex index
    std::vector<VoxelSpan> le_spans;  // concatenated local-estimation intersections
    bool truncated = false;

    /// Number of segments (path size).
    int size() const { return static_cast<int>(vertices.size()) - 1; }
};

/// The unknowns of either inverse problem, decoupled from the scene's
/// baseline values. `beta` holds the unknown species' extinction per voxel
/// (empty when the scene has no unknown species).
struct ParamSet {
    std::vector<double> beta;
    double kappa_s = 0.0;
    double gamma = 0.0;
};

ParamSet params_from_scene(const Scene& scene);

/// Per-voxel extinction of species j under the given parameters.
inline double species_extinction(const Scene& scene, const ParamSet& p, int j, int voxel) {
    if (scene.species[static_cast<size_t>(j)].unknown && !p.beta.empty())
        return p.beta[static_cast<size_t>(voxel)];
    return scene.species[static_cast<size_t>(j)].extinction.at(voxel);
}

/// Target-surface BRDF under the given parameters.
inline Brdf surface_brdf(const Scene& scene, const ParamSet& p, int surface) {
    const Surface& s = scene.surfaces[static_cast<size_t>(surface)];
    if (s.target) return Brdf::make_phong(p.kappa_s, p.gamma);
    return s.brdf;
}

struct Image {
    int rows = 0, cols = 0;
    std::vector<double> data;  // row-major

    static Image zeros(int r, int c) {
        Image im;
        im.rows = r;
        im.cols = c;
        im.data.assign(static_cast<size_t>(r) * c, 0.0);
        return im;
    }
    double& at(int row, int col) { return data[static_cast<size_t>(row) * cols + col]; }
    double at(int row, int col) const { return data[static_cast<size_t>(row) * cols + col]; }
};

using ImageSet = std::vector<Image>;  // one image per detector

/// exp of minus the optical depth between two points, integrated over the
/// voxels the segment crosses (portions outside the grid are vacuum).
double transmittance(const Scene& scene, const Vec3& x, const Vec3& y);

struct DistanceSample {
    enum class Kind : uint8_t { Scatter, Escaped, HitSurface } kind = Kind::Escaped;
    Vec3 point;
    double distance = 0.0;
    int surface = -1;
};

/// Nearest surface hit along the ray in (t_min, t_max); `exclude` suppresses
/// self-intersection with the surface the ray leaves from.
std::optional<std::pair<double, int>> intersect_surfaces(const Scene& scene, const Ray& ray,
                                                         double t_min, double t_max,
                                                         int exclude = -1);

/// Free-flight sampling: tau ~ Exp(1) against accumulated optical depth,
/// bounded by the nearest surface and the scene bounds.
DistanceSample sample_distance(const Scene& scene, const Ray& ray, Rng& rng, int exclude = -1);

/// Scattered direction at x: species index with P(j) proportional to beta_j,
/// then the species' phase function around omega_prev.
struct DirectionSample {
    Vec3 direction;
    double cos_theta;
    int species;
};
DirectionSample sample_direction(const Scene& scene, const Vec3& x, const Vec3& omega_prev,
                                 Rng& rng);

/// Full forward path from the light source; stream keys the per-path rng.
/// max_events >= 0 stops the walk after that many interaction vertices
/// (single-scatter oracle comparisons) without flagging truncation.
PathRecord trace_path(const Scene& scene, uint64_t seed, uint64_t stream, int max_bounces,
                      int max_events = -1);

/// Local-estimation density of a connection from x_b (arrived along
/// omega_prev) to one detector pixel; zero when the vertex projects outside
/// that pixel.
double local_estimate(const Scene& scene, const Vec3& x_b, const Vec3& omega_prev,
                      const Detector& detector, int pixel);

/// Path PDF of a stored record under the given parameters, in log space;
/// -inf when the path is impossible (zero extinction at a scatter vertex).
double path_pdf_log(const Scene& scene, const ParamSet& params, const PathRecord& path);

/// Measurement contribution of one stored record to one detector pixel
/// (sum over that record's local-estimation events), in plain space.
double path_contribution(const Scene& scene, const ParamSet& params, const PathRecord& path,
                         int detector, int pixel);

struct RenderOptions {
    uint64_t n_paths = 1;
    uint64_t seed = 0;
    int workers = 1;
    int max_bounces = 500;
    int max_scatter_events = -1;  // >=0 truncates event generation (oracle comparisons)
    bool keep_paths = false;
};

struct PathStore;  // pathstore.hpp

struct RenderResult {
    ImageSet images;
    uint64_t truncated_paths = 0;
    std::shared_ptr<PathStore> store;  // null unless keep_paths
};

/// Monte-Carlo forward render; one traced path contributes local-estimation
/// events to every detector. Bit-reproducible for fixed (seed, n_paths)
/// under any worker count.
RenderResult render(const Scene& scene, const RenderOptions& opt);

/// Estimator prefactor: 4*pi*L_e for point lights, A_face*L_e for the sun.
double emission_prefactor(const Scene& scene);

}  // namespace pathrec
