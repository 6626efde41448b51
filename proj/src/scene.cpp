#include "pathrec/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace pathrec {

void Detector::finalize() {
    direction = direction.normalized();
    right_axis = cross(direction, up).normalized();
    up_axis = cross(right_axis, direction);
    half_w = std::tan(0.5 * fov);
    half_h = half_w * static_cast<double>(rows) / static_cast<double>(cols);
}

int Detector::pixel_of(const Vec3& p) const {
    const Vec3 w = p - position;
    const double depth = dot(w, direction);
    if (depth <= 0.0) return -1;
    const double u = dot(w, right_axis) / depth;
    const double v = dot(w, up_axis) / depth;
    if (u < -half_w || u >= half_w || v < -half_h || v >= half_h) return -1;
    int col = static_cast<int>((u + half_w) / (2.0 * half_w) * cols);
    int row = static_cast<int>((half_h - v) / (2.0 * half_h) * rows);
    if (col >= cols) col = cols - 1;
    if (row >= rows) row = rows - 1;
    return row * cols + col;
}

namespace {

// Integral of (1 + u^2 + v^2)^(-3/2) over [0,u] x [0,v].
double corner_solid_angle(double u, double v) {
    return std::atan(u * v / std::sqrt(1.0 + u * u + v * v));
}

}  // namespace

double Detector::pixel_solid_angle(int row, int col) const {
    const double du = 2.0 * half_w / cols;
    const double dv = 2.0 * half_h / rows;
    const double u0 = -half_w + col * du;
    const double u1 = u0 + du;
    const double v1 = half_h - row * dv;
    const double v0 = v1 - dv;
    return corner_solid_angle(u1, v1) - corner_solid_angle(u0, v1) - corner_solid_angle(u1, v0) +
           corner_solid_angle(u0, v0);
}

Vec3 Surface::normal_at(const Vec3& p) const {
    if (kind == Kind::Sphere) return (p - sphere.center).normalized();
    Vec3 n{0.0, 0.0, 0.0};
    if (face.axis == 0) n.x = face.normal_sign;
    else if (face.axis == 1) n.y = face.normal_sign;
    else n.z = face.normal_sign;
    return n;
}

int Scene::unknown_species() const {
    for (size_t j = 0; j < species.size(); ++j)
        if (species[j].unknown) return static_cast<int>(j);
    return -1;
}

int Scene::target_surface() const {
    for (size_t s = 0; s < surfaces.size(); ++s)
        if (surfaces[s].target) return static_cast<int>(s);
    return -1;
}

void Scene::finalize() {
    for (auto& d : detectors) d.finalize();
    if (light.kind == LightSource::Kind::DirectionalSun) light.direction = light.direction.normalized();
}

double extinction_at(const Scene& scene, const Vec3& x, std::span<double> per_species) {
    double total = 0.0;
    for (size_t j = 0; j < scene.species.size(); ++j) {
        const auto& sp = scene.species[j];
        const int v = sp.extinction.geom.voxel_of(x);
        if (v < 0) throw std::domain_error("extinction_at: point outside the grid");
        const double b = sp.extinction.at(v);
        if (j < per_species.size()) per_species[j] = b;
        total += b;
    }
    return total;
}

double effective_albedo(const Scene& scene, const Vec3& x) {
    double total = 0.0, scat = 0.0;
    for (const auto& sp : scene.species) {
        const int v = sp.extinction.geom.voxel_of(x);
        if (v < 0) throw std::domain_error("effective_albedo: point outside the grid");
        const double b = sp.extinction.at(v);
        total += b;
        scat += sp.albedo * b;
    }
    return total > 0.0 ? scat / total : 0.0;
}

double mixture_phase_eval(const Scene& scene, const Vec3& x, double cos_theta) {
    double scat = 0.0, num = 0.0;
    for (const auto& sp : scene.species) {
        const int v = sp.extinction.geom.voxel_of(x);
        if (v < 0) throw std::domain_error("mixture_phase_eval: point outside the grid");
        const double bs = sp.albedo * sp.extinction.at(v);
        scat += bs;
        num += bs * sp.phase.eval(cos_theta);
    }
    if (scat <= 0.0) throw std::domain_error("mixture_phase_eval: zero scattering coefficient");
    return num / scat;
}

std::vector<SceneViolation> validate_scene(const Scene& scene) {
    std::vector<SceneViolation> out;
    auto bad = [&](std::string msg) { out.push_back({std::move(msg)}); };

    if (scene.detectors.empty()) bad("scene has no detector");
    if (!(scene.bounds.max.x > scene.bounds.min.x && scene.bounds.max.y > scene.bounds.min.y &&
          scene.bounds.max.z > scene.bounds.min.z))
        bad("bounds box has non-positive extent");

    const GridGeometry* ref = scene.grid();
    for (size_t j = 0; j < scene.species.size(); ++j) {
        const auto& sp = scene.species[j];
        if (sp.albedo < 0.0 || sp.albedo > 1.0)
            bad("species '" + sp.name + "': albedo outside [0,1]");
        if (ref && !(sp.extinction.geom == *ref))
            bad("species '" + sp.name + "': grid geometry differs from species 0");
        if (sp.extinction.values.size() != static_cast<size_t>(sp.extinction.geom.voxel_count()))
            bad("species '" + sp.name + "': value count does not match dims");
        for (size_t v = 0; v < sp.extinction.values.size(); ++v) {
            const double b = sp.extinction.values[v];
            if (!(b >= 0.0) || !std::isfinite(b)) {
                bad("species '" + sp.name + "': negative or non-finite extinction at voxel " +
                    std::to_string(v));
                break;
            }
        }
        if (sp.phase.kind() == PhaseFunction::Kind::HenyeyGreenstein &&
            std::abs(sp.phase.g()) >= 1.0)
            bad("species '" + sp.name + "': |g| must be < 1");
    }

    int unknowns = 0;
    for (const auto& sp : scene.species) unknowns += sp.unknown ? 1 : 0;
    if (unknowns > 1) bad("more than one unknown species");

    int targets = 0;
    for (size_t s = 0; s < scene.surfaces.size(); ++s) {
        const auto& sf = scene.surfaces[s];
        targets += sf.target ? 1 : 0;
        if (sf.kind == Surface::Kind::Sphere && sf.sphere.radius <= 0.0)
            bad("surface " + std::to_string(s) + ": non-positive sphere radius");
        if (sf.kind == Surface::Kind::Face) {
            if (sf.face.axis < 0 || sf.face.axis > 2)
                bad("surface " + std::to_string(s) + ": face axis outside 0..2");
            if (sf.face.hi[0] <= sf.face.lo[0] || sf.face.hi[1] <= sf.face.lo[1])
                bad("surface " + std::to_string(s) + ": degenerate face rectangle");
            if (std::abs(sf.face.normal_sign) != 1.0)
                bad("surface " + std::to_string(s) + ": normal_sign must be +-1");
        }
        if (sf.brdf.kind == Brdf::Kind::Phong) {
            if (sf.brdf.phong.kappa_s < 0.0 || sf.brdf.phong.kappa_s > 1.0)
                bad("surface " + std::to_string(s) + ": kappa_s outside [0,1]");
            if (sf.brdf.phong.gamma < 0.0)
                bad("surface " + std::to_string(s) + ": gamma must be >= 0");
        } else {
            if (sf.brdf.diffuse.albedo < 0.0 || sf.brdf.diffuse.albedo > 1.0)
                bad("surface " + std::to_string(s) + ": diffuse albedo outside [0,1]");
        }
        if (sf.target && sf.brdf.kind != Brdf::Kind::Phong)
            bad("surface " + std::to_string(s) + ": target surface must carry a Phong lobe");
    }
    if (targets > 1) bad("more than one target surface");

    for (size_t d = 0; d < scene.detectors.size(); ++d) {
        const auto& det = scene.detectors[d];
        if (det.rows <= 0 || det.cols <= 0)
            bad("detector " + std::to_string(d) + ": non-positive pixel grid");
        if (!(det.fov > 0.0) || det.fov >= std::numbers::pi)
            bad("detector " + std::to_string(d) + ": fov must lie in (0, pi)");
        if (det.direction.norm() == 0.0)
            bad("detector " + std::to_string(d) + ": zero view direction");
        else if (cross(det.direction, det.up).norm() < 1e-12)
            bad("detector " + std::to_string(d) + ": up vector parallel to view direction");
    }

    if (scene.light.kind == LightSource::Kind::DirectionalSun &&
        scene.light.direction.norm() == 0.0)
        bad("sun light has zero direction");
    if (!(scene.light.radiance > 0.0)) bad("light radiance must be positive");

    return out;
}

}  // namespace pathrec
