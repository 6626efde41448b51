#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathrec/brdf.hpp"
#include "pathrec/grid.hpp"
#include "pathrec/phase.hpp"
#include "pathrec/vec3.hpp"

namespace pathrec {

struct Aabb {
    Vec3 min, max;

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
               p.z <= max.z;
    }
};

/// One particle type: extinction field, space-invariant single-scattering
/// albedo, and phase function.
struct ParticleSpecies {
    std::string name;
    VoxelGridField extinction;
    double albedo = 1.0;
    PhaseFunction phase = PhaseFunction::rayleigh();
    bool unknown = false;  // tomography target
};

struct Detector {
    Vec3 position;
    Vec3 direction;  // unit view direction
    Vec3 up{0.0, 0.0, 1.0};
    int rows = 1, cols = 1;
    double fov = 1.0;  // full horizontal field of view [rad]

    // derived camera frame, set by finalize()
    Vec3 right_axis, up_axis;
    double half_w = 0.0, half_h = 0.0;

    void finalize();

    /// Flat pixel index (row * cols + col) whose frustum contains point p,
    /// or -1 when p projects outside the image.
    int pixel_of(const Vec3& p) const;

    /// Solid angle subtended by one pixel's frustum (exact integral of the
    /// tangent-plane area element).
    double pixel_solid_angle(int row, int col) const;
};

struct LightSource {
    enum class Kind : uint8_t { DirectionalSun, IsotropicPoint } kind = Kind::IsotropicPoint;
    Vec3 position;        // point light
    Vec3 direction;       // sun propagation direction (unit)
    double radiance = 1.0;
};

struct Sphere {
    Vec3 center;
    double radius = 1.0;
};

/// Axis-aligned rectangle: plane axis (0..2), plane coordinate, and the
/// rectangle extents on the remaining two axes (in axis order).
struct BoxFace {
    int axis = 2;
    double coord = 0.0;
    double lo[2] = {0.0, 0.0};
    double hi[2] = {1.0, 1.0};
    double normal_sign = 1.0;  // +1: normal points toward +axis
};

struct Surface {
    enum class Kind : uint8_t { Sphere, Face } kind = Kind::Sphere;
    Sphere sphere;
    BoxFace face;
    Brdf brdf;
    bool target = false;  // reflectometry unknown surface

    Vec3 normal_at(const Vec3& p) const;
};

struct Scene {
    LengthUnit unit = LengthUnit::Meters;
    Aabb bounds{};
    std::vector<ParticleSpecies> species;
    std::vector<Surface> surfaces;
    LightSource light;
    std::vector<Detector> detectors;

    bool has_medium() const { return !species.empty(); }
    const GridGeometry* grid() const { return species.empty() ? nullptr : &species[0].extinction.geom; }
    int unknown_species() const;  // -1 when none flagged
    int target_surface() const;   // -1 when none flagged

    /// Area of the sun-facing entry face (z-max face of the bounds).
    double sun_entry_area() const {
        return (bounds.max.x - bounds.min.x) * (bounds.max.y - bounds.min.y);
    }

    void finalize();  // derives detector frames
};

/// Total extinction at a point; optionally fills per-species values.
double extinction_at(const Scene& scene, const Vec3& x, std::span<double> per_species = {});

/// Effective single-scattering albedo of the mixture; 0 when beta_total = 0.
double effective_albedo(const Scene& scene, const Vec3& x);

/// Scattering-coefficient-weighted mixture phase function density.
/// Throws std::domain_error when the total scattering coefficient vanishes.
double mixture_phase_eval(const Scene& scene, const Vec3& x, double cos_theta);

struct SceneViolation {
    std::string what;
};

/// Collects every violated structural invariant; never throws.
std::vector<SceneViolation> validate_scene(const Scene& scene);

}  // namespace pathrec
