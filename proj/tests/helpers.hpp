#pragma once

#include <vector>

#include "pathrec/scene.hpp"

namespace pathrec::testing {

inline GridGeometry cube_grid(int n, double side = 1.0) {
    GridGeometry g;
    g.dims = {n, n, n};
    g.origin = {0.0, 0.0, 0.0};
    const double vs = side / n;
    g.voxel_size = {vs, vs, vs};
    return g;
}

inline Detector top_detector(int rows, int cols, double fov = 0.6) {
    Detector d;
    d.position = {0.5, 0.5, 3.0};
    d.direction = {0.0, 0.0, -1.0};
    d.up = {0.0, 1.0, 0.0};
    d.rows = rows;
    d.cols = cols;
    d.fov = fov;
    return d;
}

/// Unit cube filled with one species around a central point light.
inline Scene homogeneous_cube(double beta, double albedo, const PhaseFunction& phase,
                              int grid_n = 4, int rows = 8, int cols = 8) {
    Scene s;
    s.bounds = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    ParticleSpecies sp;
    sp.name = "medium";
    sp.extinction = VoxelGridField::constant(cube_grid(grid_n), beta);
    sp.albedo = albedo;
    sp.phase = phase;
    s.species.push_back(std::move(sp));
    s.light.kind = LightSource::Kind::IsotropicPoint;
    s.light.position = {0.5, 0.5, 0.5};
    s.light.radiance = 1.0;
    s.detectors.push_back(top_detector(rows, cols));
    s.finalize();
    return s;
}

/// Two-species cube: heterogeneous unknown cloud plus constant known air.
inline Scene two_species_cube(const std::vector<double>& cloud_beta, int grid_n,
                              double air_beta = 0.04, int rows = 8, int cols = 8) {
    Scene s;
    s.bounds = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    ParticleSpecies cloud;
    cloud.name = "cloud";
    cloud.extinction.geom = cube_grid(grid_n);
    cloud.extinction.values = cloud_beta;
    cloud.albedo = 0.99;
    cloud.phase = PhaseFunction::henyey_greenstein(0.5);
    cloud.unknown = true;
    s.species.push_back(std::move(cloud));
    ParticleSpecies air;
    air.name = "air";
    air.extinction = VoxelGridField::constant(cube_grid(grid_n), air_beta);
    air.albedo = 0.912;
    air.phase = PhaseFunction::rayleigh();
    s.species.push_back(std::move(air));
    s.light.kind = LightSource::Kind::IsotropicPoint;
    s.light.position = {0.5, 0.5, 0.5};
    s.light.radiance = 1.0;
    s.detectors.push_back(top_detector(rows, cols));
    s.finalize();
    return s;
}

/// Open-top box with diffuse walls and a Phong floor; point light and one
/// downward camera inside.
inline Scene phong_box(double kappa_s, double gamma, int rows = 16, int cols = 16,
                       double wall_albedo = 0.8) {
    Scene s;
    s.bounds = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};

    auto wall = [&](int axis, double coord, double sign) {
        Surface sf;
        sf.kind = Surface::Kind::Face;
        sf.face.axis = axis;
        sf.face.coord = coord;
        sf.face.lo[0] = 0.0;
        sf.face.lo[1] = 0.0;
        sf.face.hi[0] = 1.0;
        sf.face.hi[1] = 1.0;
        sf.face.normal_sign = sign;
        sf.brdf = Brdf::make_diffuse(wall_albedo);
        return sf;
    };
    Surface floor = wall(2, 0.0, 1.0);
    floor.brdf = Brdf::make_phong(kappa_s, gamma);
    floor.target = true;
    s.surfaces.push_back(floor);
    s.surfaces.push_back(wall(0, 0.0, 1.0));
    s.surfaces.push_back(wall(0, 1.0, -1.0));
    s.surfaces.push_back(wall(1, 0.0, 1.0));
    s.surfaces.push_back(wall(1, 1.0, -1.0));

    s.light.kind = LightSource::Kind::IsotropicPoint;
    s.light.position = {0.35, 0.5, 0.75};
    s.light.radiance = 1.0;

    Detector d;
    d.position = {0.65, 0.5, 0.9};
    d.direction = Vec3{-0.2, 0.0, -1.0}.normalized();
    d.up = {0.0, 1.0, 0.0};
    d.rows = rows;
    d.cols = cols;
    d.fov = 1.1;
    s.detectors.push_back(d);
    s.finalize();
    return s;
}

}  // namespace pathrec::testing
