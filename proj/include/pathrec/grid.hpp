#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pathrec/vec3.hpp"

namespace pathrec {

enum class LengthUnit : uint8_t { Meters = 0, Kilometers = 1 };

/// Axis-aligned voxel lattice: dims, origin and per-voxel extent.
/// Voxels are indexed x-fastest: flat = ix + nx*(iy + ny*iz).
struct GridGeometry {
    std::array<int, 3> dims{1, 1, 1};
    Vec3 origin;
    Vec3 voxel_size{1.0, 1.0, 1.0};

    int voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    int flat_index(int ix, int iy, int iz) const {
        return ix + dims[0] * (iy + dims[1] * iz);
    }

    Vec3 bounds_min() const { return origin; }
    Vec3 bounds_max() const {
        return {origin.x + dims[0] * voxel_size.x, origin.y + dims[1] * voxel_size.y,
                origin.z + dims[2] * voxel_size.z};
    }

    bool contains(const Vec3& p) const {
        const Vec3 lo = bounds_min(), hi = bounds_max();
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }

    /// Flat voxel index containing p, or -1 when outside. Points exactly on the
    /// far boundary are clamped into the last voxel.
    int voxel_of(const Vec3& p) const {
        int idx[3];
        const Vec3 rel = p - origin;
        const double r[3] = {rel.x / voxel_size.x, rel.y / voxel_size.y, rel.z / voxel_size.z};
        for (int a = 0; a < 3; ++a) {
            int i = static_cast<int>(r[a]);
            if (r[a] < 0.0) return -1;
            if (i >= dims[a]) {
                if (r[a] <= static_cast<double>(dims[a])) i = dims[a] - 1;
                else return -1;
            }
            idx[a] = i;
        }
        return flat_index(idx[0], idx[1], idx[2]);
    }

    Vec3 voxel_center(int flat) const {
        const int ix = flat % dims[0];
        const int iy = (flat / dims[0]) % dims[1];
        const int iz = flat / (dims[0] * dims[1]);
        return {origin.x + (ix + 0.5) * voxel_size.x, origin.y + (iy + 0.5) * voxel_size.y,
                origin.z + (iz + 0.5) * voxel_size.z};
    }

    bool operator==(const GridGeometry&) const = default;
};

/// Discretized non-negative scalar field (one value per voxel, x-fastest).
struct VoxelGridField {
    GridGeometry geom;
    std::vector<double> values;

    static VoxelGridField constant(const GridGeometry& g, double value) {
        VoxelGridField f;
        f.geom = g;
        f.values.assign(static_cast<size_t>(g.voxel_count()), value);
        return f;
    }

    double at(int flat) const { return values[static_cast<size_t>(flat)]; }
};

}  // namespace pathrec
