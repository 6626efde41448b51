#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pathrec/grid.hpp"
#include "pathrec/vec3.hpp"

namespace pathrec {

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit
};

struct VoxelSpan {
    uint32_t voxel;
    double length;
};

/// Sparse voxel/length decomposition of one path segment.
struct SegmentIntersections {
    std::vector<VoxelSpan> spans;

    double total_length() const {
        double s = 0.0;
        for (const auto& e : spans) s += e.length;
        return s;
    }
};

/// Amanatides-Woo grid walk. Visits voxels in ray order with their entry and
/// exit distances; the callback returns false to stop early.
/// f signature: bool f(int voxel, double t_enter, double t_exit).
template <class F>
void walk_voxels(const GridGeometry& geom, const Ray& ray, double max_distance, F&& f);

/// Ordered voxel/length list for the segment [0, max_distance] along the ray,
/// clipped to the grid bounds.
SegmentIntersections traverse(const GridGeometry& geom, const Ray& ray, double max_distance);

// --- implementation -------------------------------------------------------

template <class F>
void walk_voxels(const GridGeometry& geom, const Ray& ray, double max_distance, F&& f) {
    if (max_distance <= 0.0) return;
    const Vec3 lo = geom.bounds_min(), hi = geom.bounds_max();

    // Clip the ray to the bounds (slab test).
    double t0 = 0.0, t1 = max_distance;
    const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
    const double d[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
    const double bmin[3] = {lo.x, lo.y, lo.z};
    const double bmax[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < bmin[a] || o[a] > bmax[a]) return;
            continue;
        }
        const double inv = 1.0 / d[a];
        double ta = (bmin[a] - o[a]) * inv;
        double tb = (bmax[a] - o[a]) * inv;
        if (ta > tb) std::swap(ta, tb);
        if (ta > t0) t0 = ta;
        if (tb < t1) t1 = tb;
        if (t0 > t1) return;
    }
    if (t1 <= t0) return;

    // Voxel of the entry point; nudge inward to pick a valid cell.
    int idx[3];
    double tmax[3], tdelta[3];
    int step[3];
    for (int a = 0; a < 3; ++a) {
        const double vs = (a == 0) ? geom.voxel_size.x : (a == 1) ? geom.voxel_size.y : geom.voxel_size.z;
        const double pa = o[a] + t0 * d[a];
        double r = (pa - bmin[a]) / vs;
        int i = static_cast<int>(r);
        if (i < 0) i = 0;
        if (i >= geom.dims[a]) i = geom.dims[a] - 1;
        // When sitting exactly on a boundary, pick the cell the ray is moving into.
        if (r - i == 0.0 && d[a] < 0.0 && i > 0) --i;
        idx[a] = i;
        if (d[a] > 0.0) {
            step[a] = 1;
            tdelta[a] = vs / d[a];
            tmax[a] = ((bmin[a] + (i + 1) * vs) - o[a]) / d[a];
        } else if (d[a] < 0.0) {
            step[a] = -1;
            tdelta[a] = -vs / d[a];
            tmax[a] = ((bmin[a] + i * vs) - o[a]) / d[a];
        } else {
            step[a] = 0;
            tdelta[a] = 0.0;
            tmax[a] = t1 + 1.0;
        }
    }

    double t = t0;
    while (t < t1) {
        int axis = 0;
        if (tmax[1] < tmax[axis]) axis = 1;
        if (tmax[2] < tmax[axis]) axis = 2;
        double t_next = tmax[axis];
        if (t_next > t1) t_next = t1;
        if (t_next > t) {
            const int v = geom.flat_index(idx[0], idx[1], idx[2]);
            if (!f(v, t, t_next)) return;
        }
        t = tmax[axis];
        idx[axis] += step[axis];
        if (idx[axis] < 0 || idx[axis] >= geom.dims[axis]) return;
        tmax[axis] += tdelta[axis];
    }
}

inline SegmentIntersections traverse(const GridGeometry& geom, const Ray& ray,
                                     double max_distance) {
    SegmentIntersections out;
    walk_voxels(geom, ray, max_distance, [&](int v, double ta, double tb) {
        out.spans.push_back({static_cast<uint32_t>(v), tb - ta});
        return true;
    });
    return out;
}

}  // namespace pathrec
