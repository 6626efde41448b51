#include "pathrec/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pathrec/transport.hpp"

namespace pathrec {
namespace oracles {

double riemann_integrate(const Fn1D& f, int n) {
    if (n < 1) throw std::invalid_argument("riemann_integrate: n must be >= 1");
    const double h = 1.0 / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f((i + 0.5) * h);
    return acc * h;
}

McEstimate mc_uniform(const Fn1D& f, int n, Rng& rng) {
    if (n < 2) throw std::invalid_argument("mc_uniform: n must be >= 2");
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = f(rng.next_double());
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    return {mean, std::sqrt(var / n)};
}

McEstimate mc_importance(const Fn1D& f, const Fn1D& mu, const Fn1D& sample_inv_cdf, int n,
                         Rng& rng) {
    if (n < 2) throw std::invalid_argument("mc_importance: n must be >= 2");
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = sample_inv_cdf(rng.next_double());
        const double den = mu(u);
        const double fv = f(u);
        if (den <= 0.0 && fv != 0.0)
            throw std::logic_error("mc_importance: zero proposal density where f is nonzero");
        const double v = den > 0.0 ? fv / den : 0.0;
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    return {mean, std::sqrt(var / n)};
}

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    nodes.resize(static_cast<size_t>(order));
    weights.resize(static_cast<size_t>(order));
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<size_t>(i)] = -x;
        nodes[static_cast<size_t>(order - 1 - i)] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[static_cast<size_t>(i)] = w;
        weights[static_cast<size_t>(order - 1 - i)] = w;
    }
}

double optical_depth_planes(const Scene& scene, const Vec3& x, const Vec3& y) {
    const GridGeometry* geom = scene.grid();
    if (!geom) return 0.0;
    const Vec3 d = y - x;
    const double len = d.norm();
    if (len == 0.0) return 0.0;
    const Vec3 w = d * (1.0 / len);

    // clip to the grid slab
    double t0 = 0.0, t1 = len;
    const Vec3 lo = geom->bounds_min(), hi = geom->bounds_max();
    const double o[3] = {x.x, x.y, x.z}, dd[3] = {w.x, w.y, w.z};
    const double bmin[3] = {lo.x, lo.y, lo.z}, bmax[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a) {
        if (dd[a] == 0.0) {
            if (o[a] < bmin[a] || o[a] > bmax[a]) return 0.0;
            continue;
        }
        double ta = (bmin[a] - o[a]) / dd[a];
        double tb = (bmax[a] - o[a]) / dd[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t1 <= t0) return 0.0;

    std::vector<double> ts{t0, t1};
    for (int a = 0; a < 3; ++a) {
        if (dd[a] == 0.0) continue;
        const double vs = (a == 0) ? geom->voxel_size.x
                        : (a == 1) ? geom->voxel_size.y
                                   : geom->voxel_size.z;
        for (int k = 0; k <= geom->dims[a]; ++k) {
            const double t = (bmin[a] + k * vs - o[a]) / dd[a];
            if (t > t0 && t < t1) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());

    double od = 0.0;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        const double tm = 0.5 * (ts[i] + ts[i + 1]);
        const Vec3 p = x + w * tm;
        const int v = geom->voxel_of(p);
        if (v < 0) continue;
        double beta = 0.0;
        for (const auto& sp : scene.species) beta += sp.extinction.at(v);
        od += beta * (ts[i + 1] - ts[i]);
    }
    return od;
}

namespace {

double scat_num_scene(const Scene& scene, int voxel, double cos_theta) {
    double num = 0.0;
    for (const auto& sp : scene.species)
        num += sp.albedo * sp.extinction.at(voxel) * sp.phase.eval(cos_theta);
    return num;
}

}  // namespace

Image single_scatter_analytic(const Scene& scene, int detector, int radial_order, int subpixel) {
    const Detector& det = scene.detectors[static_cast<size_t>(detector)];
    const GridGeometry* geom = scene.grid();
    Image out = Image::zeros(det.rows, det.cols);
    if (!geom) return out;

    std::vector<double> rn, rw, sn, sw;
    gauss_legendre(radial_order, rn, rw);
    gauss_legendre(std::max(1, subpixel), sn, sw);

    const bool point = scene.light.kind == LightSource::Kind::IsotropicPoint;
    const double le = scene.light.radiance;
    const Vec3 sun_dir = scene.light.direction;

    const double du = 2.0 * det.half_w / det.cols;
    const double dv = 2.0 * det.half_h / det.rows;
    for (int r = 0; r < det.rows; ++r) {
        for (int c = 0; c < det.cols; ++c) {
            const double u0 = -det.half_w + c * du;
            const double v1 = det.half_h - r * dv;
            double pixel = 0.0;
            for (size_t iu = 0; iu < sn.size(); ++iu) {
                const double u = u0 + 0.5 * du * (sn[iu] + 1.0);
                for (size_t iv = 0; iv < sn.size(); ++iv) {
                    const double v = v1 - 0.5 * dv * (sn[iv] + 1.0);
                    const Vec3 w =
                        (det.direction + det.right_axis * u + det.up_axis * v).normalized();
                    const double jac = 0.25 * du * dv * sw[iu] * sw[iv] /
                                       std::pow(1.0 + u * u + v * v, 1.5);

                    // radial clip of the pixel ray to the grid
                    double t0 = 0.0, t1 = -1.0;
                    {
                        const Vec3 lo = geom->bounds_min(), hi = geom->bounds_max();
                        double a0 = 0.0, a1 = std::numeric_limits<double>::infinity();
                        const double o[3] = {det.position.x, det.position.y, det.position.z};
                        const double dd[3] = {w.x, w.y, w.z};
                        const double bmin[3] = {lo.x, lo.y, lo.z};
                        const double bmax[3] = {hi.x, hi.y, hi.z};
                        bool miss = false;
                        for (int a = 0; a < 3; ++a) {
                            if (dd[a] == 0.0) {
                                if (o[a] < bmin[a] || o[a] > bmax[a]) miss = true;
                                continue;
                            }
                            double ta = (bmin[a] - o[a]) / dd[a];
                            double tb = (bmax[a] - o[a]) / dd[a];
                            if (ta > tb) std::swap(ta, tb);
                            a0 = std::max(a0, ta);
                            a1 = std::min(a1, tb);
                        }
                        if (!miss && a1 > a0) {
                            t0 = a0;
                            t1 = a1;
                        }
                    }
                    if (t1 <= t0) continue;

                    double line = 0.0;
                    for (size_t it = 0; it < rn.size(); ++it) {
                        const double t = t0 + 0.5 * (t1 - t0) * (rn[it] + 1.0);
                        const Vec3 y = det.position + w * t;
                        const int vox = geom->voxel_of(y);
                        if (vox < 0) continue;
                        double weight, cos_le;
                        Vec3 entry;
                        if (point) {
                            const Vec3 dl = y - scene.light.position;
                            const double rl = dl.norm();
                            if (rl == 0.0) continue;
                            weight = 1.0 / (rl * rl);
                            cos_le = dot(dl * (1.0 / rl), w * -1.0);
                            entry = scene.light.position;
                        } else {
                            weight = 1.0 / std::abs(sun_dir.z);
                            cos_le = dot(sun_dir, w * -1.0);
                            const double s_top = (scene.bounds.max.z - y.z) / (-sun_dir.z);
                            entry = y - sun_dir * s_top;
                        }
                        const double t_light = std::exp(-optical_depth_planes(scene, entry, y));
                        const double t_det =
                            std::exp(-optical_depth_planes(scene, det.position, y));
                        line += 0.5 * (t1 - t0) * rw[it] * scat_num_scene(scene, vox, cos_le) *
                                t_light * t_det * weight;
                    }
                    pixel += jac * line;
                }
            }
            out.at(r, c) = le * pixel;
        }
    }
    return out;
}

SparseGradient finite_difference_grad(const std::function<double(const ParamSet&)>& eval_fn,
                                      const ParamSet& params, SparseGradient::Kind kind,
                                      const std::vector<int>& indices) {
    SparseGradient out;
    out.kind = kind;
    for (int idx : indices) {
        ParamSet p = params;
        double* slot = nullptr;
        if (kind == SparseGradient::Kind::Tomography)
            slot = &p.beta[static_cast<size_t>(idx)];
        else
            slot = idx == 0 ? &p.kappa_s : &p.gamma;
        const double m = *slot;
        const double h = 1e-4 * (1.0 + std::abs(m));
        *slot = m + h;
        const double fp = eval_fn(p);
        *slot = m - h;
        const double fm = eval_fn(p);
        out.add(idx, (fp - fm) / (2.0 * h));
    }
    return out;
}

}  // namespace oracles
}  // namespace pathrec
