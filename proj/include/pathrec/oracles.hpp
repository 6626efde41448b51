#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "pathrec/gradient.hpp"

namespace pathrec {
namespace oracles {

using Fn1D = std::function<double(double)>;

/// Midpoint rule over N equal partitions of [0,1].
double riemann_integrate(const Fn1D& f, int n);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

McEstimate mc_uniform(const Fn1D& f, int n, Rng& rng);

/// Importance sampling with proposal density mu and its inverse-CDF sampler.
McEstimate mc_importance(const Fn1D& f, const Fn1D& mu, const Fn1D& sample_inv_cdf, int n,
                         Rng& rng);

/// Gauss-Legendre nodes/weights on [-1,1] (Newton iteration on the Legendre
/// recurrence).
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// Optical depth between two points by exact plane-crossing enumeration;
/// independent of the incremental grid walk used by transport.
double optical_depth_planes(const Scene& scene, const Vec3& x, const Vec3& y);

/// Deterministic quadrature of the single-scatter term along every pixel's
/// line of sight; sub-pixel tensor directions x radial Gauss-Legendre.
Image single_scatter_analytic(const Scene& scene, int detector, int radial_order,
                              int subpixel = 2);

/// Central finite differences of eval_fn over the selected unknowns with
/// step h(m) = 1e-4 * (1 + |m|).
SparseGradient finite_difference_grad(const std::function<double(const ParamSet&)>& eval_fn,
                                      const ParamSet& params, SparseGradient::Kind kind,
                                      const std::vector<int>& indices);

}  // namespace oracles
}  // namespace pathrec
