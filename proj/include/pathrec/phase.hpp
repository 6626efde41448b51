#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "pathrec/rng.hpp"

namespace pathrec {

inline constexpr double kFourPi = 4.0 * std::numbers::pi;

/// Scattering phase function over the unit sphere; depends only on
/// cos(theta) between the incoming and outgoing directions and integrates
/// to one over the sphere.
class PhaseFunction {
public:
    enum class Kind : uint8_t { HenyeyGreenstein, Rayleigh };

    static PhaseFunction henyey_greenstein(double g) { return PhaseFunction(Kind::HenyeyGreenstein, g); }
    static PhaseFunction rayleigh() { return PhaseFunction(Kind::Rayleigh, 0.0); }

    Kind kind() const { return kind_; }
    double g() const { return g_; }

    /// Density per steradian at cos(theta).
    double eval(double cos_theta) const {
        if (kind_ == Kind::Rayleigh)
            return 3.0 * (1.0 + cos_theta * cos_theta) / (16.0 * std::numbers::pi);
        const double denom = 1.0 + g_ * g_ - 2.0 * g_ * cos_theta;
        return (1.0 - g_ * g_) / (kFourPi * denom * std::sqrt(denom));
    }

    /// Inverse-CDF sample of cos(theta); u uniform on [0,1).
    double sample_cos(double u) const {
        if (kind_ == Kind::Rayleigh) return rayleigh_inverse_cdf(u);
        if (std::abs(g_) < 1e-9) return 2.0 * u - 1.0;
        const double s = (1.0 - g_ * g_) / (1.0 - g_ + 2.0 * g_ * u);
        double c = (1.0 + g_ * g_ - s * s) / (2.0 * g_);
        return std::clamp(c, -1.0, 1.0);
    }

    /// (cos theta, azimuth) pair; azimuth uniform on [0, 2pi).
    std::pair<double, double> sample(Rng& rng) const {
        const double c = sample_cos(rng.next_double());
        const double phi = 2.0 * std::numbers::pi * rng.next_double();
        return {c, phi};
    }

private:
    PhaseFunction(Kind k, double g) : kind_(k), g_(g) {}

    /// Solves x^3 + 3x + 4 - 8u = 0 (the Rayleigh CDF cubic) by Cardano.
    static double rayleigh_inverse_cdf(double u) {
        const double q = 4.0 - 8.0 * u;           // depressed cubic t^3 + 3t + q = 0
        const double disc = std::sqrt(q * q / 4.0 + 1.0);
        const double x = std::cbrt(-q / 2.0 + disc) + std::cbrt(-q / 2.0 - disc);
        return std::clamp(x, -1.0, 1.0);
    }

    Kind kind_;
    double g_;
};

}  // namespace pathrec
