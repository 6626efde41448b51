#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pathrec {

/// Phong lobe 1 - kappa_s + kappa_s * (w.w')^gamma; the dot product is
/// clamped to [0,1] before exponentiation (no backward lobe).
struct PhongBrdf {
    double kappa_s = 0.0;
    double gamma = 0.0;

    double eval(double cos_r) const {
        const double c = std::clamp(cos_r, 0.0, 1.0);
        return 1.0 - kappa_s + kappa_s * std::pow(c, gamma);
    }

    double d_kappa(double cos_r) const {
        const double c = std::clamp(cos_r, 0.0, 1.0);
        return -1.0 + std::pow(c, gamma);
    }

    double d_gamma(double cos_r) const {
        const double c = std::clamp(cos_r, 0.0, 1.0);
        if (c <= 0.0) return 0.0;  // x^g * ln x -> 0 for g > 0
        return kappa_s * std::pow(c, gamma) * std::log(c);
    }
};

/// Lambertian f_r = albedo / pi.
struct DiffuseBrdf {
    double albedo = 1.0;

    double eval() const { return albedo / std::numbers::pi; }
};

struct Brdf {
    enum class Kind : uint8_t { Diffuse, Phong } kind = Kind::Diffuse;
    DiffuseBrdf diffuse;
    PhongBrdf phong;

    static Brdf make_diffuse(double albedo) {
        Brdf b;
        b.kind = Kind::Diffuse;
        b.diffuse.albedo = albedo;
        return b;
    }
    static Brdf make_phong(double kappa_s, double gamma) {
        Brdf b;
        b.kind = Kind::Phong;
        b.phong = {kappa_s, gamma};
        return b;
    }

    /// cos_r: dot of incoming and outgoing directions (Phong argument);
    /// ignored by the diffuse lobe.
    double eval(double cos_r) const {
        return kind == Kind::Phong ? phong.eval(cos_r) : diffuse.eval();
    }
};

}  // namespace pathrec
