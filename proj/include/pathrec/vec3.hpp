#pragma once

#include <array>
#include <cmath>

namespace pathrec {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    bool operator==(const Vec3&) const = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec3 normalized() const { return *this / norm(); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

/// Orthonormal basis with w as the third axis (Duff et al. branchless construction).
struct Frame {
    Vec3 u, v, w;

    explicit Frame(const Vec3& w_) : w(w_) {
        const double sign = std::copysign(1.0, w.z);
        const double a = -1.0 / (sign + w.z);
        const double b = w.x * w.y * a;
        u = {1.0 + sign * w.x * w.x * a, sign * b, -sign * w.x};
        v = {b, sign + w.y * w.y * a, -w.y};
    }

    /// Direction from spherical coordinates about w.
    Vec3 from_local(double cos_theta, double phi) const {
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
        return u * (sin_theta * std::cos(phi)) + v * (sin_theta * std::sin(phi)) + w * cos_theta;
    }
};

}  // namespace pathrec
