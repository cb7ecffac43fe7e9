#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mmray {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

// Coincidence tolerance for all geometric tests, meters.
inline constexpr double kGeomEps = 1e-6;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle in degrees to (-180, 180].
inline double wrap_deg(double a) {
    a = std::fmod(a, 360.0);
    if (a <= -180.0) a += 360.0;
    if (a > 180.0) a -= 360.0;
    return a;
}

/// Wrap an angle in degrees to [0, 360).
inline double wrap_deg_360(double a) {
    a = std::fmod(a, 360.0);
    if (a < 0.0) a += 360.0;
    return a;
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

inline Vec3 normalized(const Vec3& v) {
    double n = v.norm();
    if (n < 1e-300) throw std::invalid_argument("cannot normalize zero vector");
    return v / n;
}

using Point3 = Vec3;

/// Unit vector; norm checked to 1e-9 on construction.
struct Direction3 {
    Vec3 v;

    Direction3() : v(1.0, 0.0, 0.0) {}
    explicit Direction3(const Vec3& u) : v(u) {
        if (std::abs(v.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("Direction3 must be unit length");
    }
    static Direction3 from(const Vec3& any) { return Direction3(normalized(any)); }

    double x() const { return v.x; }
    double y() const { return v.y; }
    double z() const { return v.z; }
    operator const Vec3&() const { return v; }
};

/// Azimuth/elevation pair in degrees. Azimuth from +x toward +y in [0,360),
/// elevation from the horizontal plane in [-90, 90].
struct AzEl {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;

    static AzEl from_direction(const Vec3& d) {
        Vec3 u = normalized(d);
        AzEl a;
        a.azimuth_deg = wrap_deg_360(rad2deg(std::atan2(u.y, u.x)));
        a.elevation_deg = rad2deg(std::asin(std::clamp(u.z, -1.0, 1.0)));
        return a;
    }
    Vec3 direction() const {
        double az = deg2rad(azimuth_deg), el = deg2rad(elevation_deg);
        return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    }
};

/// Reflect p across the plane through q with unit normal n (Householder).
inline Point3 mirror_across_plane(const Point3& p, const Point3& q, const Vec3& n) {
    return p - 2.0 * dot(p - q, n) * n;
}

/// Orthonormal pair spanning the plane perpendicular to unit vector k.
/// The first vector is the projection of +z ("vertical"), with a fallback
/// near the poles.
inline std::pair<Vec3, Vec3> transverse_basis(const Vec3& k) {
    Vec3 zhat{0.0, 0.0, 1.0};
    Vec3 ev = zhat - dot(zhat, k) * k;
    if (ev.norm() < 1e-9) {
        Vec3 xhat{1.0, 0.0, 0.0};
        ev = xhat - dot(xhat, k) * k;
    }
    ev = normalized(ev);
    Vec3 eh = cross(k, ev);
    return {ev, eh};
}

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void expand(const Vec3& p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    void expand(const Aabb& b) { expand(b.lo); expand(b.hi); }
    bool valid() const { return lo.x <= hi.x; }
    Vec3 extent() const { return hi - lo; }
};

// Newell's method; magnitude is twice the polygon area.
inline Vec3 newell_normal(const std::vector<Point3>& verts) {
    Vec3 n{0, 0, 0};
    size_t m = verts.size();
    for (size_t i = 0; i < m; ++i) {
        const Point3& a = verts[i];
        const Point3& b = verts[(i + 1) % m];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    return n;
}

namespace detail {

// Dominant-axis projection of a polygon point to 2D.
inline std::pair<double, double> project2d(const Vec3& p, int drop_axis) {
    switch (drop_axis) {
        case 0: return {p.y, p.z};
        case 1: return {p.z, p.x};
        default: return {p.x, p.y};
    }
}

inline int dominant_axis(const Vec3& n) {
    double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
    if (ax >= ay && ax >= az) return 0;
    if (ay >= az) return 1;
    return 2;
}

}  // namespace detail

/// Point-in-polygon for a point already known to lie on the polygon's plane.
/// Crossing-number test on the dominant-axis projection. Points within
/// `edge_eps` (meters) of a boundary edge are classified as outside, which
/// keeps specular points strictly interior.
inline bool point_in_polygon(const Point3& p, const std::vector<Point3>& verts,
                             const Vec3& normal, double edge_eps = 1e-9) {
    int drop = detail::dominant_axis(normal);
    auto [px, py] = detail::project2d(p, drop);

    // Distance to boundary in 3D.
    size_t m = verts.size();
    for (size_t i = 0; i < m; ++i) {
        const Point3& a = verts[i];
        const Point3& b = verts[(i + 1) % m];
        Vec3 ab = b - a;
        double L2 = ab.norm2();
        double t = L2 > 0 ? std::clamp(dot(p - a, ab) / L2, 0.0, 1.0) : 0.0;
        if (distance(p, a + t * ab) <= edge_eps) return false;
    }

    bool inside = false;
    for (size_t i = 0, j = m - 1; i < m; j = i++) {
        auto [xi, yi] = detail::project2d(verts[i], drop);
        auto [xj, yj] = detail::project2d(verts[j], drop);
        if ((yi > py) != (yj > py)) {
            double xint = xj + (py - yj) / (yi - yj) * (xi - xj);
            if (px < xint) inside = !inside;
        }
    }
    return inside;
}

/// Intersection of segment [a,b] with the plane (q0, n). Returns parameter t
/// in [0,1] or nan if parallel / outside the segment.
inline double segment_plane_param(const Point3& a, const Point3& b, const Point3& q0,
                                  const Vec3& n) {
    Vec3 d = b - a;
    double denom = dot(d, n);
    if (std::abs(denom) < 1e-14) return std::numeric_limits<double>::quiet_NaN();
    double t = dot(q0 - a, n) / denom;
    if (t < 0.0 || t > 1.0) return std::numeric_limits<double>::quiet_NaN();
    return t;
}

}  // namespace mmray
