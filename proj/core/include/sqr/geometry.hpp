#pragma once

#include <array>
#include <cmath>

namespace sqr {

/// A point (or direction) in voxel coordinates.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend constexpr Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Point3 operator*(double s, Point3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(Point3 a, Point3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(Point3 a) { return std::sqrt(dot(a, a)); }

inline Point3 normalized(Point3 a) { return (1.0 / norm(a)) * a; }

inline bool is_finite(Point3 a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 rotation.
struct Rotation3 {
    std::array<Point3, 3> rows{Point3{1, 0, 0}, Point3{0, 1, 0}, Point3{0, 0, 1}};

    Point3 apply(Point3 p) const { return {dot(rows[0], p), dot(rows[1], p), dot(rows[2], p)}; }

    Point3 apply_transpose(Point3 p) const {
        return p.x * rows[0] + p.y * rows[1] + p.z * rows[2];
    }
};

}  // namespace sqr
