#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>  // cross()

namespace stemalign {

/// A 3D point in meters.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Eigen::Vector3d vec() const { return {x, y, z}; }
    static Point3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

    friend bool operator==(const Point3&, const Point3&) = default;
};

inline double squared_distance(const Point3& a, const Point3& b) {
    double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) {
    return std::sqrt(squared_distance(a, b));
}

using Rgb = std::array<std::uint8_t, 3>;

/// An ordered list of points with optional per-point attributes aligned
/// index-wise with `points`. Attribute vectors are either empty or have the
/// same length as `points`.
struct PointCloud {
    std::vector<Point3> points;
    std::vector<float> intensity;  // empty when absent
    std::vector<Rgb> color;        // empty when absent

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    bool has_intensity() const { return !intensity.empty(); }
    bool has_color() const { return !color.empty(); }

    /// Attribute arrays, when present, must match the point count.
    bool attributes_consistent() const {
        return (intensity.empty() || intensity.size() == points.size()) &&
               (color.empty() || color.size() == points.size());
    }

    void reserve(std::size_t n) { points.reserve(n); }

    void push_back(const Point3& p) { points.push_back(p); }

    /// Copy point i of `src` (with its attributes) onto the back of this cloud.
    void append_from(const PointCloud& src, std::size_t i) {
        points.push_back(src.points[i]);
        if (src.has_intensity()) intensity.push_back(src.intensity[i]);
        if (src.has_color()) color.push_back(src.color[i]);
    }
};

/// An infinite line used as a cylinder-axis carrier.
struct AxisLine {
    Point3 origin;
    Eigen::Vector3d direction{0.0, 0.0, 1.0};  // unit length

    bool unit_direction(double tol = 1e-9) const {
        return std::abs(direction.norm() - 1.0) <= tol;
    }
};

/// Distance from point p to the line.
inline double point_line_distance(const Point3& p, const AxisLine& axis) {
    Eigen::Vector3d d = p.vec() - axis.origin.vec();
    return d.cross(axis.direction).norm();
}

}  // namespace stemalign
