#include <Eigen/Dense>
#include <cmath>

#include "stemalign/error.hpp"
#include "stemalign/stemmap.hpp"

namespace stemalign {

namespace {

struct Hypothesis {
    Eigen::Vector3d axis_origin;
    Eigen::Vector3d axis_dir;  // unit
    double radius;
};

// axis = n1 x n2; the axis center is where the two surface-normal lines meet
// in the plane orthogonal to the axis
bool hypothesis_from_normals(const Point3& p1, const Eigen::Vector3d& n1, const Point3& p2,
                             const Eigen::Vector3d& n2, Hypothesis& out) {
    Eigen::Vector3d a = n1.cross(n2);
    double len = a.norm();
    if (len < 1e-6) return false;
    a /= len;
    // orthonormal basis of the plane orthogonal to a
    Eigen::Vector3d e1 = a.unitOrthogonal();
    Eigen::Vector3d e2 = a.cross(e1);
    Eigen::Vector2d q1(e1.dot(p1.vec()), e2.dot(p1.vec()));
    Eigen::Vector2d q2(e1.dot(p2.vec()), e2.dot(p2.vec()));
    Eigen::Vector2d d1(e1.dot(n1), e2.dot(n1));
    Eigen::Vector2d d2(e1.dot(n2), e2.dot(n2));
    double denom = d1.x() * d2.y() - d1.y() * d2.x();
    if (std::abs(denom) < 1e-12) return false;
    // q1 + t d1 = q2 + s d2
    double t = ((q2.x() - q1.x()) * d2.y() - (q2.y() - q1.y()) * d2.x()) / denom;
    Eigen::Vector2d c = q1 + t * d1;
    out.axis_origin = e1 * c.x() + e2 * c.y();
    out.axis_dir = a;
    out.radius = (q1 - c).norm();
    return out.radius > 0.0 && std::isfinite(out.radius);
}

// fallback: vertical axis through the circumcenter of three XY projections
bool hypothesis_from_circumcircle(const Point3& p1, const Point3& p2, const Point3& p3,
                                  Hypothesis& out) {
    double ax = p1.x, ay = p1.y, bx = p2.x, by = p2.y, cx = p3.x, cy = p3.y;
    double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if (std::abs(d) < 1e-12) return false;
    double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
    double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    out.axis_origin = Eigen::Vector3d(ux, uy, 0.0);
    out.axis_dir = Eigen::Vector3d(0.0, 0.0, 1.0);
    out.radius = std::hypot(ax - ux, ay - uy);
    return out.radius > 0.0 && std::isfinite(out.radius);
}

// least-squares circle (Kasa) on the inliers projected orthogonally to the
// axis; tightens center and radius, direction stays as hypothesized
bool refine_circle(const std::vector<Point3>& points, const std::vector<std::size_t>& inliers,
                   Hypothesis& h) {
    Eigen::Vector3d e1 = h.axis_dir.unitOrthogonal();
    Eigen::Vector3d e2 = h.axis_dir.cross(e1);
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (std::size_t i : inliers) {
        double x = e1.dot(points[i].vec()), y = e2.dot(points[i].vec());
        Eigen::Vector3d row(2.0 * x, 2.0 * y, 1.0);
        A += row * row.transpose();
        b += row * (x * x + y * y);
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (!lu.isInvertible()) return false;
    Eigen::Vector3d sol = lu.solve(b);
    double r2 = sol.z() + sol.x() * sol.x() + sol.y() * sol.y();
    if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
    h.axis_origin = e1 * sol.x() + e2 * sol.y();
    h.radius = std::sqrt(r2);
    return true;
}

}  // namespace

std::optional<Cylinder> fit_cylinder_ransac(const std::vector<Point3>& points,
                                            const std::vector<Eigen::Vector3d>& normals,
                                            const RansacParams& params, Rng rng) {
    const std::size_t n = points.size();
    if (n < 3 || normals.size() != n)
        throw ArgumentError("fit_cylinder_ransac: need >= 3 points with aligned normals");

    auto count_inliers = [&](const Hypothesis& h, std::size_t beat) {
        AxisLine axis{Point3::from(h.axis_origin), h.axis_dir};
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            // not enough points left to beat the incumbent: stop counting
            if (cnt + (n - i) <= beat) return std::size_t{0};
            if (std::abs(point_line_distance(points[i], axis) - h.radius) <= params.distance_threshold)
                ++cnt;
        }
        return cnt;
    };

    const auto n32 = static_cast<std::uint32_t>(n);
    Hypothesis best{};
    std::size_t best_count = 0;
    for (int it = 0; it < params.max_iterations; ++it) {
        std::size_t i = rng.next_below(n32);
        std::size_t j = rng.next_below(n32);
        if (j == i) continue;
        Hypothesis h;
        bool ok = false;
        if (normals[i].squaredNorm() > 0.5 && normals[j].squaredNorm() > 0.5)
            ok = hypothesis_from_normals(points[i], normals[i], points[j], normals[j], h);
        if (!ok) {
            std::size_t k = rng.next_below(n32);
            if (k == i || k == j) continue;
            ok = hypothesis_from_circumcircle(points[i], points[j], points[k], h);
        }
        if (!ok) continue;
        if (h.radius < params.radius_min || h.radius > params.radius_max) continue;
        std::size_t cnt = count_inliers(h, best_count);
        if (cnt > best_count) {
            best_count = cnt;
            best = h;
        }
    }

    if (best_count == 0) return std::nullopt;
    if (static_cast<double>(best_count) < params.min_inlier_fraction * static_cast<double>(n))
        return std::nullopt;

    AxisLine raw_axis{Point3::from(best.axis_origin), best.axis_dir};
    std::vector<std::size_t> inliers;
    inliers.reserve(best_count);
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(point_line_distance(points[i], raw_axis) - best.radius) <= params.distance_threshold)
            inliers.push_back(i);

    Hypothesis refined = best;
    if (refine_circle(points, inliers, refined) && refined.radius >= params.radius_min &&
        refined.radius <= params.radius_max)
        best = refined;

    Cylinder cyl;
    cyl.axis = AxisLine{Point3::from(best.axis_origin), best.axis_dir};
    cyl.radius = best.radius;
    cyl.inlier_count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(point_line_distance(points[i], cyl.axis) - cyl.radius) <= params.distance_threshold)
            ++cyl.inlier_count;
    if (static_cast<double>(cyl.inlier_count) < params.min_inlier_fraction * static_cast<double>(n))
        return std::nullopt;
    return cyl;
}

}  // namespace stemalign
