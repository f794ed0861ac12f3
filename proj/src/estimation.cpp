#include <Eigen/Dense>
#include <cmath>

#include "stemalign/error.hpp"
#include "stemalign/registration.hpp"

namespace stemalign {

RigidTransform estimate_6dof(const std::vector<std::pair<Point3, Point3>>& corr) {
    if (corr.size() < 3) throw ArgumentError("estimate_6dof: need at least 3 correspondences");
    const double n = static_cast<double>(corr.size());
    Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
    for (const auto& [s, t] : corr) {
        cs += s.vec();
        ct += t.vec();
    }
    cs /= n;
    ct /= n;
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (const auto& [s, t] : corr) H += (s.vec() - cs) * (t.vec() - ct).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // collinear correspondences leave the rotation about the line free
    if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0)))
        throw DataError("estimate_6dof: degenerate correspondence geometry (collinear points)");
    Eigen::Matrix3d U = svd.matrixU(), V = svd.matrixV();
    Eigen::Matrix3d R = V * U.transpose();
    if (R.determinant() < 0.0) {
        V.col(2) *= -1.0;
        R = V * U.transpose();
    }
    RigidTransform T;
    T.rotation = R;
    T.translation = ct - R * cs;
    return T;
}

RigidTransform estimate_4dof(const std::vector<std::pair<Point3, Point3>>& corr) {
    if (corr.size() < 3) throw ArgumentError("estimate_4dof: need at least 3 correspondences");
    const double n = static_cast<double>(corr.size());
    double csx = 0.0, csy = 0.0, ctx = 0.0, cty = 0.0, tz = 0.0;
    for (const auto& [s, t] : corr) {
        csx += s.x;
        csy += s.y;
        ctx += t.x;
        cty += t.y;
        tz += t.z - s.z;
    }
    csx /= n;
    csy /= n;
    ctx /= n;
    cty /= n;
    tz /= n;

    // phi = atan2 of the cross/dot sums of the centered XY pairs
    double sum_cross = 0.0, sum_dot = 0.0, spread = 0.0;
    for (const auto& [s, t] : corr) {
        double ax = s.x - csx, ay = s.y - csy;
        double bx = t.x - ctx, by = t.y - cty;
        sum_cross += ax * by - ay * bx;
        sum_dot += ax * bx + ay * by;
        spread += ax * ax + ay * ay;
    }
    if (spread < 1e-18)
        throw DataError("estimate_4dof: degenerate correspondence geometry (coincident XY)");
    double phi = std::atan2(sum_cross, sum_dot);
    double c = std::cos(phi), s = std::sin(phi);
    double tx = ctx - (c * csx - s * csy);
    double ty = cty - (s * csx + c * csy);
    return RigidTransform::yaw(phi, Eigen::Vector3d(tx, ty, tz));
}

}  // namespace stemalign
