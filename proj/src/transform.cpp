#include "stemalign/transform.hpp"

#include <cmath>

#include <Eigen/LU>

#include "stemalign/error.hpp"
#include "stemalign/parallel.hpp"

namespace stemalign {

RigidTransform RigidTransform::yaw(double phi, const Eigen::Vector3d& t) {
    RigidTransform T;
    double c = std::cos(phi), s = std::sin(phi);
    T.rotation << c, -s, 0.0,
                  s,  c, 0.0,
                  0.0, 0.0, 1.0;
    T.translation = t;
    return T;
}

bool RigidTransform::valid(double tol) const {
    Eigen::Matrix3d gram = rotation.transpose() * rotation;
    if (((gram - Eigen::Matrix3d::Identity()).array().abs() > tol).any()) return false;
    if (std::abs(rotation.determinant() - 1.0) > tol) return false;
    if (!translation.allFinite()) return false;
    return true;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& T) {
    if (cloud.empty()) throw ArgumentError("apply_transform: empty cloud");
    if (!T.valid()) throw ArgumentError("apply_transform: rotation block is not orthonormal with det +1");
    PointCloud out = cloud;
    const Eigen::Matrix3d R = T.rotation;
    const Eigen::Vector3d t = T.translation;
    parallel_chunks(out.points.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Eigen::Vector3d p = R * cloud.points[i].vec() + t;
            out.points[i] = Point3::from(p);
        }
    });
    return out;
}

RigidTransform compose(const RigidTransform& A, const RigidTransform& B) {
    if (!A.valid() || !B.valid()) throw ArgumentError("compose: invalid rigid transform input");
    RigidTransform C;
    C.rotation = A.rotation * B.rotation;
    C.translation = A.rotation * B.translation + A.translation;
    return C;
}

RigidTransform invert(const RigidTransform& T) {
    if (!T.valid()) throw ArgumentError("invert: invalid rigid transform input");
    RigidTransform inv;
    inv.rotation = T.rotation.transpose();
    inv.translation = -(inv.rotation * T.translation);
    return inv;
}

}  // namespace stemalign
