#pragma once

#include <Eigen/Core>

#include "stemalign/point.hpp"

namespace stemalign {

/// A rigid motion p -> R*p + t. The rotation block must be orthonormal with
/// det +1 (checked by valid(); ops that consume a transform reject invalid
/// inputs).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
        RigidTransform T;
        T.rotation = m.block<3, 3>(0, 0);
        T.translation = m.block<3, 1>(0, 3);
        return T;
    }

    /// Rotation about Z by phi plus translation; the 4-DoF form. The
    /// structural zeros are exact by construction.
    static RigidTransform yaw(double phi, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.block<3, 3>(0, 0) = rotation;
        m.block<3, 1>(0, 3) = translation;
        return m;
    }

    Point3 apply(const Point3& p) const {
        return Point3::from(rotation * p.vec() + translation);
    }

    bool valid(double tol = 1e-9) const;
};

/// Transform every point; attributes are carried through unchanged.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& T);

/// (A ∘ B)(p) = A(B(p)).
RigidTransform compose(const RigidTransform& A, const RigidTransform& B);

RigidTransform invert(const RigidTransform& T);

}  // namespace stemalign
