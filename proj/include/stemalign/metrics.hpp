#pragma once

#include <vector>

#include "stemalign/point.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/transform.hpp"

namespace stemalign {

struct RegistrationErrors {
    double e_r = 0.0;  // radians
    double e_t = 0.0;  // meters
    double e_p = 0.0;  // meters
};

struct DetectionScores {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::size_t matched = 0, missed = 0, spurious = 0;
};

// geodesic angle arccos((tr(R Rt^T) - 1) / 2), argument clamped against rounding
double rotation_error(const Eigen::Matrix3d& R, const Eigen::Matrix3d& R_truth);

double translation_error(const Eigen::Vector3d& t, const Eigen::Vector3d& t_truth);

// mean per-point displacement between the two placements of src
double pointwise_error(const PointCloud& src, const RigidTransform& T, const RigidTransform& T_truth);

// same, but only the XY components of the displacement
double horizontal_pointwise_error(const PointCloud& src, const RigidTransform& T,
                                  const RigidTransform& T_truth);

RegistrationErrors registration_errors(const PointCloud& src, const RigidTransform& T,
                                       const RigidTransform& T_truth);

bool success(double e_p, double threshold = 0.5);
double success_rate(const std::vector<bool>& outcomes);

DetectionScores score_stem_map(const StemMap& detected, const StemMap& truth,
                               double match_radius = 0.5);

}  // namespace stemalign
