#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "stemalign/match.hpp"
#include "stemalign/point.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/transform.hpp"

namespace stemalign {

enum class RegistrationMode { six_dof, four_dof };

struct IcpParams {
    double max_correspondence_distance = 0.5;
    int max_iterations = 50;
    double convergence_delta = 1e-6;  // Frobenius norm of the 4x4 change
    double working_voxel = 0.05;
    void validate() const;
};

// Least-squares rigid fit src -> tgt (centroids + SVD of the cross
// covariance, reflection corrected). Throws on degenerate (collinear) input.
RigidTransform estimate_6dof(const std::vector<std::pair<Point3, Point3>>& corr);

// Eq. 7 fit: yaw and horizontal shift from the XY coordinates, t_z as the
// plain mean of the z differences. The structural zeros are exact.
RigidTransform estimate_4dof(const std::vector<std::pair<Point3, Point3>>& corr);

// residual_trace, when given, collects the mean pairing residual of every
// accepted iteration (a non-increasing sequence)
RigidTransform icp_refine(const PointCloud& src, const PointCloud& tgt, const RigidTransform& init,
                          const IcpParams& params, std::vector<double>* residual_trace = nullptr);

struct Diagnostics {
    std::size_t n_stems_src = 0, n_stems_tgt = 0;
    MatchStats match;
    std::size_t n_correspondences = 0;
    double residual_rms = 0.0;  // coarse fit residual over stem correspondences
    double t_map_src = 0.0, t_map_tgt = 0.0, t_match = 0.0, t_estimate = 0.0, t_icp = 0.0;  // seconds
};

struct RegisterResult {
    RigidTransform coarse;
    std::optional<RigidTransform> fine;
    StemMap stems_src, stems_tgt;
    CorrespondenceSet correspondences;
    Diagnostics diagnostics;
};

RegisterResult register_pair(const PointCloud& src, const PointCloud& tgt, RegistrationMode mode,
                             const StemMapParams& stem_params, const MatchParams& match_params,
                             const std::optional<IcpParams>& icp = std::nullopt);

}  // namespace stemalign
