#include <cmath>
#include <limits>

#include "stemalign/error.hpp"
#include "stemalign/kdtree.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/registration.hpp"
#include "stemalign/voxel.hpp"

namespace stemalign {

void IcpParams::validate() const {
    if (!(max_correspondence_distance > 0.0)) throw ArgumentError("icp max_correspondence_distance must be > 0");
    if (max_iterations < 1) throw ArgumentError("icp max_iterations must be >= 1");
    if (!(convergence_delta > 0.0)) throw ArgumentError("icp convergence_delta must be > 0");
    if (!(working_voxel > 0.0)) throw ArgumentError("icp working_voxel must be > 0");
}

RigidTransform icp_refine(const PointCloud& src, const PointCloud& tgt, const RigidTransform& init,
                          const IcpParams& params, std::vector<double>* residual_trace) {
    params.validate();
    if (src.empty() || tgt.empty()) throw ArgumentError("icp_refine: empty cloud");
    if (!init.valid()) throw ArgumentError("icp_refine: invalid initial transform");

    PointCloud wsrc = voxel_downsample(src, params.working_voxel);
    PointCloud wtgt = voxel_downsample(tgt, params.working_voxel);
    SpatialIndex index(wtgt.points);
    const double max_d = params.max_correspondence_distance;
    const std::size_t n = wsrc.size();

    // per-source slots, refilled each sweep
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> hit(n);
    std::vector<double> dist(n);

    // `accepted` is the last transform whose pairing residual was measured
    // and did not increase; it is what the function returns, so the residual
    // sequence of the result is non-increasing by construction
    RigidTransform T = init;
    RigidTransform accepted = init;
    double prev_residual = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        const Eigen::Matrix3d R = T.rotation;
        const Eigen::Vector3d t = T.translation;
        parallel_chunks(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                Point3 p = Point3::from(R * wsrc.points[i].vec() + t);
                auto nb = index.knn(p, 1);
                if (!nb.empty() && nb[0].second <= max_d) {
                    hit[i] = nb[0].first;
                    dist[i] = nb[0].second;
                } else {
                    hit[i] = npos;
                }
            }
        });

        std::vector<std::pair<Point3, Point3>> pairs;
        pairs.reserve(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (hit[i] == npos) continue;
            pairs.emplace_back(wsrc.points[i], wtgt.points[hit[i]]);
            sum += dist[i];
        }
        if (pairs.empty()) {
            if (iter == 0)
                throw DataError("icp_refine: no point pairs within " + std::to_string(max_d) +
                                " m at the initial transform (no overlap)");
            break;
        }
        double residual = sum / static_cast<double>(pairs.size());
        if (residual > prev_residual) break;  // step rejected, keep `accepted`
        accepted = T;
        prev_residual = residual;
        if (residual_trace) residual_trace->push_back(residual);

        RigidTransform next;
        try {
            next = estimate_6dof(pairs);
        } catch (const DataError&) {
            break;  // pairing collapsed onto a line; current T is the answer
        }
        if ((next.matrix() - T.matrix()).norm() < params.convergence_delta) break;  // fixed point
        T = next;
    }
    return accepted;
}

}  // namespace stemalign
