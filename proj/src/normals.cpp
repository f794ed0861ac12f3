#include <Eigen/Dense>

#include "stemalign/error.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/stemmap.hpp"

namespace stemalign {

double verticality(const Eigen::Vector3d& normal) {
    if (std::abs(normal.norm() - 1.0) > 1e-6)
        throw ArgumentError("verticality: normal must be unit length");
    return 1.0 - std::abs(normal.z());
}

std::vector<Eigen::Vector3d> estimate_normals(const PointCloud& cloud, const SpatialIndex& index,
                                              double radius) {
    if (!(radius > 0.0)) throw ArgumentError("estimate_normals: radius must be > 0");
    std::vector<Eigen::Vector3d> normals(cloud.size(), Eigen::Vector3d::Zero());
    parallel_chunks(cloud.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto nb = index.radius_search(cloud.points[i], radius);
            if (nb.size() < 3) continue;  // zero sentinel stays
            Eigen::Vector3d mean = Eigen::Vector3d::Zero();
            for (std::size_t j : nb) mean += cloud.points[j].vec();
            mean /= static_cast<double>(nb.size());
            Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
            for (std::size_t j : nb) {
                Eigen::Vector3d d = cloud.points[j].vec() - mean;
                cov += d * d.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
            Eigen::Vector3d n = es.eigenvectors().col(0);  // smallest eigenvalue
            double len = n.norm();
            if (len < 1e-12) continue;
            n /= len;
            if (n.z() < 0.0 || (n.z() == 0.0 && (n.x() < 0.0 || (n.x() == 0.0 && n.y() < 0.0))))
                n = -n;
            normals[i] = n;
        }
    });
    return normals;
}

}  // namespace stemalign
