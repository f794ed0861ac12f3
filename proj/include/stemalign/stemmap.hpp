#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stemalign/dtm.hpp"
#include "stemalign/kdtree.hpp"
#include "stemalign/point.hpp"
#include "stemalign/rng.hpp"

namespace stemalign {

struct RansacParams {
    double distance_threshold = 0.02;
    int max_iterations = 1000;
    double min_inlier_fraction = 0.3;
    double radius_min = 0.03;
    double radius_max = 1.0;
};

struct StemMapParams {
    double band_low = 0.2;
    double band_high = 3.0;
    double voxel_resolution = 0.01;
    double normal_radius = 0.10;
    double gamma = 0.9;  // verticality threshold
    double cluster_tolerance = 0.3;
    std::size_t cluster_min_size = 50;
    RansacParams ransac;
    double dtm_cell_size = 0.5;
    std::uint64_t rng_seed = 0;

    void validate() const;  // throws ArgumentError on out-of-range fields
};

struct Cylinder {
    AxisLine axis;
    double radius = 0.0;
    std::size_t inlier_count = 0;
};

struct StemMap {
    std::vector<Point3> positions;               // sorted lexicographically by (x, y, z)
    std::vector<Cylinder> cylinders;             // aligned with positions; empty when loaded from file
    std::size_t count() const { return positions.size(); }
};

// Eq. 1: v = 1 - |n_z|. Input must be unit length within 1e-6.
double verticality(const Eigen::Vector3d& normal);

// Smallest-eigenvector PCA normal per point over a fixed-radius neighborhood.
// Points with fewer than 3 neighbors (self included) get the zero sentinel.
// Sign fixed to n_z >= 0 (then n_x, then n_y when earlier components vanish).
std::vector<Eigen::Vector3d> estimate_normals(const PointCloud& cloud, const SpatialIndex& index,
                                              double radius);

// Band filter + voxel downsample + verticality > gamma.
PointCloud extract_stem_points(const PointCloud& cloud, const Dtm& dtm, const StemMapParams& params);

// RANSAC over 2-point-with-normals hypotheses (3-point vertical circumcircle
// fallback when the normals are near-parallel); returns nullopt when no model
// satisfies the inlier-fraction and radius-bound gates.
std::optional<Cylinder> fit_cylinder_ransac(const std::vector<Point3>& points,
                                            const std::vector<Eigen::Vector3d>& normals,
                                            const RansacParams& params, Rng rng);

StemMap map_stems(const PointCloud& cloud, const StemMapParams& params);
StemMap map_stems(const PointCloud& cloud, const StemMapParams& params, const Dtm& dtm);

// xyz-ascii, one position per line, full double precision
StemMap read_stem_map(const std::string& path);
void write_stem_map(const StemMap& stems, const std::string& path);

}  // namespace stemalign
