#pragma once

#include "stemalign/point.hpp"

namespace stemalign {

// One survivor per occupied voxel: the original point closest to the voxel's
// centroid (ties fall to the smaller input index). Output keeps the input's
// relative order and carries attributes through.
PointCloud voxel_downsample(const PointCloud& cloud, double resolution);

}  // namespace stemalign
