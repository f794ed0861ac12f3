#pragma once

#include <cstddef>
#include <vector>

#include "stemalign/point.hpp"

namespace stemalign {

// Single-linkage Euclidean clustering: points are in one cluster iff a chain
// of hops each <= tolerance connects them. Clusters below min_size are
// dropped. Each cluster's indices come back sorted; clusters are ordered by
// their smallest contained index, so the partition is independent of input
// order.
std::vector<std::vector<std::size_t>> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                                        std::size_t min_size);

}  // namespace stemalign
