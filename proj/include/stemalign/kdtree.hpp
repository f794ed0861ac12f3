#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "stemalign/point.hpp"

namespace stemalign {

// Exact k-d tree over a borrowed point set. The points must outlive the index.
// Queries are const and safe to run from many threads at once.
class SpatialIndex {
  public:
    explicit SpatialIndex(const std::vector<Point3>& points);

    std::size_t size() const { return points_.size(); }

    // min(k, N) hits sorted by (distance, index); equal distances break toward
    // the smaller point index so downstream consumers stay deterministic.
    std::vector<std::pair<std::size_t, double>> knn(const Point3& query, std::size_t k) const;

    // every index with distance <= r, sorted ascending by index
    std::vector<std::size_t> radius_search(const Point3& query, double r) const;

  private:
    struct Node {
        int axis = 0;
        std::size_t point = 0;   // index into points_
        int left = -1, right = -1;
    };

    int build(std::size_t begin, std::size_t end, int depth);

    const std::vector<Point3>& points_;
    std::vector<std::size_t> order_;  // scratch during build
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace stemalign
