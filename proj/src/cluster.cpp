#include "stemalign/cluster.hpp"

#include <algorithm>

#include "stemalign/error.hpp"
#include "stemalign/kdtree.hpp"

namespace stemalign {

std::vector<std::vector<std::size_t>> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                                        std::size_t min_size) {
    if (!(tolerance > 0.0)) throw ArgumentError("euclidean_cluster: tolerance must be > 0");
    if (cloud.empty()) return {};

    SpatialIndex index(cloud.points);
    std::vector<char> seen(cloud.size(), 0);
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<std::size_t> frontier;

    for (std::size_t seed = 0; seed < cloud.size(); ++seed) {
        if (seen[seed]) continue;
        std::vector<std::size_t> members;
        frontier.clear();
        frontier.push_back(seed);
        seen[seed] = 1;
        while (!frontier.empty()) {
            std::size_t cur = frontier.back();
            frontier.pop_back();
            members.push_back(cur);
            for (std::size_t nb : index.radius_search(cloud.points[cur], tolerance)) {
                if (!seen[nb]) {
                    seen[nb] = 1;
                    frontier.push_back(nb);
                }
            }
        }
        if (members.size() >= min_size) {
            std::sort(members.begin(), members.end());
            clusters.push_back(std::move(members));
        }
    }
    // seeds run in index order, so clusters already sort by smallest member
    return clusters;
}

}  // namespace stemalign
