#include "stemalign/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "stemalign/error.hpp"

namespace stemalign {

namespace {

struct Accum {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t count = 0;
    std::size_t best = 0;
    double best_d2 = 0.0;
    bool has_best = false;
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double resolution) {
    if (!(resolution > 0.0)) throw ArgumentError("voxel_downsample: resolution must be > 0");
    if (cloud.empty()) throw ArgumentError("voxel_downsample: empty cloud");

    Point3 origin = cloud.points[0];
    for (const Point3& p : cloud.points) {
        origin.x = std::min(origin.x, p.x);
        origin.y = std::min(origin.y, p.y);
        origin.z = std::min(origin.z, p.z);
    }

    // 21 bits per axis; at 1 cm resolution that is a 20 km extent
    constexpr std::int64_t kMaxCell = (1 << 21) - 1;
    auto key_of = [&](const Point3& p) {
        std::int64_t ix = static_cast<std::int64_t>(std::floor((p.x - origin.x) / resolution));
        std::int64_t iy = static_cast<std::int64_t>(std::floor((p.y - origin.y) / resolution));
        std::int64_t iz = static_cast<std::int64_t>(std::floor((p.z - origin.z) / resolution));
        if (ix < 0) ix = 0;
        if (iy < 0) iy = 0;
        if (iz < 0) iz = 0;
        if (ix > kMaxCell || iy > kMaxCell || iz > kMaxCell)
            throw DataError("voxel_downsample: grid exceeds 2^21 cells per axis");
        return (static_cast<std::uint64_t>(ix) << 42) | (static_cast<std::uint64_t>(iy) << 21) |
               static_cast<std::uint64_t>(iz);
    };

    std::vector<std::uint64_t> keys(cloud.size());
    std::unordered_map<std::uint64_t, Accum> voxels;
    voxels.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        keys[i] = key_of(cloud.points[i]);
        Accum& a = voxels[keys[i]];
        a.sx += cloud.points[i].x;
        a.sy += cloud.points[i].y;
        a.sz += cloud.points[i].z;
        ++a.count;
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Accum& a = voxels[keys[i]];
        double n = static_cast<double>(a.count);
        Point3 c{a.sx / n, a.sy / n, a.sz / n};
        double d2 = squared_distance(cloud.points[i], c);
        if (!a.has_best || d2 < a.best_d2) {
            a.best = i;
            a.best_d2 = d2;
            a.has_best = true;
        }
        // ties keep the earlier index because iteration is in input order
    }

    std::vector<std::size_t> kept;
    kept.reserve(voxels.size());
    for (const auto& [key, a] : voxels) kept.push_back(a.best);
    std::sort(kept.begin(), kept.end());

    PointCloud out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.append_from(cloud, i);
    return out;
}

}  // namespace stemalign
