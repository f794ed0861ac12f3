#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stemalign/cluster.hpp"
#include "stemalign/error.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/voxel.hpp"

namespace stemalign {

void StemMapParams::validate() const {
    if (!(band_low < band_high)) throw ArgumentError("band_low must be < band_high");
    if (!(band_low >= 0.0)) throw ArgumentError("band_low must be >= 0");
    if (!(voxel_resolution > 0.0)) throw ArgumentError("voxel_resolution must be > 0");
    if (!(normal_radius > 0.0)) throw ArgumentError("normal_radius must be > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in (0, 1)");
    if (!(cluster_tolerance > 0.0)) throw ArgumentError("cluster_tolerance must be > 0");
    if (cluster_min_size < 3) throw ArgumentError("cluster_min_size must be >= 3");
    if (!(dtm_cell_size > 0.0)) throw ArgumentError("dtm_cell_size must be > 0");
    if (!(ransac.distance_threshold > 0.0)) throw ArgumentError("ransac distance_threshold must be > 0");
    if (ransac.max_iterations < 1) throw ArgumentError("ransac max_iterations must be >= 1");
    if (!(ransac.min_inlier_fraction > 0.0 && ransac.min_inlier_fraction <= 1.0))
        throw ArgumentError("ransac min_inlier_fraction must lie in (0, 1]");
    if (!(ransac.radius_min > 0.0 && ransac.radius_min < ransac.radius_max))
        throw ArgumentError("ransac radius bounds must satisfy 0 < min < max");
}

namespace {

struct StemPoints {
    PointCloud cloud;
    std::vector<Eigen::Vector3d> normals;  // aligned with cloud, all unit
    bool band_empty = false;
};

StemPoints extract_with_normals(const PointCloud& cloud, const Dtm& dtm, const StemMapParams& params) {
    PointCloud band = slice_band(cloud, dtm, params.band_low, params.band_high);
    if (band.empty()) {
        StemPoints none;
        none.band_empty = true;
        return none;
    }
    PointCloud down = voxel_downsample(band, params.voxel_resolution);
    SpatialIndex index(down.points);
    std::vector<Eigen::Vector3d> normals = estimate_normals(down, index, params.normal_radius);

    StemPoints out;
    for (std::size_t i = 0; i < down.size(); ++i) {
        if (normals[i].squaredNorm() < 0.5) continue;  // sentinel: too few neighbors
        if (verticality(normals[i]) > params.gamma) {
            out.cloud.append_from(down, i);
            out.normals.push_back(normals[i]);
        }
    }
    return out;
}

// Walk the axis down to the ground surface: take the axis point at the level
// of the DTM under the current XY, re-read the DTM there, repeat. Near-vertical
// axes move the XY by tan(tilt) * dz per step, so this contracts quickly.
Point3 intersect_axis_with_dtm(const AxisLine& axis, const Dtm& dtm, double band_low) {
    Eigen::Vector3d dir = axis.direction;
    if (dir.z() < 0.0) dir = -dir;
    Eigen::Vector3d o = axis.origin.vec();

    if (dir.z() < 0.1) {
        // nearly horizontal axis: vertical projection of the origin
        double gz = dtm.height_at(o.x(), o.y());
        return {o.x(), o.y(), gz};
    }

    double z_start = dtm.height_at(o.x(), o.y()) + band_low;
    Eigen::Vector3d p = o + dir * ((z_start - o.z()) / dir.z());
    for (int it = 0; it < 10; ++it) {
        double gz = dtm.height_at(p.x(), p.y());
        Eigen::Vector3d next = o + dir * ((gz - o.z()) / dir.z());
        double dxy = std::hypot(next.x() - p.x(), next.y() - p.y());
        p = next;
        if (dxy < 1e-9) break;
    }
    // snap exactly onto the surface so height_above_ground(position) == 0
    return {p.x(), p.y(), dtm.height_at(p.x(), p.y())};
}

}  // namespace

PointCloud extract_stem_points(const PointCloud& cloud, const Dtm& dtm, const StemMapParams& params) {
    params.validate();
    StemPoints sp = extract_with_normals(cloud, dtm, params);
    if (sp.band_empty)
        throw DataError("extract_stem_points: no points in the " + std::to_string(params.band_low) +
                        "-" + std::to_string(params.band_high) +
                        " m height band, no vegetation above the terrain");
    return sp.cloud;  // may be empty when nothing in the band is vertical
}

StemMap map_stems(const PointCloud& cloud, const StemMapParams& params) {
    params.validate();
    Dtm dtm = build_dtm(cloud, params.dtm_cell_size);
    return map_stems(cloud, params, dtm);
}

StemMap map_stems(const PointCloud& cloud, const StemMapParams& params, const Dtm& dtm) {
    params.validate();
    StemPoints sp = extract_with_normals(cloud, dtm, params);
    if (sp.cloud.empty())
        throw DataError("map_stems: empty stem map, no vertical stem points in the height band");
    auto clusters = euclidean_cluster(sp.cloud, params.cluster_tolerance, params.cluster_min_size);

    std::vector<std::optional<Cylinder>> fits(clusters.size());
    Rng base(params.rng_seed);
    parallel_for(clusters.size(), [&](std::size_t ci) {
        std::vector<Point3> pts;
        std::vector<Eigen::Vector3d> nms;
        pts.reserve(clusters[ci].size());
        nms.reserve(clusters[ci].size());
        for (std::size_t idx : clusters[ci]) {
            pts.push_back(sp.cloud.points[idx]);
            nms.push_back(sp.normals[idx]);
        }
        fits[ci] = fit_cylinder_ransac(pts, nms, params.ransac, base.fork(ci));
    });

    // dedup in cluster order (canonical), first accepted position wins
    std::vector<Point3> positions;
    std::vector<Cylinder> cylinders;
    for (std::size_t ci = 0; ci < fits.size(); ++ci) {
        if (!fits[ci]) continue;
        Point3 pos = intersect_axis_with_dtm(fits[ci]->axis, dtm, params.band_low);
        bool dup = false;
        for (const Point3& q : positions) {
            if (distance(pos, q) <= 0.05) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        positions.push_back(pos);
        cylinders.push_back(*fits[ci]);
    }
    if (positions.empty()) throw DataError("map_stems: empty stem map, no cluster passed the cylinder fit");

    std::vector<std::size_t> order(positions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Point3 &pa = positions[a], &pb = positions[b];
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        return pa.z < pb.z;
    });
    StemMap out;
    out.positions.reserve(order.size());
    out.cylinders.reserve(order.size());
    for (std::size_t i : order) {
        out.positions.push_back(positions[i]);
        out.cylinders.push_back(cylinders[i]);
    }
    return out;
}

StemMap read_stem_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    StemMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        double x, y, z;
        if (std::sscanf(line.c_str(), "%lf %lf %lf", &x, &y, &z) != 3)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x y z'");
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite stem position");
        out.positions.push_back({x, y, z});
    }
    if (in.bad()) throw IoError("read failure on " + path);
    return out;
}

void write_stem_map(const StemMap& stems, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open " + path + " for writing");
    for (const Point3& p : stems.positions) std::fprintf(f, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    if (std::fclose(f) != 0) throw IoError("write failure on " + path);
}

}  // namespace stemalign
