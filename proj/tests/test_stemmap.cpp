#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stemalign/dtm.hpp"
#include "stemalign/error.hpp"
#include "stemalign/kdtree.hpp"
#include "stemalign/metrics.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/synth.hpp"
#include "test_util.hpp"

using namespace stemalign;

namespace {

template <class Fn>
std::string error_message(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "(no error)";
}

void cylinder_surface(Rng& rng, double cx, double cy, double r, double z0, double z1,
                      std::size_t n, std::vector<Point3>& pts,
                      std::vector<Eigen::Vector3d>& nms, double sigma = 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
        double th = rng.uniform(0.0, 2.0 * M_PI);
        double z = rng.uniform(z0, z1);
        Point3 p{cx + r * std::cos(th), cy + r * std::sin(th), z};
        if (sigma > 0.0) {
            p.x += rng.normal(sigma);
            p.y += rng.normal(sigma);
            p.z += rng.normal(sigma);
        }
        pts.push_back(p);
        nms.emplace_back(std::cos(th), std::sin(th), 0.0);
    }
}

// XY of the fitted axis at a given height
std::pair<double, double> axis_xy_at(const Cylinder& c, double z) {
    Eigen::Vector3d d = c.axis.direction;
    if (d.z() < 0.0) d = -d;
    double t = (z - c.axis.origin.z) / d.z();
    Eigen::Vector3d p = c.axis.origin.vec() + t * d;
    return {p.x(), p.y()};
}

}  // namespace

TEST_CASE("verticality of reference normals") {
    CHECK(verticality({0.0, 0.0, 1.0}) == 0.0);
    CHECK(verticality({0.0, 0.0, -1.0}) == 0.0);
    CHECK(verticality({1.0, 0.0, 0.0}) == 1.0);
    CHECK(verticality({0.0, -1.0, 0.0}) == 1.0);
    double s = std::sqrt(0.5);
    CHECK(verticality({s, 0.0, s}) == doctest::Approx(1.0 - s).epsilon(1e-12));
    CHECK_THROWS_AS(verticality({1.0, 1.0, 0.0}), ArgumentError);
    CHECK_THROWS_AS(verticality({0.0, 0.0, 0.0}), ArgumentError);
}

TEST_CASE("gamma 0.9 admits stems tilted up to asin(0.1)") {
    double a = std::asin(0.1);
    CHECK(a * 180.0 / M_PI == doctest::Approx(5.739).epsilon(1e-3));
    CHECK(a * 180.0 / M_PI < 5.8);
    // a stem wall tilted by exactly that angle has normals with |n_z| = 0.1
    Eigen::Vector3d n(std::cos(a), 0.0, std::sin(a));
    CHECK(std::abs(verticality(n) - 0.9) < 1e-12);
}

TEST_CASE("verticality ignores rotation about z") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        Eigen::Vector3d n = testutil::random_unit(rng);
        double th = rng.uniform(0.0, 2.0 * M_PI);
        Eigen::Vector3d r(std::cos(th) * n.x() - std::sin(th) * n.y(),
                          std::sin(th) * n.x() + std::cos(th) * n.y(), n.z());
        r.normalize();
        CHECK(verticality(r) == doctest::Approx(verticality(n)).epsilon(1e-12));
    }
}

TEST_CASE("normals on a plane point straight up") {
    PointCloud plane;
    for (double x = 0.0; x <= 2.0; x += 0.02)
        for (double y = 0.0; y <= 2.0; y += 0.02) plane.points.push_back({x, y, 0.0});
    SpatialIndex index(plane.points);
    auto normals = estimate_normals(plane, index, 0.10);
    REQUIRE(normals.size() == plane.size());
    for (const auto& n : normals) {
        CHECK(n.z() > 1.0 - 1e-6);  // sign convention keeps n_z >= 0
        CHECK(std::abs(n.norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("normals on a vertical cylinder are horizontal") {
    PointCloud wall;
    double r = 0.15;
    for (double th = 0.0; th < 2.0 * M_PI; th += 0.035)
        for (double z = 0.0; z <= 2.0; z += 0.02)
            wall.points.push_back({r * std::cos(th), r * std::sin(th), z});
    SpatialIndex index(wall.points);
    auto normals = estimate_normals(wall, index, 0.10);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < wall.size(); ++i) {
        if (wall.points[i].z < 0.3 || wall.points[i].z > 1.7) continue;  // skip rim effects
        CHECK(std::abs(normals[i].z()) < 0.05);
        CHECK(verticality(normals[i]) > 0.95);
        ++checked;
    }
    CHECK(checked > 1000);
}

TEST_CASE("points without enough neighbors get the zero sentinel") {
    PointCloud sparse;
    sparse.points = {{0, 0, 0}, {5, 0, 0}, {0, 5, 0}};
    SpatialIndex index(sparse.points);
    auto normals = estimate_normals(sparse, index, 0.10);
    for (const auto& n : normals) CHECK(n.squaredNorm() == 0.0);
}

TEST_CASE("cylinder fit recovers a clean cylinder") {
    Rng rng(21);
    std::vector<Point3> pts;
    std::vector<Eigen::Vector3d> nms;
    cylinder_surface(rng, 2.0, 3.0, 0.15, 0.2, 3.0, 2000, pts, nms);
    RansacParams rp;
    auto fit = fit_cylinder_ransac(pts, nms, rp, Rng(5));
    REQUIRE(fit.has_value());
    CHECK(std::abs(fit->radius - 0.15) < 0.005);
    auto [ax, ay] = axis_xy_at(*fit, 1.5);
    CHECK(std::hypot(ax - 2.0, ay - 3.0) < 0.01);
    Eigen::Vector3d d = fit->axis.direction;
    CHECK(std::abs(d.z()) > std::cos(1.0 * M_PI / 180.0));
    CHECK(fit->inlier_count > 1800);

    // identical seed, identical fit
    auto again = fit_cylinder_ransac(pts, nms, rp, Rng(5));
    REQUIRE(again.has_value());
    CHECK(again->radius == fit->radius);
    CHECK(again->axis.origin == fit->axis.origin);
}

TEST_CASE("cylinder fit tolerates 5 mm noise") {
    Rng rng(22);
    std::vector<Point3> pts;
    std::vector<Eigen::Vector3d> nms;
    cylinder_surface(rng, -1.0, 4.0, 0.18, 0.2, 3.0, 2500, pts, nms, 0.005);
    RansacParams rp;
    auto fit = fit_cylinder_ransac(pts, nms, rp, Rng(6));
    REQUIRE(fit.has_value());
    CHECK(std::abs(fit->radius - 0.18) < 0.01);
    auto [ax, ay] = axis_xy_at(*fit, 1.5);
    CHECK(std::hypot(ax + 1.0, ay - 4.0) < 0.02);
}

TEST_CASE("cylinder fit rejects a uniform blob") {
    Rng rng(23);
    std::vector<Point3> pts;
    std::vector<Eigen::Vector3d> nms;
    for (int i = 0; i < 600; ++i) {
        pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        nms.push_back(testutil::random_unit(rng));
    }
    RansacParams rp;
    CHECK_FALSE(fit_cylinder_ransac(pts, nms, rp, Rng(7)).has_value());
}

TEST_CASE("map_stems recovers a 50 stem forest") {
    ForestSpec fs;
    fs.extent_x = fs.extent_y = 30.0;
    fs.stem_count = 50;
    fs.ground_density = 150.0;
    fs.wall_density = 150.0;
    fs.canopy_blob_points = 4500.0;
    fs.noise_sigma = 0.002;
    fs.rng_seed = 42;
    SynthForest forest = generate_forest(fs);

    StemMapParams params;
    params.rng_seed = 1;
    StemMap found = map_stems(forest.cloud, params);

    CHECK(found.count() >= 48);
    CHECK(found.count() <= 52);

    // every detection sits within 5 cm (XY) of a true stem center
    std::size_t matched_truth = 0;
    std::vector<char> taken(forest.truth_stems.count(), 0);
    for (const Point3& p : found.positions) {
        double best = 1e9;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < forest.truth_stems.count(); ++i) {
            const Point3& t = forest.truth_stems.positions[i];
            double d = std::hypot(p.x - t.x, p.y - t.y);
            if (d < best) {
                best = d;
                best_i = i;
            }
        }
        CHECK(best < 0.05);
        if (best < 0.05 && !taken[best_i]) {
            taken[best_i] = 1;
            ++matched_truth;
        }
    }
    CHECK(matched_truth >= 48);

    // output comes sorted by (x, y, z)
    CHECK(std::is_sorted(found.positions.begin(), found.positions.end(),
                         [](const Point3& a, const Point3& b) {
                             if (a.x != b.x) return a.x < b.x;
                             if (a.y != b.y) return a.y < b.y;
                             return a.z < b.z;
                         }));

    // positions land exactly on the terrain model
    Dtm dtm = build_dtm(forest.cloud, params.dtm_cell_size);
    for (const Point3& p : found.positions) CHECK(std::abs(dtm.height_above_ground(p)) < 1e-9);

    // band + verticality filtering discards the bulk of the scan
    PointCloud stem_pts = extract_stem_points(forest.cloud, dtm, params);
    CHECK(stem_pts.size() * 20 < forest.cloud.size());  // under 5 percent

    // schedule independence: 8 worker threads reproduce the serial map bitwise
    set_max_threads(8);
    StemMap found8 = map_stems(forest.cloud, params);
    set_max_threads(0);
    REQUIRE(found8.count() == found.count());
    for (std::size_t i = 0; i < found.count(); ++i) CHECK(found8.positions[i] == found.positions[i]);

    // translation equivariance holds at the association level only; the DTM
    // and voxel grids anchor to the cloud minimum, so a shift perturbs cell
    // boundaries and the downstream sampling, moving centers by a few cm
    PointCloud moved = forest.cloud;
    for (Point3& p : moved.points) p.x += 10.0;
    StemMap found_moved = map_stems(moved, params);
    StemMap truth_moved = forest.truth_stems;
    for (Point3& p : truth_moved.positions) p.x += 10.0;
    DetectionScores sc = score_stem_map(found_moved, truth_moved, 0.05);
    CHECK(sc.matched >= 48);
    CHECK(sc.spurious <= 2);
}

TEST_CASE("ground only scenes give an empty stem map error") {
    Rng rng(24);
    PointCloud ground;
    for (int i = 0; i < 20000; ++i)
        ground.points.push_back({rng.uniform(0, 15), rng.uniform(0, 15), rng.normal(0.05)});
    StemMapParams params;
    std::string msg = error_message([&] { (void)map_stems(ground, params); });
    CHECK(msg.find("empty stem map") != std::string::npos);
    CHECK_THROWS_AS((void)map_stems(ground, params), DataError);
}

TEST_CASE("extract_stem_points errors only when the band itself is empty") {
    PointCloud flat;
    for (double x = 0.0; x <= 5.0; x += 0.1)
        for (double y = 0.0; y <= 5.0; y += 0.1) flat.points.push_back({x, y, 0.0});
    StemMapParams params;
    Dtm dtm = build_dtm(flat, params.dtm_cell_size);
    // nothing at stem height at all
    std::string msg = error_message([&] { (void)extract_stem_points(flat, dtm, params); });
    CHECK(msg.find("no vegetation") != std::string::npos);

    // a horizontal sheet inside the band filters to an empty set without error
    PointCloud with_sheet = flat;
    for (double x = 1.0; x <= 4.0; x += 0.05)
        for (double y = 1.0; y <= 4.0; y += 0.05) with_sheet.points.push_back({x, y, 1.5});
    PointCloud kept = extract_stem_points(with_sheet, dtm, params);
    CHECK(kept.empty());
}

TEST_CASE("parameter validation rejects out-of-range fields") {
    StemMapParams p;
    p.gamma = 1.5;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    p = StemMapParams{};
    p.band_low = 3.0;
    p.band_high = 0.2;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    p = StemMapParams{};
    p.ransac.radius_min = 0.5;
    p.ransac.radius_max = 0.1;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    CHECK_NOTHROW(StemMapParams{}.validate());
}

TEST_CASE("stem map files round trip") {
    testutil::TempDir dir("stemmap_io");
    StemMap m;
    m.positions = {{1.25, -3.5, 0.125}, {4.0, 2.0, -0.75}};
    write_stem_map(m, dir.file("stems.txt"));
    StemMap back = read_stem_map(dir.file("stems.txt"));
    REQUIRE(back.count() == 2);
    CHECK(back.positions[0] == m.positions[0]);
    CHECK(back.positions[1] == m.positions[1]);
}
