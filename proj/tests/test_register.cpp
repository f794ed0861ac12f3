#include "doctest.h"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "stemalign/error.hpp"
#include "stemalign/metrics.hpp"
#include "stemalign/registration.hpp"
#include "stemalign/synth.hpp"
#include "test_util.hpp"

using namespace stemalign;

namespace {

std::vector<std::pair<Point3, Point3>> make_corr(const std::vector<Point3>& src,
                                                 const RigidTransform& T) {
    std::vector<std::pair<Point3, Point3>> corr;
    corr.reserve(src.size());
    for (const Point3& p : src) corr.emplace_back(p, T.apply(p));
    return corr;
}

std::vector<Point3> random_points(Rng& rng, std::size_t n, double extent, double zspan) {
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(0.0, zspan)});
    return pts;
}

double max_point_gap(const std::vector<Point3>& pts, const RigidTransform& a,
                     const RigidTransform& b) {
    double worst = 0.0;
    for (const Point3& p : pts) worst = std::max(worst, distance(a.apply(p), b.apply(p)));
    return worst;
}

}  // namespace

TEST_CASE("six dof recovers a pure translation") {
    Rng rng(61);
    auto pts = random_points(rng, 5, 10.0, 2.0);
    RigidTransform T;
    T.translation = {1.0, 2.0, 3.0};
    RigidTransform est = estimate_6dof(make_corr(pts, T));
    CHECK((est.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK((est.translation - T.translation).norm() < 1e-12);
}

TEST_CASE("six dof recovers random rigid motions exactly on clean data") {
    Rng rng(62);
    for (int trial = 0; trial < 50; ++trial) {
        auto pts = random_points(rng, 10, 15.0, 3.0);
        RigidTransform T = testutil::random_rigid(rng);
        RigidTransform est = estimate_6dof(make_corr(pts, T));
        CHECK((est.matrix() - T.matrix()).norm() < 1e-9);
        CHECK(max_point_gap(pts, est, T) < 1e-9);
    }
}

TEST_CASE("six dof residuals stay near the noise floor") {
    Rng rng(63);
    double worst_trial = 0.0, total = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto pts = random_points(rng, 10, 15.0, 3.0);
        RigidTransform T = testutil::random_rigid(rng);
        auto corr = make_corr(pts, T);
        for (auto& [s, t] : corr) {
            t.x += rng.normal(0.01);
            t.y += rng.normal(0.01);
            t.z += rng.normal(0.01);
        }
        RigidTransform est = estimate_6dof(corr);
        double mean = 0.0;
        for (const auto& [s, t] : corr) mean += distance(est.apply(s), t);
        mean /= static_cast<double>(corr.size());
        worst_trial = std::max(worst_trial, mean);
        total += mean;
    }
    CHECK(total / 100.0 < 0.02);
    CHECK(worst_trial < 0.03);
}

TEST_CASE("six dof rejects degenerate geometry") {
    std::vector<std::pair<Point3, Point3>> line;
    for (int i = 0; i < 5; ++i) line.emplace_back(Point3{1.0 * i, 0, 0}, Point3{1.0 * i, 0, 0});
    CHECK_THROWS_AS(estimate_6dof(line), DataError);

    std::vector<std::pair<Point3, Point3>> two = {{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
    CHECK_THROWS_AS(estimate_6dof(two), ArgumentError);
}

TEST_CASE("six dof is left-equivariant under a rigid change of target frame") {
    Rng rng(64);
    auto pts = random_points(rng, 8, 12.0, 2.0);
    RigidTransform T = testutil::random_rigid(rng);
    auto corr = make_corr(pts, T);
    for (auto& [s, t] : corr) {
        t.x += rng.normal(0.005);
        t.y += rng.normal(0.005);
        t.z += rng.normal(0.005);
    }
    RigidTransform base = estimate_6dof(corr);

    RigidTransform A = testutil::random_rigid(rng);
    auto moved = corr;
    for (auto& [s, t] : moved) t = A.apply(t);
    RigidTransform est = estimate_6dof(moved);
    CHECK((est.matrix() - compose(A, base).matrix()).norm() < 1e-9);
}

TEST_CASE("four dof recovers yaw plus shift exactly on clean data") {
    Rng rng(65);
    auto pts = random_points(rng, 9, 12.0, 2.5);
    RigidTransform T = RigidTransform::yaw(M_PI / 2.0, {1.0, 1.0, 0.0});
    RigidTransform est = estimate_4dof(make_corr(pts, T));
    CHECK((est.matrix() - T.matrix()).norm() < 1e-12);

    // the constrained structure is exact, not approximate
    CHECK(est.rotation(0, 2) == 0.0);
    CHECK(est.rotation(1, 2) == 0.0);
    CHECK(est.rotation(2, 0) == 0.0);
    CHECK(est.rotation(2, 1) == 0.0);
    CHECK(est.rotation(2, 2) == 1.0);
}

TEST_CASE("four dof vertical shift is the plain mean of z differences") {
    std::vector<std::pair<Point3, Point3>> corr = {{{0, 0, 0}, {0, 0, 0.1}},
                                                   {{4, 0, 0}, {4, 0, 0.2}},
                                                   {{0, 3, 0}, {0, 3, 0.3}}};
    RigidTransform est = estimate_4dof(corr);
    CHECK(est.translation.z() == (0.1 + 0.2 + 0.3) / 3.0);  // same accumulation order
    CHECK(est.translation.z() == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(est.rotation(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("four dof needs XY spread") {
    std::vector<std::pair<Point3, Point3>> stacked = {
        {{1, 2, 0}, {1, 2, 0}}, {{1, 2, 1}, {1, 2, 1}}, {{1, 2, 2}, {1, 2, 2}}};
    CHECK_THROWS_AS(estimate_4dof(stacked), DataError);
    std::vector<std::pair<Point3, Point3>> two = {{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
    CHECK_THROWS_AS(estimate_4dof(two), ArgumentError);
}

TEST_CASE("four dof averages away vertical noise") {
    Rng rng(66);
    auto pts = random_points(rng, 20, 15.0, 2.0);
    RigidTransform T = RigidTransform::yaw(0.8, {2.0, -1.0, 0.7});
    auto corr = make_corr(pts, T);
    for (auto& [s, t] : corr) t.z += rng.normal(0.05);
    RigidTransform est = estimate_4dof(corr);
    CHECK(std::abs(est.translation.z() - 0.7) < 0.03);
    // yaw and horizontal shift are untouched by z noise
    CHECK(std::abs(est.rotation(0, 0) - std::cos(0.8)) < 1e-9);
    CHECK(std::abs(est.translation.x() - 2.0) < 1e-9);
}

TEST_CASE("four and six dof agree on exact yaw-only data") {
    Rng rng(67);
    auto pts = random_points(rng, 12, 14.0, 2.0);
    RigidTransform T = testutil::random_yaw(rng);
    auto corr = make_corr(pts, T);
    RigidTransform a = estimate_4dof(corr);
    RigidTransform b = estimate_6dof(corr);
    CHECK(max_point_gap(pts, a, b) < 1e-9);
}

TEST_CASE("icp snaps identical clouds back together") {
    Rng rng(68);
    PointCloud cloud = testutil::random_cloud(rng, 2000, 10.0, 3.0);
    IcpParams ip;

    // start already aligned: nothing to do
    RigidTransform stay = icp_refine(cloud, cloud, RigidTransform::identity(), ip);
    CHECK((stay.matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-12);

    // small pose error: recovered to numerical alignment
    RigidTransform off = RigidTransform::yaw(0.2 * M_PI / 180.0, {0.01, -0.008, 0.005});
    std::vector<double> trace;
    RigidTransform fixed = icp_refine(cloud, cloud, off, ip, &trace);
    CHECK(max_point_gap(cloud.points, fixed, RigidTransform::identity()) < 1e-4);
    REQUIRE(!trace.empty());
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("icp refines toward a known motion") {
    Rng rng(69);
    PointCloud cloud = testutil::random_cloud(rng, 3000, 12.0, 3.0);
    RigidTransform T = RigidTransform::yaw(0.3, {1.5, -0.5, 0.2});
    PointCloud tgt = apply_transform(cloud, T);
    IcpParams ip;
    RigidTransform out = icp_refine(cloud, tgt, T, ip);
    // separate voxel grids on the two frames leave a small gap, nothing more
    CHECK(max_point_gap(cloud.points, out, T) < 0.005);
}

TEST_CASE("icp errors on hopeless overlap and bad parameters") {
    Rng rng(70);
    PointCloud a = testutil::random_cloud(rng, 500, 5.0, 2.0);
    PointCloud b = a;
    for (Point3& p : b.points) p.x += 100.0;
    IcpParams ip;
    CHECK_THROWS_AS(icp_refine(a, b, RigidTransform::identity(), ip), DataError);

    IcpParams bad;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = IcpParams{};
    bad.working_voxel = 0.0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    CHECK_THROWS_AS(icp_refine(PointCloud{}, a, RigidTransform::identity(), ip), ArgumentError);
}

TEST_CASE("register_pair recovers the planted motion of a synthetic pair") {
    ForestSpec fs;
    fs.extent_x = fs.extent_y = 25.0;
    fs.stem_count = 40;
    fs.ground_density = 40.0;
    fs.wall_density = 150.0;
    fs.noise_sigma = 0.003;
    fs.rng_seed = 9;
    ScanPairSpec ps;
    ps.forest = fs;
    ps.truth = RigidTransform::yaw(0.6, {4.0, -3.0, 0.4});
    SynthPair pair = generate_pair(ps);
    REQUIRE(pair.shared_stems == 40);

    StemMapParams sp;
    MatchParams mp;
    IcpParams ip;
    RegisterResult res = register_pair(pair.src, pair.tgt, RegistrationMode::four_dof, sp, mp, ip);

    CHECK(res.diagnostics.n_stems_src >= 38);
    CHECK(res.diagnostics.n_correspondences >= 30);
    CHECK(res.diagnostics.match.local_pair_tests ==
          static_cast<std::uint64_t>(res.diagnostics.match.src_triangles) *
              res.diagnostics.match.tgt_triangles);

    double coarse_ep = pointwise_error(pair.src, res.coarse, ps.truth);
    CHECK(coarse_ep < 0.05);
    REQUIRE(res.fine.has_value());
    double fine_ep = pointwise_error(pair.src, *res.fine, ps.truth);
    CHECK(fine_ep < 0.02);

    // six dof mode handles the same pair
    RegisterResult res6 = register_pair(pair.src, pair.tgt, RegistrationMode::six_dof, sp, mp);
    CHECK(pointwise_error(pair.src, res6.coarse, ps.truth) < 0.10);
    CHECK_FALSE(res6.fine.has_value());
}

TEST_CASE("registering a cloud against itself gives the identity") {
    ForestSpec fs;
    fs.extent_x = fs.extent_y = 20.0;
    fs.stem_count = 25;
    fs.ground_density = 30.0;
    fs.wall_density = 120.0;
    fs.rng_seed = 10;
    SynthForest forest = generate_forest(fs);

    StemMapParams sp;
    MatchParams mp;
    RegisterResult res =
        register_pair(forest.cloud, forest.cloud, RegistrationMode::four_dof, sp, mp);
    CHECK(pointwise_error(forest.cloud, res.coarse, RigidTransform::identity()) < 1e-6);
    CHECK(res.diagnostics.residual_rms < 1e-9);
}

TEST_CASE("register_pair reports insufficient correspondences without overlap") {
    // two unrelated plantations with incompatible edge scales
    ForestSpec a;
    a.layout = LayoutKind::grid;
    a.grid_spacing = 2.2;
    a.extent_x = a.extent_y = 12.0;
    a.ground_density = 30.0;
    a.wall_density = 120.0;
    a.rng_seed = 11;
    ForestSpec b = a;
    b.grid_spacing = 3.0;
    b.rng_seed = 12;

    PointCloud ca = generate_forest(a).cloud;
    PointCloud cb = generate_forest(b).cloud;
    StemMapParams sp;
    MatchParams mp;
    try {
        (void)register_pair(ca, cb, RegistrationMode::four_dof, sp, mp);
        FAIL("expected a matching-stage error");
    } catch (const StageError& e) {
        CHECK(std::string(e.what()).find("insufficient correspondences") != std::string::npos);
        CHECK(e.stage_name.find("matching") != std::string::npos);
    }
}
