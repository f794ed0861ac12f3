#include "doctest.h"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stemalign/error.hpp"
#include "stemalign/synth.hpp"
#include "stemalign/transform.hpp"
#include "test_util.hpp"

using namespace stemalign;

namespace {

ForestSpec small_forest(std::uint64_t seed) {
    ForestSpec s;
    s.extent_x = 18.0;
    s.extent_y = 18.0;
    s.stem_count = 20;
    s.min_spacing = 1.5;
    s.ground_density = 4.0;
    s.wall_density = 40.0;
    s.rng_seed = seed;
    return s;
}

template <typename Fn>
std::string error_message(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("same seed reproduces the forest bitwise") {
    ForestSpec spec = small_forest(11);
    SynthForest a = generate_forest(spec);
    SynthForest b = generate_forest(spec);
    REQUIRE(a.cloud.size() == b.cloud.size());
    CHECK(a.cloud.points == b.cloud.points);
    CHECK(a.truth_stems.positions == b.truth_stems.positions);

    SynthForest c = generate_forest(small_forest(12));
    CHECK(a.cloud.points != c.cloud.points);
}

TEST_CASE("truth stems sit exactly on the ground model") {
    ForestSpec spec = small_forest(21);
    spec.ground.kind = GroundKind::sinusoidal;
    spec.ground.z0 = 1.0;
    spec.ground.amplitude = 0.4;
    spec.ground.wavelength = 7.0;
    SynthForest f = generate_forest(spec);
    REQUIRE(f.truth_stems.count() == spec.stem_count);
    for (const Point3& p : f.truth_stems.positions)
        CHECK(p.z == spec.ground.height(p.x, p.y));

    // rejection sampling enforces the minimum spacing
    const auto& pos = f.truth_stems.positions;
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = i + 1; j < pos.size(); ++j)
            CHECK(std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y) >= spec.min_spacing);
}

TEST_CASE("grid layout fills floor(extent/spacing) cells per axis") {
    ForestSpec spec;
    spec.extent_x = 40.0;
    spec.extent_y = 40.0;
    spec.layout = LayoutKind::grid;
    spec.grid_spacing = 5.0;
    spec.ground.z0 = 0.5;
    spec.ground_density = 0.5;
    spec.wall_density = 5.0;
    spec.rng_seed = 7;
    SynthForest f = generate_forest(spec);
    REQUIRE(f.truth_stems.count() == 64);
    for (std::size_t iy = 0; iy < 8; ++iy) {
        for (std::size_t ix = 0; ix < 8; ++ix) {
            const Point3& p = f.truth_stems.positions[iy * 8 + ix];
            CHECK(p.x == (static_cast<double>(ix) + 0.5) * 5.0);
            CHECK(p.y == (static_cast<double>(iy) + 0.5) * 5.0);
            CHECK(p.z == 0.5);
        }
    }
}

TEST_CASE("uniform placement failure modes") {
    ForestSpec cramped = small_forest(1);
    cramped.extent_x = 4.0;
    cramped.extent_y = 4.0;
    cramped.min_spacing = 4.0;
    std::string msg = error_message([&] { generate_forest(cramped); });
    CHECK(msg.find("extent too small") != std::string::npos);
    CHECK_THROWS_AS(generate_forest(cramped), DataError);

    ForestSpec packed = small_forest(2);
    packed.extent_x = 10.0;
    packed.extent_y = 10.0;
    packed.stem_count = 50;
    packed.min_spacing = 3.0;  // at most ~11 stems fit, retries must give up
    msg = error_message([&] { generate_forest(packed); });
    CHECK(msg.find("could not place") != std::string::npos);
    CHECK_THROWS_AS(generate_forest(packed), DataError);
}

TEST_CASE("forest spec validation") {
    CHECK_NOTHROW(small_forest(0).validate());

    ForestSpec s = small_forest(0);
    s.extent_x = 0.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.stem_count = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.radius_min = 0.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.min_spacing = 0.3;  // stems of max radius 0.22 would interpenetrate
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.wall_density = -1.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.clutter_density = 1.0;
    s.clutter_low = 2.0;
    s.clutter_high = 1.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);

    s = small_forest(0);
    s.noise_sigma = -0.01;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("wall points stay between ground and stem top") {
    ForestSpec spec;
    spec.extent_x = 15.0;
    spec.extent_y = 15.0;
    spec.stem_count = 12;
    spec.ground_density = 5.0;
    spec.wall_density = 50.0;
    spec.rng_seed = 3;
    SynthForest f = generate_forest(spec);

    std::size_t on_ground = 0;
    for (const Point3& p : f.cloud.points) {
        CHECK(p.z >= 0.0);
        CHECK(p.z < spec.height_max);
        if (p.z == 0.0) ++on_ground;
    }
    CHECK(on_ground == static_cast<std::size_t>(std::llround(5.0 * 15.0 * 15.0)));
}

TEST_CASE("clutter occupies its height band") {
    ForestSpec spec;
    spec.extent_x = 10.0;
    spec.extent_y = 10.0;
    spec.stem_count = 1;
    spec.ground_density = 0.0;
    spec.wall_density = 0.0;
    spec.clutter_density = 10.0;
    spec.clutter_low = 0.2;
    spec.clutter_high = 1.0;
    spec.rng_seed = 4;
    SynthForest f = generate_forest(spec);
    REQUIRE(f.cloud.size() == 1000);
    for (const Point3& p : f.cloud.points) {
        CHECK(p.z >= 0.2);
        CHECK(p.z < 1.0);
    }
}

TEST_CASE("pair with identity motion is bitwise symmetric") {
    ScanPairSpec spec;
    spec.forest = small_forest(31);
    SynthPair pair = generate_pair(spec);
    CHECK(pair.src.points == pair.tgt.points);
    CHECK(pair.src_stems.positions == pair.tgt_stems.positions);
    CHECK(pair.src_stem_ids == pair.tgt_stem_ids);
    CHECK(pair.shared_stems == spec.forest.stem_count);
    CHECK_FALSE(pair.low_overlap);
}

TEST_CASE("planted transform maps src stems onto tgt stems") {
    ScanPairSpec spec;
    spec.forest = small_forest(32);
    spec.forest.stem_count = 30;
    spec.forest.extent_x = 20.0;
    spec.forest.extent_y = 20.0;
    spec.forest.ground_density = 1.0;
    spec.forest.wall_density = 5.0;
    spec.truth = RigidTransform::yaw(0.7, Eigen::Vector3d(3.0, -2.0, 0.5));
    SynthPair pair = generate_pair(spec);

    REQUIRE(pair.src_stems.count() == 30);
    REQUIRE(pair.tgt_stems.count() == 30);
    CHECK(pair.src.size() == pair.tgt.size());
    for (std::size_t i = 0; i < 30; ++i) {
        Point3 mapped = spec.truth.apply(pair.src_stems.positions[i]);
        CHECK(distance(mapped, pair.tgt_stems.positions[i]) < 1e-9);
    }
}

TEST_CASE("stem dropout removes whole stems from one scan") {
    ScanPairSpec spec;
    spec.forest = small_forest(33);
    spec.forest.stem_count = 50;
    spec.forest.extent_x = 30.0;
    spec.forest.extent_y = 30.0;
    spec.forest.wall_density = 10.0;
    spec.dropout_src = 0.4;
    SynthPair pair = generate_pair(spec);

    CHECK(pair.tgt_stems.count() == 50);
    CHECK(pair.src_stems.count() < 50);
    CHECK(pair.src_stems.count() >= 10);
    CHECK(pair.shared_stems == pair.src_stems.count());
    // identity motion, so surviving src stems coincide with their tgt entries
    for (std::size_t i = 0; i < pair.src_stem_ids.size(); ++i) {
        std::size_t id = pair.src_stem_ids[i];
        CHECK(pair.src_stems.positions[i] == pair.tgt_stems.positions[id]);
    }
}

TEST_CASE("disjoint crops flag low overlap") {
    ScanPairSpec spec;
    spec.forest = small_forest(34);
    spec.forest.stem_count = 60;
    spec.forest.extent_x = 40.0;
    spec.forest.extent_y = 40.0;
    spec.forest.ground_density = 1.5;
    spec.forest.wall_density = 20.0;
    spec.crop_src.xmax = 10.0;  // crops select in the shared forest frame
    spec.crop_tgt.xmin = 30.0;
    SynthPair pair = generate_pair(spec);

    CHECK(pair.shared_stems == 0);
    CHECK(pair.low_overlap);
    for (const Point3& p : pair.src_stems.positions) CHECK(p.x <= 10.0);
    for (const Point3& p : pair.tgt_stems.positions) CHECK(p.x >= 30.0);

    ScanPairSpec gone = spec;
    gone.crop_src = CropRect{1000.0, 1001.0, 1000.0, 1001.0};
    std::string msg = error_message([&] { generate_pair(gone); });
    CHECK(msg.find("crop removed every point") != std::string::npos);
}

TEST_CASE("wedge occlusion removes the expected wall fraction") {
    ScanPairSpec spec;
    spec.forest.extent_x = 15.0;
    spec.forest.extent_y = 15.0;
    spec.forest.stem_count = 10;
    spec.forest.min_spacing = 2.0;
    spec.forest.ground_density = 0.0;  // walls only, so counts compare directly
    spec.forest.wall_density = 100.0;
    spec.forest.rng_seed = 35;

    SynthPair full = generate_pair(spec);
    spec.wedge_fraction = 0.5;
    SynthPair half = generate_pair(spec);

    double ratio_src = static_cast<double>(half.src.size()) / static_cast<double>(full.src.size());
    double ratio_tgt = static_cast<double>(half.tgt.size()) / static_cast<double>(full.tgt.size());
    CHECK(ratio_src > 0.44);
    CHECK(ratio_src < 0.56);
    CHECK(ratio_tgt > 0.44);
    CHECK(ratio_tgt < 0.56);
}

TEST_CASE("scan pair validation") {
    ScanPairSpec spec;
    spec.forest = small_forest(0);
    CHECK_NOTHROW(spec.validate());

    spec.dropout_src = 1.0;
    CHECK_THROWS_AS(spec.validate(), ArgumentError);
    spec.dropout_src = 0.0;

    spec.wedge_fraction = 1.0;
    CHECK_THROWS_AS(spec.validate(), ArgumentError);
    spec.wedge_fraction = 0.0;

    spec.truth.rotation *= 2.0;
    CHECK_THROWS_AS(spec.validate(), ArgumentError);
}

TEST_CASE("pair spec file parses every key") {
    testutil::TempDir dir("specok");
    std::string path = dir.file("pair.txt");
    testutil::write_text(path,
                         "# demo pair\n"
                         "extent_x = 18\n"
                         "extent_y = 14\n"
                         "stem_count = 25\n"
                         "layout = uniform\n"
                         "min_spacing = 1.6\n"
                         "ground = sinusoidal\n"
                         "amplitude = 0.25\n"
                         "wavelength = 6\n"
                         "seed = 77\n"
                         "noise_sigma = 0.004\n"
                         "yaw_deg = 90\n"
                         "tx = 4.5\n"
                         "ty = -2\r\n"
                         "tz = 0.25\n"
                         "dropout_tgt = 0.1\n"
                         "wedge_fraction = 0.15\n"
                         "crop_tgt = 1 17 0.5 13.5\n");
    ScanPairSpec spec = parse_pair_spec(path);
    CHECK(spec.forest.extent_x == 18.0);
    CHECK(spec.forest.extent_y == 14.0);
    CHECK(spec.forest.stem_count == 25);
    CHECK(spec.forest.layout == LayoutKind::uniform);
    CHECK(spec.forest.min_spacing == 1.6);
    CHECK(spec.forest.ground.kind == GroundKind::sinusoidal);
    CHECK(spec.forest.ground.amplitude == 0.25);
    CHECK(spec.forest.ground.wavelength == 6.0);
    CHECK(spec.forest.rng_seed == 77);
    CHECK(spec.forest.noise_sigma == 0.004);
    CHECK(spec.dropout_tgt == 0.1);
    CHECK(spec.wedge_fraction == 0.15);
    CHECK(spec.crop_tgt.xmin == 1.0);
    CHECK(spec.crop_tgt.xmax == 17.0);
    CHECK(spec.crop_tgt.ymin == 0.5);
    CHECK(spec.crop_tgt.ymax == 13.5);

    RigidTransform expect = RigidTransform::yaw(M_PI / 2.0, Eigen::Vector3d(4.5, -2.0, 0.25));
    CHECK((spec.truth.rotation - expect.rotation).norm() < 1e-12);
    CHECK((spec.truth.translation - expect.translation).norm() == 0.0);
}

TEST_CASE("pair spec parser accumulates line errors") {
    testutil::TempDir dir("specbad");
    std::string path = dir.file("broken.txt");
    testutil::write_text(path,
                         "layout = uniform\n"
                         "wibble = 3\n"
                         "crop_src = 1 2 3\n"
                         "extent_x = abc\n"
                         "no separator here\n");
    std::string msg = error_message([&] { parse_pair_spec(path); });
    CHECK(msg.find("spec errors:") != std::string::npos);
    CHECK(msg.find(":2: unknown key 'wibble'") != std::string::npos);
    CHECK(msg.find(":3: crop needs") != std::string::npos);
    CHECK(msg.find(":4: bad number 'abc'") != std::string::npos);
    CHECK(msg.find(":5: expected key=value") != std::string::npos);
    CHECK(msg.find("missing required key 'stem_count'") != std::string::npos);
    CHECK_THROWS_AS(parse_pair_spec(path), ParseError);

    CHECK_THROWS_AS(parse_pair_spec(dir.file("nope.txt")), IoError);

    // values that parse but fail semantic validation surface as ArgumentError
    std::string sem = dir.file("semantic.txt");
    testutil::write_text(sem, "stem_count = 12\ndropout_src = 1.0\n");
    CHECK_THROWS_AS(parse_pair_spec(sem), ArgumentError);
}
