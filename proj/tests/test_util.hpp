#pragma once

// include after doctest.h; the file helpers use REQUIRE
#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <Eigen/Geometry>

#include "stemalign/point.hpp"
#include "stemalign/rng.hpp"
#include "stemalign/transform.hpp"

namespace testutil {

using stemalign::Point3;
using stemalign::PointCloud;
using stemalign::RigidTransform;
using stemalign::Rng;

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 10.0, double zmax = 5.0) {
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(0.0, zmax)});
    return c;
}

inline Eigen::Vector3d random_unit(Rng& rng) {
    Eigen::Vector3d v;
    do {
        v = {rng.normal(1.0), rng.normal(1.0), rng.normal(1.0)};
    } while (v.norm() < 1e-6);
    return v.normalized();
}

// full 6-DoF rigid motion
inline RigidTransform random_rigid(Rng& rng, double tmax = 5.0) {
    RigidTransform T;
    T.rotation = Eigen::AngleAxisd(rng.uniform(-3.141592653589793, 3.141592653589793),
                                   random_unit(rng))
                     .toRotationMatrix();
    T.translation = {rng.uniform(-tmax, tmax), rng.uniform(-tmax, tmax), rng.uniform(-tmax, tmax)};
    return T;
}

// 4-DoF motion: yaw about Z plus translation
inline RigidTransform random_yaw(Rng& rng, double tmax = 5.0) {
    return RigidTransform::yaw(
        rng.uniform(-3.141592653589793, 3.141592653589793),
        {rng.uniform(-tmax, tmax), rng.uniform(-tmax, tmax), rng.uniform(-tmax, tmax)});
}

// unique scratch directory, removed on destruction
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("stemalign_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fwrite(content.data(), 1, content.size(), f);
    std::fclose(f);
}

inline std::string read_text(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
}

}  // namespace testutil
