#pragma once

#include <string>

#include "stemalign/point.hpp"
#include "stemalign/transform.hpp"

namespace stemalign {

enum class CloudFormat { XyzAscii, PlyAscii, PlyBinaryLe };

// "xyz-ascii" / "ply-ascii" / "ply-binary-le"
CloudFormat cloud_format_from_name(const std::string& name);
std::string cloud_format_name(CloudFormat fmt);

// Picks the format from the file itself: .ply files get their header sniffed
// to separate ascii from binary_little_endian, everything else is xyz-ascii.
CloudFormat detect_cloud_format(const std::string& path);

// Write-side default for a path: .ply -> binary little endian, else xyz-ascii.
CloudFormat default_write_format(const std::string& path);

PointCloud read_cloud(const std::string& path, CloudFormat format);
PointCloud read_cloud(const std::string& path);  // detect_cloud_format

void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::string& path);  // default_write_format

// 4x4 row-major whitespace-separated matrix, bottom row (0,0,0,1) within 1e-9.
RigidTransform read_transform(const std::string& path);
void write_transform(const RigidTransform& T, const std::string& path);

}  // namespace stemalign
