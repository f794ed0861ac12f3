#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stemalign/point.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/transform.hpp"

namespace stemalign {

enum class GroundKind { flat, tilted, sinusoidal };

struct GroundModel {
    GroundKind kind = GroundKind::flat;
    double z0 = 0.0;
    double slope_x = 0.0, slope_y = 0.0;     // tilted
    double amplitude = 0.3, wavelength = 8.0;  // sinusoidal
    double height(double x, double y) const;
};

enum class LayoutKind { uniform, grid };

struct ForestSpec {
    double extent_x = 32.0, extent_y = 32.0;
    std::size_t stem_count = 100;  // uniform layout; the grid layout derives its own count
    LayoutKind layout = LayoutKind::uniform;
    double min_spacing = 1.5;
    double grid_spacing = 5.0;
    double radius_min = 0.10, radius_max = 0.22;
    double height_min = 3.5, height_max = 5.0;
    GroundModel ground;
    double ground_density = 30.0;   // pts/m^2 of ground
    double wall_density = 200.0;    // pts/m^2 of cylinder surface
    double clutter_density = 0.0;   // pts/m^2, scattered in [clutter_low, clutter_high)
    double clutter_low = 0.0, clutter_high = 1.5;
    double canopy_blob_points = 0.0;  // points per blob, one blob above each stem top
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;
    void validate() const;
};

struct CropRect {
    double xmin = std::numeric_limits<double>::lowest();
    double xmax = std::numeric_limits<double>::max();
    double ymin = std::numeric_limits<double>::lowest();
    double ymax = std::numeric_limits<double>::max();
    bool contains(double x, double y) const { return x >= xmin && x <= xmax && y >= ymin && y <= ymax; }
};

struct ScanPairSpec {
    ForestSpec forest;
    RigidTransform truth;  // maps src coordinates into the tgt frame
    double dropout_src = 0.0, dropout_tgt = 0.0;  // whole-stem removal probability
    double wedge_fraction = 0.0;  // fraction of each stem's azimuth removed per scan
    CropRect crop_src, crop_tgt;
    void validate() const;
};

struct SynthForest {
    PointCloud cloud;
    StemMap truth_stems;  // in placement order, positions exactly on the ground model
};

struct SynthPair {
    PointCloud src, tgt;
    RigidTransform truth;
    StemMap src_stems, tgt_stems;  // pre-noise truth positions, per-scan frames
    std::vector<std::size_t> src_stem_ids, tgt_stem_ids;  // forest stem index per entry
    std::size_t shared_stems = 0;
    bool low_overlap = false;  // fewer than 3 stems survive in both scans
};

SynthForest generate_forest(const ForestSpec& spec);
SynthPair generate_pair(const ScanPairSpec& spec);

// line-oriented key=value file; unknown or malformed entries are reported
// with their line numbers
ScanPairSpec parse_pair_spec(const std::string& path);

}  // namespace stemalign
