#include "stemalign/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "stemalign/error.hpp"
#include "stemalign/rng.hpp"
#include "stemalign/transform.hpp"

namespace stemalign {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double GroundModel::height(double x, double y) const {
    switch (kind) {
        case GroundKind::flat: return z0;
        case GroundKind::tilted: return z0 + slope_x * x + slope_y * y;
        case GroundKind::sinusoidal:
            return z0 + amplitude * std::sin(kTwoPi * x / wavelength) * std::sin(kTwoPi * y / wavelength);
    }
    return z0;
}

void ForestSpec::validate() const {
    if (!(extent_x > 0.0 && extent_y > 0.0)) throw ArgumentError("forest extent must be > 0");
    if (!(radius_min > 0.0 && radius_min <= radius_max)) throw ArgumentError("stem radius range invalid");
    if (!(height_min > 0.0 && height_min <= height_max)) throw ArgumentError("stem height range invalid");
    if (layout == LayoutKind::uniform) {
        if (stem_count == 0) throw ArgumentError("stem_count must be >= 1");
        if (!(min_spacing > 2.0 * radius_max))
            throw ArgumentError("min_spacing must exceed twice the max stem radius");
    } else {
        if (!(grid_spacing > 2.0 * radius_max))
            throw ArgumentError("grid_spacing must exceed twice the max stem radius");
    }
    if (ground_density < 0.0 || wall_density < 0.0 || clutter_density < 0.0 || canopy_blob_points < 0.0)
        throw ArgumentError("densities must be >= 0");
    if (clutter_density > 0.0 && !(clutter_low < clutter_high))
        throw ArgumentError("clutter band must satisfy low < high");
    if (ground.kind == GroundKind::sinusoidal && !(ground.wavelength > 0.0))
        throw ArgumentError("sinusoidal wavelength must be > 0");
    if (noise_sigma < 0.0) throw ArgumentError("noise_sigma must be >= 0");
}

void ScanPairSpec::validate() const {
    forest.validate();
    if (!(dropout_src >= 0.0 && dropout_src < 1.0 && dropout_tgt >= 0.0 && dropout_tgt < 1.0))
        throw ArgumentError("dropout fractions must lie in [0, 1)");
    if (!(wedge_fraction >= 0.0 && wedge_fraction < 1.0))
        throw ArgumentError("wedge_fraction must lie in [0, 1)");
    if (!truth.valid()) throw ArgumentError("planted transform is not a valid rigid motion");
}

namespace {

// rng stream ids; stems get 1000+s for walls and 500000+s for canopy
enum StreamId : std::uint64_t {
    kLayout = 0,
    kGround = 1,
    kClutter = 2,
    kForestNoise = 3,
    kOcclusionSrc = 10,
    kOcclusionTgt = 11,
    kNoiseSrc = 20,
    kNoiseTgt = 21,
    kWallBase = 1000,
    kCanopyBase = 500000,
};

struct StemTruth {
    double cx, cy, radius, height;
};

struct ForestData {
    std::vector<StemTruth> stems;
    PointCloud ground, clutter;
    std::vector<PointCloud> walls, canopy;  // per stem
};

std::vector<StemTruth> place_stems(const ForestSpec& s, Rng& lay) {
    std::vector<StemTruth> stems;
    if (s.layout == LayoutKind::uniform) {
        double margin = 0.5 * s.min_spacing;
        if (2.0 * margin >= s.extent_x || 2.0 * margin >= s.extent_y)
            throw DataError("generate_forest: extent too small for the requested spacing");
        std::size_t attempts = 0, max_attempts = s.stem_count * 1000;
        while (stems.size() < s.stem_count && attempts < max_attempts) {
            ++attempts;
            double x = lay.uniform(margin, s.extent_x - margin);
            double y = lay.uniform(margin, s.extent_y - margin);
            bool ok = true;
            for (const StemTruth& t : stems) {
                if (std::hypot(t.cx - x, t.cy - y) < s.min_spacing) {
                    ok = false;
                    break;
                }
            }
            if (ok) stems.push_back({x, y, 0.0, 0.0});
        }
        if (stems.size() < s.stem_count)
            throw DataError("generate_forest: could not place " + std::to_string(s.stem_count) +
                            " stems at min spacing " + std::to_string(s.min_spacing) +
                            " m after bounded retries");
    } else {
        auto n_along = [&](double extent) { return static_cast<std::size_t>(std::floor(extent / s.grid_spacing)); };
        std::size_t nx = n_along(s.extent_x), ny = n_along(s.extent_y);
        if (nx == 0 || ny == 0) throw DataError("generate_forest: grid_spacing exceeds the extent");
        for (std::size_t iy = 0; iy < ny; ++iy)
            for (std::size_t ix = 0; ix < nx; ++ix)
                stems.push_back({(static_cast<double>(ix) + 0.5) * s.grid_spacing,
                                 (static_cast<double>(iy) + 0.5) * s.grid_spacing, 0.0, 0.0});
    }
    for (StemTruth& t : stems) {
        t.radius = lay.uniform(s.radius_min, s.radius_max);
        t.height = lay.uniform(s.height_min, s.height_max);
    }
    return stems;
}

ForestData build_forest(const ForestSpec& s) {
    s.validate();
    ForestData f;
    Rng root(s.rng_seed);

    Rng lay = root.fork(kLayout);
    f.stems = place_stems(s, lay);

    Rng g = root.fork(kGround);
    auto n_ground = static_cast<std::size_t>(std::llround(s.ground_density * s.extent_x * s.extent_y));
    f.ground.points.reserve(n_ground);
    for (std::size_t i = 0; i < n_ground; ++i) {
        double x = g.uniform(0.0, s.extent_x), y = g.uniform(0.0, s.extent_y);
        f.ground.points.push_back({x, y, s.ground.height(x, y)});
    }

    Rng c = root.fork(kClutter);
    auto n_clutter = static_cast<std::size_t>(std::llround(s.clutter_density * s.extent_x * s.extent_y));
    f.clutter.points.reserve(n_clutter);
    for (std::size_t i = 0; i < n_clutter; ++i) {
        double x = c.uniform(0.0, s.extent_x), y = c.uniform(0.0, s.extent_y);
        f.clutter.points.push_back({x, y, s.ground.height(x, y) + c.uniform(s.clutter_low, s.clutter_high)});
    }

    f.walls.resize(f.stems.size());
    f.canopy.resize(f.stems.size());
    for (std::size_t si = 0; si < f.stems.size(); ++si) {
        const StemTruth& t = f.stems[si];
        double base_z = s.ground.height(t.cx, t.cy);
        Rng w = root.fork(kWallBase + si);
        auto n_wall = static_cast<std::size_t>(std::llround(s.wall_density * kTwoPi * t.radius * t.height));
        f.walls[si].points.reserve(n_wall);
        for (std::size_t i = 0; i < n_wall; ++i) {
            double theta = w.uniform(0.0, kTwoPi);
            double u = w.next_double();
            f.walls[si].points.push_back({t.cx + t.radius * std::cos(theta),
                                          t.cy + t.radius * std::sin(theta), base_z + u * t.height});
        }
        if (s.canopy_blob_points > 0.0) {
            Rng cb = root.fork(kCanopyBase + si);
            auto n_blob = static_cast<std::size_t>(std::llround(s.canopy_blob_points));
            f.canopy[si].points.reserve(n_blob);
            double top = base_z + t.height;
            for (std::size_t i = 0; i < n_blob; ++i)
                f.canopy[si].points.push_back(
                    {t.cx + cb.normal(0.8), t.cy + cb.normal(0.8), top + 0.8 + cb.normal(0.5)});
        }
    }
    return f;
}

void add_noise(PointCloud& cloud, double sigma, Rng rng) {
    if (sigma <= 0.0) return;
    for (Point3& p : cloud.points) {
        p.x += rng.normal(sigma);
        p.y += rng.normal(sigma);
        p.z += rng.normal(sigma);
    }
}

}  // namespace

SynthForest generate_forest(const ForestSpec& spec) {
    ForestData f = build_forest(spec);
    SynthForest out;
    out.cloud.points.reserve(f.ground.size() + f.clutter.size());
    for (const Point3& p : f.ground.points) out.cloud.points.push_back(p);
    for (const PointCloud& w : f.walls)
        for (const Point3& p : w.points) out.cloud.points.push_back(p);
    for (const Point3& p : f.clutter.points) out.cloud.points.push_back(p);
    for (const PointCloud& cb : f.canopy)
        for (const Point3& p : cb.points) out.cloud.points.push_back(p);
    add_noise(out.cloud, spec.noise_sigma, Rng(spec.rng_seed).fork(kForestNoise));

    out.truth_stems.positions.reserve(f.stems.size());
    for (const StemTruth& t : f.stems)
        out.truth_stems.positions.push_back({t.cx, t.cy, spec.ground.height(t.cx, t.cy)});
    return out;
}

SynthPair generate_pair(const ScanPairSpec& spec) {
    spec.validate();
    ForestData f = build_forest(spec.forest);
    Rng root(spec.forest.rng_seed);

    SynthPair out;
    out.truth = spec.truth;
    RigidTransform to_src = invert(spec.truth);

    std::vector<std::vector<char>> kept(2, std::vector<char>(f.stems.size(), 0));
    for (int scan = 0; scan < 2; ++scan) {
        const bool is_src = scan == 0;
        const CropRect& crop = is_src ? spec.crop_src : spec.crop_tgt;
        const double dropout = is_src ? spec.dropout_src : spec.dropout_tgt;
        Rng occ = root.fork(is_src ? kOcclusionSrc : kOcclusionTgt);

        // one dropout draw (and one wedge start, when wedges are on) per stem,
        // in stem order, so the stream is independent of crop decisions
        std::vector<char> dropped(f.stems.size(), 0);
        std::vector<double> wedge_start(f.stems.size(), 0.0);
        for (std::size_t si = 0; si < f.stems.size(); ++si) {
            dropped[si] = occ.next_double() < dropout ? 1 : 0;
            if (spec.wedge_fraction > 0.0) wedge_start[si] = occ.uniform(0.0, kTwoPi);
        }

        PointCloud cloud;
        for (const Point3& p : f.ground.points)
            if (crop.contains(p.x, p.y)) cloud.points.push_back(p);
        const double wedge_width = kTwoPi * spec.wedge_fraction;
        for (std::size_t si = 0; si < f.stems.size(); ++si) {
            if (dropped[si]) continue;
            const StemTruth& t = f.stems[si];
            for (const Point3& p : f.walls[si].points) {
                if (!crop.contains(p.x, p.y)) continue;
                if (wedge_width > 0.0) {
                    double theta = std::atan2(p.y - t.cy, p.x - t.cx);
                    double rel = std::fmod(theta - wedge_start[si] + 2.0 * kTwoPi, kTwoPi);
                    if (rel < wedge_width) continue;
                }
                cloud.points.push_back(p);
            }
        }
        for (const Point3& p : f.clutter.points)
            if (crop.contains(p.x, p.y)) cloud.points.push_back(p);
        for (std::size_t si = 0; si < f.stems.size(); ++si) {
            if (dropped[si]) continue;
            for (const Point3& p : f.canopy[si].points)
                if (crop.contains(p.x, p.y)) cloud.points.push_back(p);
        }
        if (cloud.empty()) throw DataError("generate_pair: crop removed every point of one scan");

        StemMap stems;
        std::vector<std::size_t> ids;
        for (std::size_t si = 0; si < f.stems.size(); ++si) {
            if (dropped[si] || !crop.contains(f.stems[si].cx, f.stems[si].cy)) continue;
            kept[static_cast<std::size_t>(scan)][si] = 1;
            stems.positions.push_back({f.stems[si].cx, f.stems[si].cy,
                                       spec.forest.ground.height(f.stems[si].cx, f.stems[si].cy)});
            ids.push_back(si);
        }

        if (is_src) {
            cloud = apply_transform(cloud, to_src);
            for (Point3& p : stems.positions) p = to_src.apply(p);
            add_noise(cloud, spec.forest.noise_sigma, root.fork(kNoiseSrc));
            out.src = std::move(cloud);
            out.src_stems = std::move(stems);
            out.src_stem_ids = std::move(ids);
        } else {
            add_noise(cloud, spec.forest.noise_sigma, root.fork(kNoiseTgt));
            out.tgt = std::move(cloud);
            out.tgt_stems = std::move(stems);
            out.tgt_stem_ids = std::move(ids);
        }
    }

    out.shared_stems = 0;
    for (std::size_t si = 0; si < f.stems.size(); ++si)
        if (kept[0][si] && kept[1][si]) ++out.shared_stems;
    out.low_overlap = out.shared_stems < 3;
    return out;
}

namespace {

double to_double(const std::string& v, const std::string& where) {
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(d))
        throw ParseError(where + ": bad number '" + v + "'");
    return d;
}

CropRect to_crop(const std::string& v, const std::string& where) {
    std::istringstream iss(v);
    CropRect r;
    if (!(iss >> r.xmin >> r.xmax >> r.ymin >> r.ymax))
        throw ParseError(where + ": crop needs 'xmin xmax ymin ymax'");
    std::string extra;
    if (iss >> extra) throw ParseError(where + ": crop needs exactly 4 numbers");
    if (!(r.xmin < r.xmax && r.ymin < r.ymax)) throw ParseError(where + ": crop rectangle is empty");
    return r;
}

}  // namespace

ScanPairSpec parse_pair_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    ScanPairSpec spec;
    double yaw_deg = 0.0, tilt_x_deg = 0.0, tilt_y_deg = 0.0, tx = 0.0, ty = 0.0, tz = 0.0;
    bool have_stem_count = false;
    std::vector<std::string> problems;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::size_t eq = line.find('=');
        std::string where = path + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            problems.push_back(where + ": expected key=value");
            continue;
        }
        auto trim = [](std::string sv) {
            std::size_t b = sv.find_first_not_of(" \t");
            std::size_t e = sv.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : sv.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            ForestSpec& fs = spec.forest;
            if (key == "extent_x") fs.extent_x = to_double(val, where);
            else if (key == "extent_y") fs.extent_y = to_double(val, where);
            else if (key == "stem_count") {
                fs.stem_count = static_cast<std::size_t>(to_double(val, where));
                have_stem_count = true;
            } else if (key == "layout") {
                if (val == "uniform") fs.layout = LayoutKind::uniform;
                else if (val == "grid") fs.layout = LayoutKind::grid;
                else throw ParseError(where + ": layout must be 'uniform' or 'grid'");
            } else if (key == "min_spacing") fs.min_spacing = to_double(val, where);
            else if (key == "grid_spacing") fs.grid_spacing = to_double(val, where);
            else if (key == "radius_min") fs.radius_min = to_double(val, where);
            else if (key == "radius_max") fs.radius_max = to_double(val, where);
            else if (key == "height_min") fs.height_min = to_double(val, where);
            else if (key == "height_max") fs.height_max = to_double(val, where);
            else if (key == "ground") {
                if (val == "flat") fs.ground.kind = GroundKind::flat;
                else if (val == "tilted") fs.ground.kind = GroundKind::tilted;
                else if (val == "sinusoidal") fs.ground.kind = GroundKind::sinusoidal;
                else throw ParseError(where + ": ground must be flat, tilted, or sinusoidal");
            } else if (key == "z0") fs.ground.z0 = to_double(val, where);
            else if (key == "slope_x") fs.ground.slope_x = to_double(val, where);
            else if (key == "slope_y") fs.ground.slope_y = to_double(val, where);
            else if (key == "amplitude") fs.ground.amplitude = to_double(val, where);
            else if (key == "wavelength") fs.ground.wavelength = to_double(val, where);
            else if (key == "ground_density") fs.ground_density = to_double(val, where);
            else if (key == "wall_density") fs.wall_density = to_double(val, where);
            else if (key == "clutter_density") fs.clutter_density = to_double(val, where);
            else if (key == "clutter_low") fs.clutter_low = to_double(val, where);
            else if (key == "clutter_high") fs.clutter_high = to_double(val, where);
            else if (key == "canopy_blob_points") fs.canopy_blob_points = to_double(val, where);
            else if (key == "noise_sigma") fs.noise_sigma = to_double(val, where);
            else if (key == "seed") fs.rng_seed = static_cast<std::uint64_t>(to_double(val, where));
            else if (key == "yaw_deg") yaw_deg = to_double(val, where);
            else if (key == "tilt_x_deg") tilt_x_deg = to_double(val, where);
            else if (key == "tilt_y_deg") tilt_y_deg = to_double(val, where);
            else if (key == "tx") tx = to_double(val, where);
            else if (key == "ty") ty = to_double(val, where);
            else if (key == "tz") tz = to_double(val, where);
            else if (key == "dropout_src") spec.dropout_src = to_double(val, where);
            else if (key == "dropout_tgt") spec.dropout_tgt = to_double(val, where);
            else if (key == "wedge_fraction") spec.wedge_fraction = to_double(val, where);
            else if (key == "crop_src") spec.crop_src = to_crop(val, where);
            else if (key == "crop_tgt") spec.crop_tgt = to_crop(val, where);
            else problems.push_back(where + ": unknown key '" + key + "'");
        } catch (const ParseError& e) {
            problems.push_back(e.what());
        }
    }
    if (spec.forest.layout == LayoutKind::uniform && !have_stem_count)
        problems.push_back(path + ": missing required key 'stem_count'");
    if (!problems.empty()) {
        std::string msg = "spec errors:";
        for (const std::string& p : problems) msg += "\n  " + p;
        throw ParseError(msg);
    }

    const double deg = kTwoPi / 360.0;
    if (tilt_x_deg == 0.0 && tilt_y_deg == 0.0) {
        spec.truth = RigidTransform::yaw(yaw_deg * deg, Eigen::Vector3d(tx, ty, tz));
    } else {
        Eigen::Matrix3d R(Eigen::AngleAxisd(yaw_deg * deg, Eigen::Vector3d::UnitZ()) *
                          Eigen::AngleAxisd(tilt_y_deg * deg, Eigen::Vector3d::UnitY()) *
                          Eigen::AngleAxisd(tilt_x_deg * deg, Eigen::Vector3d::UnitX()));
        spec.truth.rotation = R;
        spec.truth.translation = Eigen::Vector3d(tx, ty, tz);
    }
    spec.validate();
    return spec;
}

}  // namespace stemalign
