// stemalign command line: map / match / register / eval / synth subcommands.
// Diagnostics go to stderr, data and metrics to stdout, so output can be piped.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stemalign/cloud_io.hpp"
#include "stemalign/error.hpp"
#include "stemalign/match.hpp"
#include "stemalign/metrics.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/registration.hpp"
#include "stemalign/stemmap.hpp"
#include "stemalign/synth.hpp"
#include "stemalign/transform.hpp"

namespace {

using namespace stemalign;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void apply_threads(int threads) {
    if (threads > 0) set_max_threads(threads);
}

// shared by map and register
void add_stem_options(CLI::App* sub, StemMapParams& p) {
    sub->add_option("--band-low", p.band_low, "lower height band bound above ground [m]")
        ->capture_default_str();
    sub->add_option("--band-high", p.band_high, "upper height band bound above ground [m]")
        ->capture_default_str();
    sub->add_option("--voxel-resolution", p.voxel_resolution, "downsampling voxel size [m]")
        ->capture_default_str();
    sub->add_option("--normal-radius", p.normal_radius, "PCA normal neighborhood radius [m]")
        ->capture_default_str();
    sub->add_option("--gamma", p.gamma, "verticality threshold in (0,1)")->capture_default_str();
    sub->add_option("--cluster-tolerance", p.cluster_tolerance, "euclidean cluster tolerance [m]")
        ->capture_default_str();
    sub->add_option("--cluster-min-size", p.cluster_min_size, "minimum cluster point count")
        ->capture_default_str();
    sub->add_option("--dtm-cell-size", p.dtm_cell_size, "terrain model cell size [m]")
        ->capture_default_str();
    sub->add_option("--distance-threshold", p.ransac.distance_threshold,
                    "RANSAC inlier distance to the cylinder surface [m]")
        ->capture_default_str();
    sub->add_option("--ransac-max-iterations", p.ransac.max_iterations, "RANSAC iteration count")
        ->capture_default_str();
    sub->add_option("--min-inlier-fraction", p.ransac.min_inlier_fraction,
                    "fraction of cluster points a cylinder must explain")
        ->capture_default_str();
    sub->add_option("--radius-min", p.ransac.radius_min, "smallest admissible stem radius [m]")
        ->capture_default_str();
    sub->add_option("--radius-max", p.ransac.radius_max, "largest admissible stem radius [m]")
        ->capture_default_str();
    sub->add_option("--seed", p.rng_seed, "RANSAC rng seed")->capture_default_str();
}

void add_match_options(CLI::App* sub, MatchParams& p) {
    sub->add_option("--knn-k", p.knn_k, "neighbor count of the triangle construction")
        ->capture_default_str();
    sub->add_option("--epsilon", p.epsilon, "edge-difference gate [m]")->capture_default_str();
}

std::string derive_fine_path(const std::string& out) {
    auto slash = out.find_last_of("/\\");
    auto dot = out.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return out + "_fine";
    return out.substr(0, dot) + "_fine" + out.substr(dot);
}

struct MapArgs {
    std::string in, out;
    StemMapParams params;
    int threads = 0;
    bool verbose = false;
};

void run_map(const MapArgs& a) {
    a.params.validate();  // reject bad flags before touching the input
    apply_threads(a.threads);
    auto t0 = std::chrono::steady_clock::now();
    PointCloud cloud = read_cloud(a.in);
    double t_read = seconds_since(t0);
    auto t1 = std::chrono::steady_clock::now();
    StemMap stems = map_stems(cloud, a.params);
    double t_map = seconds_since(t1);
    write_stem_map(stems, a.out);
    std::printf("n_stems=%zu\n", stems.count());
    if (a.verbose)
        std::fprintf(stderr, "[map] read %zu points in %.2f s\n", cloud.size(), t_read);
    std::fprintf(stderr, "[map] %zu points -> %zu stems in %.2f s, stem map written to %s\n",
                 cloud.size(), stems.count(), t_map, a.out.c_str());
}

struct MatchArgs {
    std::string src, tgt, out;
    MatchParams params;
    int threads = 0;
    bool verbose = false;
};

void run_match(const MatchArgs& a) {
    a.params.validate();
    apply_threads(a.threads);
    StemMap src = read_stem_map(a.src);
    StemMap tgt = read_stem_map(a.tgt);
    MatchStats stats;
    CorrespondenceSet corr = match_stems(src, tgt, a.params, &stats);
    if (a.out.empty()) {
        for (const auto& [s, t] : corr.pairs) std::printf("%zu %zu\n", s, t);
    } else {
        write_correspondences(corr, a.out);
    }
    std::fprintf(stderr,
                 "[match] src_triangles=%zu tgt_triangles=%zu local_pair_tests=%llu "
                 "matched_pairs=%zu global_pair_tests=%llu consensus_size=%zu "
                 "correspondences=%zu\n",
                 stats.src_triangles, stats.tgt_triangles,
                 static_cast<unsigned long long>(stats.local_pair_tests), stats.matched_pairs,
                 static_cast<unsigned long long>(stats.global_pair_tests), stats.consensus_size,
                 corr.count());
}

struct RegisterArgs {
    std::string src, tgt, out, out_fine;
    StemMapParams stem_params;
    MatchParams match_params;
    IcpParams icp_params;
    std::string mode = "4dof";
    bool icp = false;
    int threads = 0;
    bool verbose = false;
};

void run_register(const RegisterArgs& a) {
    a.stem_params.validate();
    a.match_params.validate();
    if (a.icp) a.icp_params.validate();
    apply_threads(a.threads);
    RegistrationMode mode =
        a.mode == "6dof" ? RegistrationMode::six_dof : RegistrationMode::four_dof;

    PointCloud src = read_cloud(a.src);
    PointCloud tgt = read_cloud(a.tgt);
    std::optional<IcpParams> icp;
    if (a.icp) icp = a.icp_params;
    RegisterResult r = register_pair(src, tgt, mode, a.stem_params, a.match_params, icp);

    write_transform(r.coarse, a.out);
    std::string fine_path;
    if (r.fine) {
        fine_path = a.out_fine.empty() ? derive_fine_path(a.out) : a.out_fine;
        write_transform(*r.fine, fine_path);
    }

    const Diagnostics& d = r.diagnostics;
    std::printf("n_stems_src=%zu\n", d.n_stems_src);
    std::printf("n_stems_tgt=%zu\n", d.n_stems_tgt);
    std::printf("src_triangles=%zu\n", d.match.src_triangles);
    std::printf("tgt_triangles=%zu\n", d.match.tgt_triangles);
    std::printf("local_pair_tests=%llu\n", static_cast<unsigned long long>(d.match.local_pair_tests));
    std::printf("matched_pairs=%zu\n", d.match.matched_pairs);
    std::printf("global_pair_tests=%llu\n",
                static_cast<unsigned long long>(d.match.global_pair_tests));
    std::printf("consensus_size=%zu\n", d.match.consensus_size);
    std::printf("n_correspondences=%zu\n", d.n_correspondences);
    std::printf("residual_rms=%.9g\n", d.residual_rms);
    std::fprintf(stderr,
                 "[register] map src %.2f s, map tgt %.2f s, match %.2f s, estimate %.3f s"
                 "%s%.2f s\n",
                 d.t_map_src, d.t_map_tgt, d.t_match, d.t_estimate, a.icp ? ", icp " : ", icp skipped ",
                 d.t_icp);
    std::fprintf(stderr, "[register] coarse transform written to %s\n", a.out.c_str());
    if (r.fine) std::fprintf(stderr, "[register] refined transform written to %s\n", fine_path.c_str());
}

struct EvalArgs {
    std::string est, truth, cloud;
    double threshold = 0.5;
    int threads = 0;
};

void run_eval(const EvalArgs& a) {
    if (!(a.threshold > 0.0)) throw ArgumentError("threshold must be > 0");
    apply_threads(a.threads);
    RigidTransform est = read_transform(a.est);
    RigidTransform truth = read_transform(a.truth);
    PointCloud src = read_cloud(a.cloud);
    RegistrationErrors e = registration_errors(src, est, truth);
    bool ok = success(e.e_p, a.threshold);
    std::printf("e_R_mrad=%.6f\n", e.e_r * 1000.0);
    std::printf("e_t_cm=%.6f\n", e.e_t * 100.0);
    std::printf("e_p_cm=%.6f\n", e.e_p * 100.0);
    std::printf("success=%s\n", ok ? "true" : "false");
    // machine-readable row, columns e_R_mrad,e_t_cm,e_p_cm,success
    std::printf("csv=%.6f,%.6f,%.6f,%d\n", e.e_r * 1000.0, e.e_t * 100.0, e.e_p * 100.0,
                ok ? 1 : 0);
}

struct SynthArgs {
    std::string spec_file, out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
};

const char* ground_name(GroundKind k) {
    switch (k) {
        case GroundKind::flat: return "flat";
        case GroundKind::tilted: return "tilted";
        case GroundKind::sinusoidal: return "sinusoidal";
    }
    return "flat";
}

void echo_spec(std::FILE* f, const ScanPairSpec& spec) {
    const ForestSpec& fs = spec.forest;
    std::fprintf(f, "extent_x=%.17g\n", fs.extent_x);
    std::fprintf(f, "extent_y=%.17g\n", fs.extent_y);
    std::fprintf(f, "layout=%s\n", fs.layout == LayoutKind::uniform ? "uniform" : "grid");
    if (fs.layout == LayoutKind::uniform) {
        std::fprintf(f, "stem_count=%zu\n", fs.stem_count);
        std::fprintf(f, "min_spacing=%.17g\n", fs.min_spacing);
    } else {
        std::fprintf(f, "grid_spacing=%.17g\n", fs.grid_spacing);
    }
    std::fprintf(f, "radius_min=%.17g\n", fs.radius_min);
    std::fprintf(f, "radius_max=%.17g\n", fs.radius_max);
    std::fprintf(f, "height_min=%.17g\n", fs.height_min);
    std::fprintf(f, "height_max=%.17g\n", fs.height_max);
    std::fprintf(f, "ground=%s\n", ground_name(fs.ground.kind));
    std::fprintf(f, "z0=%.17g\n", fs.ground.z0);
    if (fs.ground.kind == GroundKind::tilted) {
        std::fprintf(f, "slope_x=%.17g\n", fs.ground.slope_x);
        std::fprintf(f, "slope_y=%.17g\n", fs.ground.slope_y);
    }
    if (fs.ground.kind == GroundKind::sinusoidal) {
        std::fprintf(f, "amplitude=%.17g\n", fs.ground.amplitude);
        std::fprintf(f, "wavelength=%.17g\n", fs.ground.wavelength);
    }
    std::fprintf(f, "ground_density=%.17g\n", fs.ground_density);
    std::fprintf(f, "wall_density=%.17g\n", fs.wall_density);
    std::fprintf(f, "clutter_density=%.17g\n", fs.clutter_density);
    if (fs.clutter_density > 0.0) {
        std::fprintf(f, "clutter_low=%.17g\n", fs.clutter_low);
        std::fprintf(f, "clutter_high=%.17g\n", fs.clutter_high);
    }
    std::fprintf(f, "canopy_blob_points=%.17g\n", fs.canopy_blob_points);
    std::fprintf(f, "noise_sigma=%.17g\n", fs.noise_sigma);
    std::fprintf(f, "dropout_src=%.17g\n", spec.dropout_src);
    std::fprintf(f, "dropout_tgt=%.17g\n", spec.dropout_tgt);
    std::fprintf(f, "wedge_fraction=%.17g\n", spec.wedge_fraction);
    auto echo_crop = [f](const char* key, const CropRect& c) {
        if (c.xmin == std::numeric_limits<double>::lowest() &&
            c.xmax == std::numeric_limits<double>::max() &&
            c.ymin == std::numeric_limits<double>::lowest() &&
            c.ymax == std::numeric_limits<double>::max()) {
            std::fprintf(f, "%s=none\n", key);
        } else {
            std::fprintf(f, "%s=%.17g %.17g %.17g %.17g\n", key, c.xmin, c.xmax, c.ymin, c.ymax);
        }
    };
    echo_crop("crop_src", spec.crop_src);
    echo_crop("crop_tgt", spec.crop_tgt);
}

void run_synth(const SynthArgs& a) {
    apply_threads(a.threads);
    ScanPairSpec spec = parse_pair_spec(a.spec_file);
    if (a.seed_given) spec.forest.rng_seed = a.seed;
    SynthPair pair = generate_pair(spec);

    namespace fs = std::filesystem;
    fs::create_directories(a.out_dir);
    auto at = [&](const char* name) { return (fs::path(a.out_dir) / name).string(); };
    write_cloud(pair.src, at("src.ply"));
    write_cloud(pair.tgt, at("tgt.ply"));
    write_stem_map(pair.src_stems, at("src_stems.txt"));
    write_stem_map(pair.tgt_stems, at("tgt_stems.txt"));
    write_transform(pair.truth, at("truth_transform.txt"));

    std::FILE* mf = std::fopen(at("manifest.txt").c_str(), "w");
    if (!mf) throw IoError("cannot open " + at("manifest.txt"));
    std::fprintf(mf, "seed=%llu\n", static_cast<unsigned long long>(spec.forest.rng_seed));
    std::fprintf(mf, "src_points=%zu\n", pair.src.size());
    std::fprintf(mf, "tgt_points=%zu\n", pair.tgt.size());
    std::fprintf(mf, "src_stems=%zu\n", pair.src_stems.count());
    std::fprintf(mf, "tgt_stems=%zu\n", pair.tgt_stems.count());
    std::fprintf(mf, "shared_stems=%zu\n", pair.shared_stems);
    std::fprintf(mf, "low_overlap=%s\n", pair.low_overlap ? "true" : "false");
    echo_spec(mf, spec);
    std::fclose(mf);

    std::printf("src_points=%zu\n", pair.src.size());
    std::printf("tgt_points=%zu\n", pair.tgt.size());
    std::printf("src_stems=%zu\n", pair.src_stems.count());
    std::printf("tgt_stems=%zu\n", pair.tgt_stems.count());
    std::printf("shared_stems=%zu\n", pair.shared_stems);
    if (pair.low_overlap)
        std::fprintf(stderr,
                     "warning: only %zu stems survive in both scans; registration of this pair "
                     "will likely fail\n",
                     pair.shared_stems);
    std::fprintf(stderr, "[synth] pair written to %s\n", a.out_dir.c_str());
}

void add_common(CLI::App* sub, int& threads, bool* verbose = nullptr) {
    sub->add_option("--threads", threads, "worker thread bound (byte-identical output for any value)")
        ->capture_default_str();
    if (verbose) sub->add_flag("-v,--verbose", *verbose, "extra progress output on stderr");
    sub->add_option("--config", "read options from a key=value file (defaults < file < flags)");
}

// turn a key=value config file into --key=value tokens. CLI11 2.4 silently
// drops set_config on subcommands, so config files are expanded into the
// argument list instead; explicit flags still win because every non-positional
// option takes the last value given.
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::vector<std::string> toks;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto trim = [](const std::string& s) {
            auto b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(" \t") - b + 1);
        };
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        std::string key = eq == std::string::npos ? std::string() : trim(s.substr(0, eq));
        if (key.empty())
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
        toks.push_back("--" + key + "=" + trim(s.substr(eq + 1)));
    }
    return toks;
}

std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) return args;
    bool has_sub = false;
    for (const char* name : {"map", "match", "register", "eval", "synth"}) has_sub |= args[0] == name;
    if (!has_sub) return args;
    std::vector<std::string> injected;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string file;
        if (args[i] == "--config" && i + 1 < args.size())
            file = args[++i];
        else if (args[i].rfind("--config=", 0) == 0)
            file = args[i].substr(9);
        else
            continue;
        std::vector<std::string> toks = config_tokens(file);
        injected.insert(injected.end(), toks.begin(), toks.end());
    }
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stem-based registration of forest point clouds"};
    app.name("stemalign");  // the vector parse below does not infer argv[0]
    app.require_subcommand(1);

    MapArgs map_args;
    CLI::App* map = app.add_subcommand("map", "extract a stem map from a cloud");
    map->add_option("in_cloud", map_args.in, "input cloud (xyz or ply)")->required();
    map->add_option("out_stems", map_args.out, "output stem map path")->required();
    add_stem_options(map, map_args.params);
    add_common(map, map_args.threads, &map_args.verbose);

    MatchArgs match_args;
    CLI::App* match = app.add_subcommand("match", "match two stem maps");
    match->add_option("src_stems", match_args.src, "source stem map")->required();
    match->add_option("tgt_stems", match_args.tgt, "target stem map")->required();
    match->add_option("--out", match_args.out, "correspondence output path (default stdout)");
    add_match_options(match, match_args.params);
    add_common(match, match_args.threads, &match_args.verbose);

    RegisterArgs reg_args;
    CLI::App* reg = app.add_subcommand("register", "register a source cloud onto a target cloud");
    reg->add_option("src_cloud", reg_args.src, "source cloud")->required();
    reg->add_option("tgt_cloud", reg_args.tgt, "target cloud")->required();
    reg->add_option("--out", reg_args.out, "coarse transform output path")->required();
    reg->add_option("--out-fine", reg_args.out_fine,
                    "refined transform output path (default: out with _fine suffix)");
    reg->add_option("--mode", reg_args.mode, "transform model")
        ->check(CLI::IsMember({"4dof", "6dof"}))
        ->capture_default_str();
    reg->add_flag("--icp", reg_args.icp, "refine the coarse transform with ICP");
    add_stem_options(reg, reg_args.stem_params);
    add_match_options(reg, reg_args.match_params);
    reg->add_option("--max-correspondence-distance", reg_args.icp_params.max_correspondence_distance,
                    "ICP pairing distance [m]")
        ->capture_default_str();
    reg->add_option("--icp-max-iterations", reg_args.icp_params.max_iterations, "ICP iteration bound")
        ->capture_default_str();
    reg->add_option("--convergence-delta", reg_args.icp_params.convergence_delta,
                    "ICP convergence threshold on the transform change")
        ->capture_default_str();
    reg->add_option("--working-voxel", reg_args.icp_params.working_voxel,
                    "ICP working downsample voxel [m]")
        ->capture_default_str();
    add_common(reg, reg_args.threads, &reg_args.verbose);

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "score an estimated transform against the truth");
    eval->add_option("est_transform", eval_args.est, "estimated transform file")->required();
    eval->add_option("truth_transform", eval_args.truth, "ground-truth transform file")->required();
    eval->add_option("src_cloud", eval_args.cloud, "source cloud the transforms apply to")->required();
    eval->add_option("--threshold", eval_args.threshold, "success threshold on e_p [m]")
        ->capture_default_str();
    add_common(eval, eval_args.threads);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scan pair with ground truth");
    synth->add_option("spec_file", synth_args.spec_file, "key=value scene spec")->required();
    synth->add_option("out_dir", synth_args.out_dir, "output directory")->required();
    synth->add_option("--seed", synth_args.seed, "override the spec rng seed")
        ->each([&](const std::string&) { synth_args.seed_given = true; });
    add_common(synth, synth_args.threads);

    map->callback([&] { run_map(map_args); });
    match->callback([&] { run_match(match_args); });
    reg->callback([&] { run_register(reg_args); });
    eval->callback([&] { run_eval(eval_args); });
    synth->callback([&] { run_synth(synth_args); });

    // last value wins, which lets expanded config tokens precede explicit flags
    for (CLI::App* sub : {map, match, reg, eval, synth})
        for (CLI::Option* opt : sub->get_options())
            if (opt->nonpositional()) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const stemalign::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
