#include <array>
#include <chrono>
#include <cmath>
#include <string>

#include "stemalign/error.hpp"
#include "stemalign/parallel.hpp"
#include "stemalign/registration.hpp"

namespace stemalign {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RegisterResult register_pair(const PointCloud& src, const PointCloud& tgt, RegistrationMode mode,
                             const StemMapParams& stem_params, const MatchParams& match_params,
                             const std::optional<IcpParams>& icp) {
    stem_params.validate();
    match_params.validate();

    RegisterResult res;
    Diagnostics& diag = res.diagnostics;

    // the two mapping legs are independent; run them as two work items
    {
        std::array<double, 2> leg_time{};
        std::array<StemMap, 2> maps;
        std::array<std::string, 2> leg_error;
        parallel_for(2, [&](std::size_t leg) {
            auto t0 = std::chrono::steady_clock::now();
            try {
                maps[leg] = map_stems(leg == 0 ? src : tgt, stem_params);
            } catch (const Error& e) {
                leg_error[leg] = e.what();
            }
            leg_time[leg] = seconds_since(t0);
        });
        if (!leg_error[0].empty()) throw StageError("stem-mapping(src)", leg_error[0]);
        if (!leg_error[1].empty()) throw StageError("stem-mapping(tgt)", leg_error[1]);
        res.stems_src = std::move(maps[0]);
        res.stems_tgt = std::move(maps[1]);
        diag.t_map_src = leg_time[0];
        diag.t_map_tgt = leg_time[1];
    }
    diag.n_stems_src = res.stems_src.count();
    diag.n_stems_tgt = res.stems_tgt.count();

    {
        auto t0 = std::chrono::steady_clock::now();
        try {
            res.correspondences = match_stems(res.stems_src, res.stems_tgt, match_params, &diag.match);
        } catch (const Error& e) {
            throw StageError("matching", e.what());
        }
        diag.t_match = seconds_since(t0);
    }
    diag.n_correspondences = res.correspondences.count();

    {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<std::pair<Point3, Point3>> corr;
        corr.reserve(res.correspondences.count());
        for (const auto& [si, ti] : res.correspondences.pairs)
            corr.emplace_back(res.stems_src.positions[si], res.stems_tgt.positions[ti]);
        try {
            res.coarse = mode == RegistrationMode::four_dof ? estimate_4dof(corr) : estimate_6dof(corr);
        } catch (const Error& e) {
            throw StageError("estimation", e.what());
        }
        double ss = 0.0;
        for (const auto& [s, t] : corr) ss += squared_distance(res.coarse.apply(s), t);
        diag.residual_rms = std::sqrt(ss / static_cast<double>(corr.size()));
        diag.t_estimate = seconds_since(t0);
    }

    if (icp) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            res.fine = icp_refine(src, tgt, res.coarse, *icp);
        } catch (const Error& e) {
            throw StageError("icp", e.what());
        }
        diag.t_icp = seconds_since(t0);
    }
    return res;
}

}  // namespace stemalign
