#include <algorithm>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include "stemalign/error.hpp"
#include "stemalign/match.hpp"
#include "stemalign/parallel.hpp"

namespace stemalign {

std::vector<MatchedPair> local_match(const std::vector<Triangle>& src,
                                     const std::vector<Triangle>& tgt, const MatchParams& params,
                                     MatchStats* stats) {
    params.validate();
    if (src.empty() || tgt.empty()) throw DataError("local_match: empty triangle set");

    const double eps = params.epsilon;
    std::vector<MatchedPair> best(tgt.size());
    std::vector<char> has(tgt.size(), 0);
    // real iteration counts, so the quadratic-complexity contract is measured
    // rather than assumed
    std::vector<std::uint64_t> tests(tgt.size(), 0);

    parallel_chunks(tgt.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const Triangle& tt = tgt[t];
            double best_d = std::numeric_limits<double>::infinity();
            std::size_t best_s = src.size();
            std::uint64_t n_tests = 0;
            for (std::size_t s = 0; s < src.size(); ++s) {
                ++n_tests;
                const Triangle& ts = src[s];
                double d0 = std::abs(ts.edges[0] - tt.edges[0]);
                if (!(d0 < eps)) continue;
                double d1 = std::abs(ts.edges[1] - tt.edges[1]);
                if (!(d1 < eps)) continue;
                double d2 = std::abs(ts.edges[2] - tt.edges[2]);
                if (!(d2 < eps)) continue;
                double sum = d0 + d1 + d2;
                if (sum < best_d) {  // ties keep the earlier source index
                    best_d = sum;
                    best_s = s;
                }
            }
            tests[t] = n_tests;
            if (best_s < src.size()) {
                best[t] = MatchedPair{best_s, t, best_d};
                has[t] = 1;
            }
        }
    });

    std::vector<MatchedPair> pairs;
    std::uint64_t total_tests = 0;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
        total_tests += tests[t];
        if (has[t]) pairs.push_back(best[t]);
    }
    if (stats) {
        stats->src_triangles = src.size();
        stats->tgt_triangles = tgt.size();
        stats->local_pair_tests = total_tests;
        stats->matched_pairs = pairs.size();
    }
    if (pairs.empty())
        throw DataError(
            "local_match: insufficient correspondences, no triangle pair passed the edge gate");
    return pairs;
}

double global_dissimilarity(const MatchedPair& u1, const MatchedPair& u2,
                            const std::vector<Triangle>& src_tris,
                            const std::vector<Triangle>& tgt_tris, const StemMap& src,
                            const StemMap& tgt) {
    const Triangle& s1 = src_tris[u1.src_tri];
    const Triangle& s2 = src_tris[u2.src_tri];
    const Triangle& t1 = tgt_tris[u1.tgt_tri];
    const Triangle& t2 = tgt_tris[u2.tgt_tri];
    double dmax = 0.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double es = distance(src.positions[s1.v[static_cast<std::size_t>(a)]],
                                 src.positions[s2.v[static_cast<std::size_t>(b)]]);
            double et = distance(tgt.positions[t1.v[static_cast<std::size_t>(a)]],
                                 tgt.positions[t2.v[static_cast<std::size_t>(b)]]);
            dmax = std::max(dmax, std::abs(es - et));
        }
    }
    return dmax;
}

CorrespondenceSet global_match(const std::vector<MatchedPair>& pairs, const MatchParams& params,
                               const std::vector<Triangle>& src_tris,
                               const std::vector<Triangle>& tgt_tris, const StemMap& src,
                               const StemMap& tgt, MatchStats* stats) {
    params.validate();
    if (pairs.empty()) throw DataError("global_match: no matched pairs");
    const std::size_t n = pairs.size();
    const double eps = params.epsilon;

    // vertex indices per pair, plus dense stem distance matrices, so a single
    // cross-edge test is two loads and a subtraction
    std::vector<std::array<std::size_t, 3>> sv(n), tv(n);
    for (std::size_t i = 0; i < n; ++i) {
        sv[i] = src_tris[pairs[i].src_tri].v;
        tv[i] = tgt_tris[pairs[i].tgt_tri].v;
    }
    const std::size_t ns = src.count(), nt = tgt.count();
    std::vector<double> Ds(ns * ns), Dt(nt * nt);
    parallel_chunks(ns, [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a)
            for (std::size_t b = 0; b < ns; ++b) Ds[a * ns + b] = distance(src.positions[a], src.positions[b]);
    });
    parallel_chunks(nt, [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a)
            for (std::size_t b = 0; b < nt; ++b) Dt[a * nt + b] = distance(tgt.positions[a], tgt.positions[b]);
    });

    // Algorithm 1, exhaustively: every pair seeds a consensus set and every
    // other pair is tested against it. A test may stop at the first cross
    // edge at >= eps; a member's dissimilarity needs all nine edges anyway.
    std::vector<std::size_t> count(n, 1);
    std::vector<double> sum_d(n, 0.0);
    std::vector<std::uint64_t> tests(n, 0);
    parallel_for(n, [&](std::size_t i) {
        std::size_t c = 1;
        double sd = 0.0;
        std::uint64_t tc = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            ++tc;
            double dmax = 0.0;
            bool reject = false;
            for (int a = 0; a < 3 && !reject; ++a) {
                const double* ds_row = &Ds[sv[i][static_cast<std::size_t>(a)] * ns];
                const double* dt_row = &Dt[tv[i][static_cast<std::size_t>(a)] * nt];
                for (int b = 0; b < 3; ++b) {
                    double diff = std::abs(ds_row[sv[j][static_cast<std::size_t>(b)]] -
                                           dt_row[tv[j][static_cast<std::size_t>(b)]]);
                    if (diff >= eps) {
                        reject = true;
                        break;
                    }
                    if (diff > dmax) dmax = diff;
                }
            }
            if (!reject) {
                ++c;
                sd += dmax;
            }
        }
        count[i] = c;
        sum_d[i] = sd;
        tests[i] = tc;
    });

    // winner: largest set, then smallest mean member dissimilarity, then
    // smallest seed index
    auto mean_d = [&](std::size_t i) { return count[i] > 1 ? sum_d[i] / static_cast<double>(count[i] - 1) : 0.0; };
    std::size_t winner = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (count[i] > count[winner] || (count[i] == count[winner] && mean_d(i) < mean_d(winner))) winner = i;
    }

    std::uint64_t total_tests = 0;
    for (std::uint64_t t : tests) total_tests += t;
    if (stats) {
        stats->global_pair_tests = total_tests;
        stats->consensus_size = count[winner];
    }

    // rebuild the winning membership (bookkeeping, not additional matching work)
    std::vector<std::size_t> members;
    members.reserve(count[winner]);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == winner) {
            members.push_back(j);
            continue;
        }
        bool member = true;
        for (int a = 0; a < 3 && member; ++a) {
            for (int b = 0; b < 3; ++b) {
                double diff = std::abs(Ds[sv[winner][static_cast<std::size_t>(a)] * ns +
                                          sv[j][static_cast<std::size_t>(b)]] -
                                       Dt[tv[winner][static_cast<std::size_t>(a)] * nt +
                                          tv[j][static_cast<std::size_t>(b)]]);
                if (diff >= eps) {
                    member = false;
                    break;
                }
            }
        }
        if (member) members.push_back(j);
    }

    // vertex votes: multiplicity across member pairs, ties by accumulated
    // local dissimilarity, then by index; greedy extraction keeps both sides
    // injective
    struct Vote {
        std::size_t mult = 0;
        double cum = 0.0;
    };
    std::unordered_map<std::uint64_t, Vote> votes;
    for (std::size_t m : members) {
        for (int a = 0; a < 3; ++a) {
            std::uint64_t key = (static_cast<std::uint64_t>(sv[m][static_cast<std::size_t>(a)]) << 32) |
                                static_cast<std::uint64_t>(tv[m][static_cast<std::size_t>(a)]);
            Vote& v = votes[key];
            ++v.mult;
            v.cum += pairs[m].dissimilarity;
        }
    }
    struct Cand {
        std::size_t s, t, mult;
        double cum;
    };
    std::vector<Cand> cands;
    cands.reserve(votes.size());
    for (const auto& [key, v] : votes)
        cands.push_back({static_cast<std::size_t>(key >> 32), static_cast<std::size_t>(key & 0xffffffffu),
                         v.mult, v.cum});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.mult != b.mult) return a.mult > b.mult;
        if (a.cum != b.cum) return a.cum < b.cum;
        if (a.s != b.s) return a.s < b.s;
        return a.t < b.t;
    });

    std::vector<char> used_s(ns, 0), used_t(nt, 0);
    CorrespondenceSet out;
    for (const Cand& c : cands) {
        if (used_s[c.s] || used_t[c.t]) continue;
        used_s[c.s] = 1;
        used_t[c.t] = 1;
        out.pairs.emplace_back(c.s, c.t);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    if (out.count() < 3)
        throw DataError("global_match: insufficient correspondences (need >= 3, got " +
                        std::to_string(out.count()) + ")");
    return out;
}

CorrespondenceSet match_stems(const StemMap& src, const StemMap& tgt, const MatchParams& params,
                              MatchStats* stats) {
    std::vector<Triangle> ts = build_triangles(src, params);
    std::vector<Triangle> tt = build_triangles(tgt, params);
    std::vector<MatchedPair> pairs = local_match(ts, tt, params, stats);
    return global_match(pairs, params, ts, tt, src, tgt, stats);
}

void write_correspondences(const CorrespondenceSet& corr, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open " + path + " for writing");
    for (const auto& [s, t] : corr.pairs) std::fprintf(f, "%zu %zu\n", s, t);
    if (std::fclose(f) != 0) throw IoError("write failure on " + path);
}

}  // namespace stemalign
