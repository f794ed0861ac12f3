#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stemalign/stemmap.hpp"

namespace stemalign {

struct MatchParams {
    std::size_t knn_k = 20;   // K of the K-nearest triangle construction
    double epsilon = 0.05;    // edge-difference gate, meters
    void validate() const;
};

// Canonical triangle over stem indices: v[0] faces the longest edge and the
// vertex walk is counter-clockwise seen from above. edges = (v0v1, v1v2, v2v0).
struct Triangle {
    std::array<std::size_t, 3> v;
    std::array<double, 3> edges;
};

// local_match output: one target triangle paired with its best source triangle
struct MatchedPair {
    std::size_t src_tri = 0;
    std::size_t tgt_tri = 0;
    double dissimilarity = 0.0;
};

struct MatchStats {
    std::size_t src_triangles = 0;
    std::size_t tgt_triangles = 0;
    std::uint64_t local_pair_tests = 0;   // = src_triangles * tgt_triangles
    std::size_t matched_pairs = 0;        // N_u
    std::uint64_t global_pair_tests = 0;  // = N_u * (N_u - 1)
    std::size_t consensus_size = 0;       // winning set member count
};

struct CorrespondenceSet {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (src stem, tgt stem)
    std::size_t count() const { return pairs.size(); }
};

// nullopt when the triple is degenerate (min altitude < 0.01 m)
std::optional<Triangle> canonicalize(const std::vector<Point3>& positions, std::size_t i,
                                     std::size_t j, std::size_t k);

// K-nearest construction, deduplicated by sorted index triple, sorted by it too
std::vector<Triangle> build_triangles(const StemMap& stems, const MatchParams& params);

// Eq. 4: sum of |edge diffs| when every diff < epsilon, else no-match
std::optional<double> local_dissimilarity(const Triangle& a, const Triangle& b, double epsilon);

std::vector<MatchedPair> local_match(const std::vector<Triangle>& src,
                                     const std::vector<Triangle>& tgt, const MatchParams& params,
                                     MatchStats* stats = nullptr);

// Eq. 5: max |cross-edge diff| over the 9 edges between the two pairs' triangles
double global_dissimilarity(const MatchedPair& u1, const MatchedPair& u2,
                            const std::vector<Triangle>& src_tris,
                            const std::vector<Triangle>& tgt_tris, const StemMap& src,
                            const StemMap& tgt);

CorrespondenceSet global_match(const std::vector<MatchedPair>& pairs, const MatchParams& params,
                               const std::vector<Triangle>& src_tris,
                               const std::vector<Triangle>& tgt_tris, const StemMap& src,
                               const StemMap& tgt, MatchStats* stats = nullptr);

CorrespondenceSet match_stems(const StemMap& src, const StemMap& tgt, const MatchParams& params,
                              MatchStats* stats = nullptr);

// ascii export, one "src_index tgt_index" per line
void write_correspondences(const CorrespondenceSet& corr, const std::string& path);

}  // namespace stemalign
