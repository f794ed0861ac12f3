#include <Eigen/Core>
#include <algorithm>

#include "stemalign/error.hpp"
#include "stemalign/match.hpp"

namespace stemalign {

void MatchParams::validate() const {
    if (knn_k < 2) throw ArgumentError("knn_k must be >= 2");
    if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be > 0");
}

std::optional<Triangle> canonicalize(const std::vector<Point3>& positions, std::size_t i,
                                     std::size_t j, std::size_t k) {
    if (i == j || j == k || i == k) return std::nullopt;
    std::array<std::size_t, 3> idx{i, j, k};
    std::sort(idx.begin(), idx.end());

    auto d2 = [&](std::size_t a, std::size_t b) { return squared_distance(positions[a], positions[b]); };
    // squared length of the edge opposite each slot
    std::array<double, 3> opp{d2(idx[1], idx[2]), d2(idx[0], idx[2]), d2(idx[0], idx[1])};

    // v0 faces the longest edge; exact ties fall to the smallest stem index,
    // which is slot order because idx is sorted
    int s0 = 0;
    for (int s = 1; s < 3; ++s)
        if (opp[s] > opp[s0]) s0 = s;
    std::size_t v0 = idx[static_cast<std::size_t>(s0)];
    std::array<std::size_t, 2> rest{};
    for (int s = 0, r = 0; s < 3; ++s)
        if (s != s0) rest[static_cast<std::size_t>(r++)] = idx[static_cast<std::size_t>(s)];

    Eigen::Vector3d e1 = positions[rest[0]].vec() - positions[v0].vec();
    Eigen::Vector3d e2 = positions[rest[1]].vec() - positions[v0].vec();
    Eigen::Vector3d n = e1.cross(e2);

    // counter-clockwise around the normal with positive z; triangles in a
    // vertical plane fall back to the x then y component of the normal
    bool swap;
    if (n.z() != 0.0) swap = n.z() < 0.0;
    else if (n.x() != 0.0) swap = n.x() < 0.0;
    else if (n.y() != 0.0) swap = n.y() < 0.0;
    else return std::nullopt;  // collinear
    std::size_t v1 = rest[0], v2 = rest[1];
    if (swap) std::swap(v1, v2);

    Triangle t;
    t.v = {v0, v1, v2};
    t.edges = {distance(positions[v0], positions[v1]), distance(positions[v1], positions[v2]),
               distance(positions[v2], positions[v0])};
    double area = 0.5 * n.norm();
    double longest = std::max({t.edges[0], t.edges[1], t.edges[2]});
    if (2.0 * area / longest < 0.01) return std::nullopt;  // min altitude gate
    return t;
}

std::vector<Triangle> build_triangles(const StemMap& stems, const MatchParams& params) {
    params.validate();
    const auto& P = stems.positions;
    if (P.size() < 3)
        throw DataError("build_triangles: need at least 3 stems, got " + std::to_string(P.size()));

    SpatialIndex index(P);
    const std::size_t K = std::min(params.knn_k, P.size() - 1);

    std::vector<std::array<std::size_t, 3>> triples;
    triples.reserve(P.size() * K * (K - 1) / 2);
    std::vector<std::size_t> nbs;
    for (std::size_t s = 0; s < P.size(); ++s) {
        auto hits = index.knn(P[s], K + 1);  // the stem itself lands in its own result
        nbs.clear();
        for (const auto& [h, dist] : hits)
            if (h != s) nbs.push_back(h);
        if (nbs.size() > K) nbs.resize(K);
        for (std::size_t a = 0; a < nbs.size(); ++a) {
            for (std::size_t b = a + 1; b < nbs.size(); ++b) {
                std::array<std::size_t, 3> t{s, nbs[a], nbs[b]};
                std::sort(t.begin(), t.end());
                triples.push_back(t);
            }
        }
    }
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());

    std::vector<Triangle> out;
    out.reserve(triples.size());
    for (const auto& t : triples)
        if (auto tri = canonicalize(P, t[0], t[1], t[2])) out.push_back(*tri);
    return out;
}

std::optional<double> local_dissimilarity(const Triangle& a, const Triangle& b, double epsilon) {
    double sum = 0.0;
    for (int s = 0; s < 3; ++s) {
        double d = std::abs(a.edges[static_cast<std::size_t>(s)] - b.edges[static_cast<std::size_t>(s)]);
        if (!(d < epsilon)) return std::nullopt;
        sum += d;
    }
    return sum;
}

}  // namespace stemalign
