#include "stemalign/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "stemalign/error.hpp"

namespace stemalign {

namespace {

bool is_rotation(const Eigen::Matrix3d& R) {
    return ((R.transpose() * R - Eigen::Matrix3d::Identity()).array().abs() <= 1e-9).all() &&
           std::abs(R.determinant() - 1.0) <= 1e-9;
}

}  // namespace

double rotation_error(const Eigen::Matrix3d& R, const Eigen::Matrix3d& R_truth) {
    if (!is_rotation(R) || !is_rotation(R_truth))
        throw ArgumentError("rotation_error: input is not a rotation matrix");
    double arg = ((R_truth * R.transpose()).trace() - 1.0) * 0.5;
    return std::acos(std::clamp(arg, -1.0, 1.0));
}

double translation_error(const Eigen::Vector3d& t, const Eigen::Vector3d& t_truth) {
    return (t - t_truth).norm();
}

double pointwise_error(const PointCloud& src, const RigidTransform& T, const RigidTransform& T_truth) {
    if (src.empty()) throw ArgumentError("pointwise_error: empty cloud");
    double sum = 0.0;
    for (const Point3& p : src.points)
        sum += ((T.rotation * p.vec() + T.translation) - (T_truth.rotation * p.vec() + T_truth.translation))
                   .norm();
    return sum / static_cast<double>(src.size());
}

double horizontal_pointwise_error(const PointCloud& src, const RigidTransform& T,
                                  const RigidTransform& T_truth) {
    if (src.empty()) throw ArgumentError("horizontal_pointwise_error: empty cloud");
    double sum = 0.0;
    for (const Point3& p : src.points) {
        Eigen::Vector3d d =
            (T.rotation * p.vec() + T.translation) - (T_truth.rotation * p.vec() + T_truth.translation);
        sum += std::hypot(d.x(), d.y());
    }
    return sum / static_cast<double>(src.size());
}

RegistrationErrors registration_errors(const PointCloud& src, const RigidTransform& T,
                                       const RigidTransform& T_truth) {
    RegistrationErrors e;
    e.e_r = rotation_error(T.rotation, T_truth.rotation);
    e.e_t = translation_error(T.translation, T_truth.translation);
    e.e_p = pointwise_error(src, T, T_truth);
    return e;
}

bool success(double e_p, double threshold) {
    if (!(threshold > 0.0)) throw ArgumentError("success: threshold must be > 0");
    return e_p < threshold;
}

double success_rate(const std::vector<bool>& outcomes) {
    if (outcomes.empty()) throw ArgumentError("success_rate: empty outcome list");
    std::size_t ok = 0;
    for (bool b : outcomes)
        if (b) ++ok;
    return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

DetectionScores score_stem_map(const StemMap& detected, const StemMap& truth, double match_radius) {
    if (truth.count() == 0) throw ArgumentError("score_stem_map: empty truth map");
    if (!(match_radius > 0.0)) throw ArgumentError("score_stem_map: match_radius must be > 0");

    // all candidate pairs within radius, closest first, each stem used once
    struct Cand {
        double d;
        std::size_t det, tru;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < detected.count(); ++i) {
        for (std::size_t j = 0; j < truth.count(); ++j) {
            double d = distance(detected.positions[i], truth.positions[j]);
            if (d <= match_radius) cands.push_back({d, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.det != b.det) return a.det < b.det;
        return a.tru < b.tru;
    });
    std::vector<char> used_det(detected.count(), 0), used_tru(truth.count(), 0);
    std::size_t matched = 0;
    for (const Cand& c : cands) {
        if (used_det[c.det] || used_tru[c.tru]) continue;
        used_det[c.det] = 1;
        used_tru[c.tru] = 1;
        ++matched;
    }

    DetectionScores s;
    s.matched = matched;
    s.missed = truth.count() - matched;
    s.spurious = detected.count() - matched;
    s.precision = detected.count() > 0 ? static_cast<double>(matched) / static_cast<double>(detected.count()) : 0.0;
    s.recall = static_cast<double>(matched) / static_cast<double>(truth.count());
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

}  // namespace stemalign
