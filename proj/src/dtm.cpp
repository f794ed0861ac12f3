#include "stemalign/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stemalign/error.hpp"

namespace stemalign {

namespace {

double median_of(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Dtm build_dtm(const PointCloud& cloud, double cell_size) {
    if (!(cell_size > 0.0)) throw ArgumentError("build_dtm: cell_size must be > 0");
    if (cloud.size() < 10) throw DataError("build_dtm: need at least 10 points, got " + std::to_string(cloud.size()));

    double minx = cloud.points[0].x, maxx = minx;
    double miny = cloud.points[0].y, maxy = miny;
    double minz = cloud.points[0].z, maxz = minz;
    for (const Point3& p : cloud.points) {
        minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
        minz = std::min(minz, p.z); maxz = std::max(maxz, p.z);
    }

    Dtm dtm;
    dtm.cell_ = cell_size;
    dtm.origin_x_ = minx;
    dtm.origin_y_ = miny;
    dtm.nx_ = static_cast<std::size_t>(std::floor((maxx - minx) / cell_size)) + 1;
    dtm.ny_ = static_cast<std::size_t>(std::floor((maxy - miny) / cell_size)) + 1;
    const std::size_t nx = dtm.nx_, ny = dtm.ny_;
    const std::size_t ncells = nx * ny;

    std::vector<std::vector<double>> cell_z(ncells);
    for (const Point3& p : cloud.points) {
        std::size_t ix = std::min(static_cast<std::size_t>(std::floor((p.x - minx) / cell_size)), nx - 1);
        std::size_t iy = std::min(static_cast<std::size_t>(std::floor((p.y - miny) / cell_size)), ny - 1);
        cell_z[iy * nx + ix].push_back(p.z);
    }

    // robust minimum: 5th-percentile z (nearest rank), cells under 3 points invalid
    dtm.elev_.assign(ncells, 0.0);
    dtm.valid_.assign(ncells, 0);
    std::size_t n_valid = 0;
    for (std::size_t c = 0; c < ncells; ++c) {
        if (cell_z[c].size() < 3) continue;
        std::sort(cell_z[c].begin(), cell_z[c].end());
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(0.05 * static_cast<double>(cell_z[c].size())));
        dtm.elev_[c] = cell_z[c][rank > 0 ? rank - 1 : 0];
        dtm.valid_[c] = 1;
        ++n_valid;
    }
    if (n_valid == 0) throw DataError("build_dtm: no cell holds 3 points; cloud too sparse for the grid");

    // grow outward from valid cells: each wave fills cells that touch the
    // previous wave's filled set with the mean of those neighbors
    std::vector<char> filled = dtm.valid_;
    std::size_t remaining = ncells - n_valid;
    while (remaining > 0) {
        std::vector<std::pair<std::size_t, double>> wave;
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (std::size_t ix = 0; ix < nx; ++ix) {
                std::size_t c = iy * nx + ix;
                if (filled[c]) continue;
                double sum = 0.0;
                int cnt = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        long jx = static_cast<long>(ix) + dx, jy = static_cast<long>(iy) + dy;
                        if (jx < 0 || jy < 0 || jx >= static_cast<long>(nx) || jy >= static_cast<long>(ny)) continue;
                        std::size_t j = static_cast<std::size_t>(jy) * nx + static_cast<std::size_t>(jx);
                        if (filled[j]) {
                            sum += dtm.elev_[j];
                            ++cnt;
                        }
                    }
                }
                if (cnt > 0) wave.emplace_back(c, sum / cnt);
            }
        }
        for (const auto& [c, v] : wave) {
            dtm.elev_[c] = v;
            filled[c] = 1;
        }
        remaining -= wave.size();
    }

    // one 3x3 median pass (windows clipped at borders; even windows average
    // the two middle values)
    std::vector<double> smoothed(ncells);
    std::vector<double> window;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            window.clear();
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    long jx = static_cast<long>(ix) + dx, jy = static_cast<long>(iy) + dy;
                    if (jx < 0 || jy < 0 || jx >= static_cast<long>(nx) || jy >= static_cast<long>(ny)) continue;
                    window.push_back(dtm.elev_[static_cast<std::size_t>(jy) * nx + static_cast<std::size_t>(jx)]);
                }
            }
            smoothed[iy * nx + ix] = median_of(window);
        }
    }

    // The per-cell percentile of sloped ground sits below the cell-center
    // height: for gradient (gx, gy) the in-cell heights spread over
    // +-(a + b) with a = |gx| c/2, b = |gy| c/2, and the 5th percentile of
    // that (trapezoidal) distribution lands at -((a+b) - sqrt(0.4 a b)), or
    // -0.9 a once the spread is nearly one-dimensional. Push each cell back
    // up by that amount, reading the gradient off the smoothed grid.
    dtm.elev_ = smoothed;
    auto at = [&](std::size_t ix, std::size_t iy) { return smoothed[iy * nx + ix]; };
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            double gx = 0.0, gy = 0.0;
            if (nx > 1) {
                std::size_t lo = ix > 0 ? ix - 1 : ix;
                std::size_t hi = ix + 1 < nx ? ix + 1 : ix;
                gx = (at(hi, iy) - at(lo, iy)) / (static_cast<double>(hi - lo) * cell_size);
            }
            if (ny > 1) {
                std::size_t lo = iy > 0 ? iy - 1 : iy;
                std::size_t hi = iy + 1 < ny ? iy + 1 : iy;
                gy = (at(ix, hi) - at(ix, lo)) / (static_cast<double>(hi - lo) * cell_size);
            }
            double a = std::abs(gx) * cell_size * 0.5;
            double b = std::abs(gy) * cell_size * 0.5;
            if (a < b) std::swap(a, b);
            double corr = 0.0;
            if (a > 0.0) corr = (b >= 0.1 * a) ? (a + b) - std::sqrt(0.4 * a * b) : 0.9 * a;
            double v = dtm.elev_[iy * nx + ix] + corr;
            dtm.elev_[iy * nx + ix] = std::clamp(v, minz, maxz);
        }
    }
    return dtm;
}

double Dtm::height_at(double x, double y) const {
    // bilinear over cell centers, coordinates clamped to the center lattice so
    // queries outside the bbox take the nearest border value
    double fx = (x - origin_x_) / cell_ - 0.5;
    double fy = (y - origin_y_) / cell_ - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(nx_ - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(ny_ - 1));
    std::size_t ix0 = std::min(static_cast<std::size_t>(fx), nx_ - 1);
    std::size_t iy0 = std::min(static_cast<std::size_t>(fy), ny_ - 1);
    std::size_t ix1 = std::min(ix0 + 1, nx_ - 1);
    std::size_t iy1 = std::min(iy0 + 1, ny_ - 1);
    double tx = fx - static_cast<double>(ix0);
    double ty = fy - static_cast<double>(iy0);
    double a = elevation(ix0, iy0) * (1.0 - tx) + elevation(ix1, iy0) * tx;
    double b = elevation(ix0, iy1) * (1.0 - tx) + elevation(ix1, iy1) * tx;
    return a * (1.0 - ty) + b * ty;
}

PointCloud Dtm::to_cloud() const {
    PointCloud out;
    out.points.reserve(nx_ * ny_);
    for (std::size_t iy = 0; iy < ny_; ++iy)
        for (std::size_t ix = 0; ix < nx_; ++ix)
            out.points.push_back({origin_x_ + (static_cast<double>(ix) + 0.5) * cell_,
                                  origin_y_ + (static_cast<double>(iy) + 0.5) * cell_,
                                  elevation(ix, iy)});
    return out;
}

PointCloud slice_band(const PointCloud& cloud, const Dtm& dtm, double low, double high) {
    if (!(low < high)) throw ArgumentError("slice_band: low must be < high");
    PointCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double h = dtm.height_above_ground(cloud.points[i]);
        if (h >= low && h < high) out.append_from(cloud, i);
    }
    return out;
}

}  // namespace stemalign
