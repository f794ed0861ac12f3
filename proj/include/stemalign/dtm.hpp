#pragma once

#include <cstddef>
#include <vector>

#include "stemalign/point.hpp"

namespace stemalign {

// Grid DTM over the cloud's XY bounding box. Cells hold ground elevation in
// meters; height_at answers everywhere (bilinear inside, clamped outside).
class Dtm {
  public:
    double cell_size() const { return cell_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    double elevation(std::size_t ix, std::size_t iy) const { return elev_[iy * nx_ + ix]; }
    bool cell_valid(std::size_t ix, std::size_t iy) const { return valid_[iy * nx_ + ix] != 0; }

    double height_at(double x, double y) const;
    double height_above_ground(const Point3& p) const { return p.z - height_at(p.x, p.y); }

    // cell centers as an xyz cloud, for eyeballing the surface
    PointCloud to_cloud() const;

    friend Dtm build_dtm(const PointCloud& cloud, double cell_size);

  private:
    double origin_x_ = 0.0, origin_y_ = 0.0;  // min corner of the XY bbox
    double cell_ = 0.0;
    std::size_t nx_ = 0, ny_ = 0;
    std::vector<double> elev_;
    std::vector<char> valid_;  // had >= 3 points before neighbor fill
};

Dtm build_dtm(const PointCloud& cloud, double cell_size);

PointCloud slice_band(const PointCloud& cloud, const Dtm& dtm, double low, double high);

}  // namespace stemalign
