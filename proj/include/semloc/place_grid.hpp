#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "semloc/geometry.hpp"

namespace semloc {

// Agent pose: metric location plus bearing in degrees, [0, 360).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

// Regular partition of the (x, y, theta) workspace into place classes,
// 2 m location cells by 30 degree bearing bins. Class ids flatten as
// (cell_x * n_y + cell_y) * 12 + cell_theta.
class PlaceClassGrid {
 public:
  static constexpr double kLocationResolution = 2.0;
  static constexpr double kBearingResolutionDeg = 30.0;
  static constexpr int kBearingBins = 12;

  PlaceClassGrid(double x_min, double x_max, double y_min, double y_max)
      : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
    if (!(x_max > x_min) || !(y_max > y_min)) {
      throw std::invalid_argument("degenerate workspace bounds");
    }
    nx_ = static_cast<int>(std::ceil((x_max - x_min) / kLocationResolution));
    ny_ = static_cast<int>(std::ceil((y_max - y_min) / kLocationResolution));
  }

  int cells_x() const { return nx_; }
  int cells_y() const { return ny_; }
  int num_location_classes() const { return nx_ * ny_; }
  int num_classes() const { return nx_ * ny_ * kBearingBins; }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }

  bool contains(double x, double y) const {
    return x >= x_min_ && x <= x_max_ && y >= y_min_ && y <= y_max_;
  }

  // Location-only class of a point; the far edge folds into the last cell.
  int location_class(double x, double y) const {
    if (!contains(x, y)) {
      throw std::invalid_argument("pose outside workspace bounds: (" +
                                  std::to_string(x) + ", " + std::to_string(y) +
                                  ")");
    }
    int cx = cell_index(x - x_min_, nx_);
    int cy = cell_index(y - y_min_, ny_);
    return cx * ny_ + cy;
  }

  int bearing_bin(double theta) const {
    int ct = static_cast<int>(std::floor(wrap_deg(theta) /
                                         kBearingResolutionDeg));
    return ct >= kBearingBins ? kBearingBins - 1 : ct;
  }

  int pose_to_class(const Pose& pose) const {
    return location_class(pose.x, pose.y) * kBearingBins +
           bearing_bin(pose.theta);
  }

  static int location_of_class(int class_id) { return class_id / kBearingBins; }
  static int bearing_of_class(int class_id) { return class_id % kBearingBins; }

  struct CellBounds {
    double x0, x1, y0, y1, theta0, theta1;
  };

  // Metric extent of a class cell; edge cells are truncated at the workspace
  // boundary when the span is not a multiple of the resolution.
  CellBounds class_cell(int class_id) const {
    if (class_id < 0 || class_id >= num_classes()) {
      throw std::invalid_argument("class id out of range");
    }
    int loc = location_of_class(class_id);
    int ct = bearing_of_class(class_id);
    int cx = loc / ny_;
    int cy = loc % ny_;
    CellBounds b;
    b.x0 = x_min_ + cx * kLocationResolution;
    b.x1 = std::min(x_max_, b.x0 + kLocationResolution);
    b.y0 = y_min_ + cy * kLocationResolution;
    b.y1 = std::min(y_max_, b.y0 + kLocationResolution);
    b.theta0 = ct * kBearingResolutionDeg;
    b.theta1 = b.theta0 + kBearingResolutionDeg;
    return b;
  }

 private:
  static int cell_index(double offset, int n) {
    int c = static_cast<int>(std::floor(offset / kLocationResolution));
    if (c < 0) c = 0;
    if (c >= n) c = n - 1;
    return c;
  }

  double x_min_, x_max_, y_min_, y_max_;
  int nx_ = 0;
  int ny_ = 0;
};

}  // namespace semloc
