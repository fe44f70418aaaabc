#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloc/geometry.hpp"
#include "semloc/world.hpp"

namespace semloc {

// Cross-view domain gap between training and test start viewpoints.
struct SplitSpec {
  double t_xy = 0.2;       // minimum location difference, meters
  double t_theta = 10.0;   // minimum bearing difference, degrees
  int train_size = 10000;
  int test_size = 100;
  int validation_size = 10;
};

inline const std::vector<double>& t_xy_grid() {
  static const std::vector<double> g = {0.2, 0.4, 0.6, 0.8, 1.0};
  return g;
}

inline const std::vector<double>& t_theta_grid() {
  static const std::vector<double> g = {10.0, 30.0, 50.0, 70.0, 90.0};
  return g;
}

struct Splits {
  SplitSpec spec;
  std::vector<Pose> train;
  std::vector<Pose> test;
  std::vector<Pose> validation;  // small test-domain set for UDA selection
};

// Index of the test pose nearest in location to (x, y).
inline int nearest_test_pose(const std::vector<Pose>& test, double x,
                             double y) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < test.size(); ++i) {
    double d = std::hypot(test[i].x - x, test[i].y - y);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Test poses are uniform over free space. Each training pose is accepted
// only when its location lies farther than t_xy from the nearest test
// location and its bearing differs from that same test pose by more than
// t_theta (wrapped to [0, 180]).
inline Splits sample_splits(const WorldModel& world, const SplitSpec& spec,
                            Rng& rng) {
  if (spec.test_size <= 0 || spec.train_size <= 0) {
    throw std::invalid_argument("split sizes must be positive");
  }
  Splits out;
  out.spec = spec;
  for (int i = 0; i < spec.test_size; ++i) {
    out.test.push_back(sample_free_pose(world, rng));
  }
  for (int i = 0; i < spec.validation_size; ++i) {
    out.validation.push_back(sample_free_pose(world, rng));
  }
  constexpr int kMaxTriesPerPose = 500000;
  for (int i = 0; i < spec.train_size; ++i) {
    bool accepted = false;
    for (int tries = 0; tries < kMaxTriesPerPose; ++tries) {
      Pose p = sample_free_pose(world, rng);
      const Pose& nearest = out.test[nearest_test_pose(out.test, p.x, p.y)];
      if (std::hypot(nearest.x - p.x, nearest.y - p.y) <= spec.t_xy) continue;
      if (angular_difference_deg(nearest.theta, p.theta) <= spec.t_theta) {
        continue;
      }
      out.train.push_back(p);
      accepted = true;
      break;
    }
    if (!accepted) {
      throw std::runtime_error(
          "split sampling retry cap exceeded: workspace too small for gap "
          "T_xy=" +
          std::to_string(spec.t_xy) + " T_theta=" +
          std::to_string(spec.t_theta));
    }
  }
  return out;
}

inline void save_splits(const std::string& path, const Splits& s) {
  nlohmann::json j;
  j["t_xy"] = s.spec.t_xy;
  j["t_theta"] = s.spec.t_theta;
  auto poses_to_json = [](const std::vector<Pose>& poses) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : poses) arr.push_back({p.x, p.y, p.theta});
    return arr;
  };
  j["train"] = poses_to_json(s.train);
  j["test"] = poses_to_json(s.test);
  j["validation"] = poses_to_json(s.validation);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump() << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Splits load_splits(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  Splits s;
  try {
    s.spec.t_xy = j.at("t_xy").get<double>();
    s.spec.t_theta = j.at("t_theta").get<double>();
    auto poses_from_json = [&path](const nlohmann::json& arr) {
      std::vector<Pose> poses;
      for (const auto& pj : arr) {
        if (!pj.is_array() || pj.size() != 3) {
          throw std::runtime_error(path + ": pose must be [x, y, theta]");
        }
        poses.push_back({pj[0].get<double>(), pj[1].get<double>(),
                         pj[2].get<double>()});
      }
      return poses;
    };
    s.train = poses_from_json(j.at("train"));
    s.test = poses_from_json(j.at("test"));
    s.validation = poses_from_json(j.at("validation"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed splits file: " + e.what());
  }
  s.spec.train_size = static_cast<int>(s.train.size());
  s.spec.test_size = static_cast<int>(s.test.size());
  s.spec.validation_size = static_cast<int>(s.validation.size());
  return s;
}

}  // namespace semloc
