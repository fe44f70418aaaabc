#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloc/geometry.hpp"
#include "semloc/particle_filter.hpp"
#include "semloc/place_grid.hpp"
#include "semloc/rng.hpp"
#include "semloc/scene_graph.hpp"

namespace semloc {

// Projection constants for the synthetic 512x512 camera.
constexpr double kFovHalfDeg = 45.0;     // 90 degree field of view
constexpr double kFocalPx = 256.0;       // 256 / tan(45)
constexpr double kMaxRangeM = 6.0;
constexpr double kCameraHeightM = 1.0;
constexpr double kWallHeightM = 2.5;
constexpr double kMaxProjAngleDeg = 88.0;
constexpr double kFreeSpaceMargin = 0.15;

inline double object_height_m(int category) {
  switch (category) {
    case 0: return 0.5;
    case 1: return 1.1;
    default: return 2.0;
  }
}

struct Wall {
  double x0, y0, x1, y1;
};

struct WorldObject {
  int meta = 9;          // meta-class id, furniture classes 3..9
  double x = 0.0;
  double y = 0.0;
  double radius = 0.4;   // 2D disc footprint
  int height_category = 1;
};

// Procedural rectangular room: boundary walls, optional interior wall
// stubs, and disc-footprint furniture. Fully determined by its seed.
struct WorldModel {
  double x_min = 0.0, x_max = 8.0, y_min = 0.0, y_max = 8.0;
  std::uint64_t seed = 0;
  std::vector<Wall> walls;      // includes the four boundary walls
  std::vector<WorldObject> objects;

  PlaceClassGrid grid() const {
    return PlaceClassGrid(x_min, x_max, y_min, y_max);
  }

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

struct WorldGenConfig {
  double width = 8.0;
  double height = 8.0;
  int num_objects = 10;
  int num_interior_walls = 1;
};

namespace detail {

inline double point_segment_distance(double px, double py, const Wall& w) {
  double vx = w.x1 - w.x0;
  double vy = w.y1 - w.y0;
  double len_sq = vx * vx + vy * vy;
  double t = len_sq > 0.0
                 ? std::clamp(((px - w.x0) * vx + (py - w.y0) * vy) / len_sq,
                              0.0, 1.0)
                 : 0.0;
  return std::hypot(px - (w.x0 + t * vx), py - (w.y0 + t * vy));
}

}  // namespace detail

inline bool in_free_space(const WorldModel& world, double x, double y) {
  if (x < world.x_min + kFreeSpaceMargin || x > world.x_max - kFreeSpaceMargin ||
      y < world.y_min + kFreeSpaceMargin || y > world.y_max - kFreeSpaceMargin) {
    return false;
  }
  for (const auto& o : world.objects) {
    if (std::hypot(x - o.x, y - o.y) <= o.radius + 0.1) return false;
  }
  // Boundary walls are already covered by the margin test above.
  for (std::size_t i = 4; i < world.walls.size(); ++i) {
    if (detail::point_segment_distance(x, y, world.walls[i]) <
        kFreeSpaceMargin) {
      return false;
    }
  }
  return true;
}

inline Pose sample_free_pose(const WorldModel& world, Rng& rng) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double x = rng.uniform(world.x_min, world.x_max);
    double y = rng.uniform(world.y_min, world.y_max);
    if (!in_free_space(world, x, y)) continue;
    return {x, y, rng.uniform(0.0, 360.0)};
  }
  throw std::runtime_error("no free space found in world");
}

inline WorldModel generate_world(std::uint64_t seed,
                                 const WorldGenConfig& cfg = {}) {
  if (cfg.width < 4.0 || cfg.height < 4.0) {
    throw std::invalid_argument("world must be at least 4 m on each side");
  }
  WorldModel w;
  w.seed = seed;
  w.x_min = 0.0;
  w.x_max = cfg.width;
  w.y_min = 0.0;
  w.y_max = cfg.height;
  w.walls = {{0, 0, cfg.width, 0},
             {cfg.width, 0, cfg.width, cfg.height},
             {cfg.width, cfg.height, 0, cfg.height},
             {0, cfg.height, 0, 0}};

  Rng rng(Rng::derive(seed, 0x770a1dULL));
  for (int i = 0; i < cfg.num_interior_walls; ++i) {
    // Axis-aligned stubs anchored away from the boundary.
    double len = rng.uniform(1.0, 2.5);
    double x = rng.uniform(1.0, cfg.width - 1.0 - len);
    double y = rng.uniform(1.0, cfg.height - 1.0 - len);
    if (rng.uniform() < 0.5) {
      w.walls.push_back({x, y, x + len, y});
    } else {
      w.walls.push_back({x, y, x, y + len});
    }
  }

  for (int i = 0; i < cfg.num_objects; ++i) {
    WorldObject o;
    // Cycle the furniture metas first so every world sees some variety.
    o.meta = 3 + (i < 7 ? i : rng.uniform_int(7));
    o.radius = rng.uniform(0.25, 0.55);
    o.height_category = rng.uniform_int(3);
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      double x = rng.uniform(w.x_min + o.radius + 0.4,
                             w.x_max - o.radius - 0.4);
      double y = rng.uniform(w.y_min + o.radius + 0.4,
                             w.y_max - o.radius - 0.4);
      bool ok = true;
      for (const auto& other : w.objects) {
        if (std::hypot(x - other.x, y - other.y) <
            o.radius + other.radius + 0.3) {
          ok = false;
          break;
        }
      }
      for (std::size_t k = 4; ok && k < w.walls.size(); ++k) {
        if (detail::point_segment_distance(x, y, w.walls[k]) <
            o.radius + 0.3) {
          ok = false;
        }
      }
      if (ok) {
        o.x = x;
        o.y = y;
        w.objects.push_back(o);
        placed = true;
      }
    }
    // Crowded worlds simply end up with fewer objects.
  }
  return w;
}

// --------------------------------------------------------------------------
// Rendering: deterministic projection of the world into semantic regions.

namespace detail {

inline bool wall_occludes(const WorldModel& world, double x0, double y0,
                          double x1, double y1) {
  // Boundary walls cannot sit between two interior points; skip them.
  for (std::size_t i = 4; i < world.walls.size(); ++i) {
    const Wall& w = world.walls[i];
    if (segments_intersect(x0, y0, x1, y1, w.x0, w.y0, w.x1, w.y1)) {
      return true;
    }
  }
  return false;
}

inline int clamp_px(double v) {
  return static_cast<int>(std::lround(std::clamp(v, 0.0, 512.0)));
}

}  // namespace detail

// Projects the world into the semantic-segmentation output format: a flat
// list of labeled regions. Background (ceiling/wall/floor) comes from the
// forward ray; objects require range, field of view, and an unobstructed
// line to their footprint center. Objects so close that they would subtend
// past the image border are dropped.
inline std::vector<SemanticRegion> render(const WorldModel& world,
                                          const Pose& pose) {
  if (!world.contains(pose.x, pose.y)) {
    throw std::invalid_argument("render pose outside world bounds");
  }
  std::vector<SemanticRegion> regions;
  const double heading_rad = deg_to_rad(pose.theta);
  const double dirx = std::cos(heading_rad);
  const double diry = std::sin(heading_rad);

  double wall_dist = std::numeric_limits<double>::infinity();
  for (const auto& w : world.walls) {
    double t = ray_segment_hit(pose.x, pose.y, dirx, diry, w.x0, w.y0, w.x1,
                               w.y1);
    if (t > 1e-9 && t < wall_dist) wall_dist = t;
  }
  if (!std::isfinite(wall_dist)) wall_dist = kMaxRangeM;

  double v_top = 256.0 - kFocalPx * (kWallHeightM - kCameraHeightM) / wall_dist;
  double v_bot = 256.0 + kFocalPx * kCameraHeightM / wall_dist;
  int top_px = detail::clamp_px(v_top);
  int bot_px = detail::clamp_px(v_bot);
  if (top_px >= 1) regions.push_back({2, {0, 0, 512, top_px}});
  if (bot_px - top_px >= 1) regions.push_back({0, {0, top_px, 512, bot_px}});
  if (bot_px <= 511) regions.push_back({1, {0, bot_px, 512, 512}});

  for (const auto& o : world.objects) {
    double dx = o.x - pose.x;
    double dy = o.y - pose.y;
    double range = std::hypot(dx, dy);
    if (range > kMaxRangeM || range <= o.radius) continue;
    double bearing = rad_to_deg(std::atan2(dy, dx));
    double rel = signed_angle_deg(bearing, pose.theta);
    if (std::fabs(rel) > kFovHalfDeg) continue;
    if (detail::wall_occludes(world, pose.x, pose.y, o.x, o.y)) continue;

    double rel_rad = deg_to_rad(rel);
    double half_extent = std::asin(std::min(1.0, o.radius / range));
    double max_proj = deg_to_rad(kMaxProjAngleDeg);
    double a0 = std::clamp(rel_rad - half_extent, -max_proj, max_proj);
    double a1 = std::clamp(rel_rad + half_extent, -max_proj, max_proj);
    double u0 = 256.0 - kFocalPx * std::tan(a1);
    double u1 = 256.0 - kFocalPx * std::tan(a0);
    double depth = range * std::cos(rel_rad);
    double obj_top = 256.0 - kFocalPx *
                                 (object_height_m(o.height_category) -
                                  kCameraHeightM) /
                                 depth;
    double obj_bot = 256.0 + kFocalPx * kCameraHeightM / depth;
    if (u1 - u0 >= 512.0 || obj_bot - obj_top >= 512.0) continue;
    SemanticRegion r;
    r.label = o.meta;
    r.bbox = {detail::clamp_px(u0), detail::clamp_px(obj_top),
              detail::clamp_px(u1), detail::clamp_px(obj_bot)};
    if (r.bbox.x1 - r.bbox.x0 < 1 || r.bbox.y1 - r.bbox.y0 < 1) continue;
    regions.push_back(r);
  }
  return regions;
}

// Executes one action: rotations always succeed (with wraparound); forward
// motion is blocked by any wall crossing, leaving the pose unchanged.
inline Pose step(const WorldModel& world, const Pose& pose, Action action) {
  Pose out = pose;
  switch (action) {
    case Action::kRotateLeft:
      out.theta = wrap_deg(pose.theta + 30.0);
      break;
    case Action::kRotateRight:
      out.theta = wrap_deg(pose.theta - 30.0);
      break;
    case Action::kForward: {
      double rad = deg_to_rad(pose.theta);
      double nx = pose.x + 0.5 * std::cos(rad);
      double ny = pose.y + 0.5 * std::sin(rad);
      if (!world.contains(nx, ny)) break;
      bool blocked = false;
      for (const auto& w : world.walls) {
        if (segments_intersect(pose.x, pose.y, nx, ny, w.x0, w.y0, w.x1,
                               w.y1)) {
          blocked = true;
          break;
        }
      }
      if (!blocked) {
        out.x = nx;
        out.y = ny;
      }
      break;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// World file: structured text with bounds, walls, and objects.

inline void save_world(const std::string& path, const WorldModel& world) {
  nlohmann::json j;
  j["seed"] = world.seed;
  j["bounds"] = {{"x_min", world.x_min},
                 {"x_max", world.x_max},
                 {"y_min", world.y_min},
                 {"y_max", world.y_max}};
  j["walls"] = nlohmann::json::array();
  for (const auto& w : world.walls) {
    j["walls"].push_back({{"x0", w.x0}, {"y0", w.y0}, {"x1", w.x1},
                          {"y1", w.y1}});
  }
  j["objects"] = nlohmann::json::array();
  for (const auto& o : world.objects) {
    j["objects"].push_back({{"meta", o.meta},
                            {"x", o.x},
                            {"y", o.y},
                            {"radius", o.radius},
                            {"height_category", o.height_category}});
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline WorldModel load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  WorldModel w;
  try {
    w.seed = j.at("seed").get<std::uint64_t>();
    const auto& b = j.at("bounds");
    w.x_min = b.at("x_min").get<double>();
    w.x_max = b.at("x_max").get<double>();
    w.y_min = b.at("y_min").get<double>();
    w.y_max = b.at("y_max").get<double>();
    for (const auto& wj : j.at("walls")) {
      w.walls.push_back({wj.at("x0").get<double>(), wj.at("y0").get<double>(),
                         wj.at("x1").get<double>(), wj.at("y1").get<double>()});
    }
    for (const auto& oj : j.at("objects")) {
      WorldObject o;
      o.meta = oj.at("meta").get<int>();
      o.x = oj.at("x").get<double>();
      o.y = oj.at("y").get<double>();
      o.radius = oj.at("radius").get<double>();
      o.height_category = oj.at("height_category").get<int>();
      w.objects.push_back(o);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed world file: " + e.what());
  }
  if (w.walls.size() < 4) {
    throw std::runtime_error(path + ": world must include boundary walls");
  }
  return w;
}

}  // namespace semloc
