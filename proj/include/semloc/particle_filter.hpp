#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "semloc/place_grid.hpp"
#include "semloc/rng.hpp"

namespace semloc {

enum class Action { kRotateLeft = 0, kRotateRight = 1, kForward = 2 };
constexpr int kNumActions = 3;

struct MotionModel {
  double rotate_step_deg = 30.0;
  double forward_step = 0.5;
  double sigma_xy = 0.1;
  double sigma_theta_deg = 5.0;
};

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;

  int size() const { return static_cast<int>(particles.size()); }

  double weight_sum() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.weight;
    return s;
  }

  void normalize() {
    double s = weight_sum();
    if (s <= 0.0) throw std::runtime_error("degenerate particle weights");
    for (auto& p : particles) p.weight /= s;
  }

  double effective_sample_size() const {
    double sq = 0.0;
    for (const auto& p : particles) sq += p.weight * p.weight;
    return 1.0 / sq;
  }
};

struct TrackerConfig {
  int num_particles = 5000;
  int guided_top_k = 3;
  double weight_floor = 1e-6;
  double resample_ess_fraction = 0.5;
  MotionModel motion;
};

// Guided initialization: all particles are drawn from the k place-class
// cells with the highest rank-state values, M/k per class with the
// remainder assigned to the top class. Weights start uniform.
inline ParticleSet init_guided(const Eigen::VectorXd& rank_state,
                               const PlaceClassGrid& grid, int num_particles,
                               int top_k, Rng& rng) {
  const int c = grid.num_classes();
  if (rank_state.size() != c) {
    throw std::invalid_argument("rank state length does not match grid");
  }
  if (top_k <= 0 || top_k > c || num_particles <= 0) {
    throw std::invalid_argument("bad guided sampling parameters");
  }
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                    [&](int a, int b) {
                      if (rank_state[a] != rank_state[b]) {
                        return rank_state[a] > rank_state[b];
                      }
                      return a < b;
                    });

  ParticleSet set;
  set.particles.reserve(num_particles);
  const int base = num_particles / top_k;
  const int remainder = num_particles - base * top_k;
  const double w = 1.0 / num_particles;
  for (int rank = 0; rank < top_k; ++rank) {
    int count = base + (rank == 0 ? remainder : 0);
    auto cell = grid.class_cell(order[rank]);
    for (int i = 0; i < count; ++i) {
      Particle p;
      p.x = rng.uniform(cell.x0, cell.x1);
      p.y = rng.uniform(cell.y0, cell.y1);
      p.theta = wrap_deg(rng.uniform(cell.theta0, cell.theta1));
      p.weight = w;
      set.particles.push_back(p);
    }
  }
  return set;
}

// Motion update: nominal action plus Gaussian noise on the moved component.
// Locations clamp to the workspace; weights are untouched.
inline void predict(ParticleSet& set, Action action, const MotionModel& motion,
                    const PlaceClassGrid& grid, Rng& rng) {
  for (auto& p : set.particles) {
    switch (action) {
      case Action::kRotateLeft:
      case Action::kRotateRight: {
        double delta = action == Action::kRotateLeft ? motion.rotate_step_deg
                                                     : -motion.rotate_step_deg;
        if (motion.sigma_theta_deg > 0.0) {
          delta += rng.normal(0.0, motion.sigma_theta_deg);
        }
        p.theta = wrap_deg(p.theta + delta);
        break;
      }
      case Action::kForward: {
        double rad = deg_to_rad(p.theta);
        p.x += motion.forward_step * std::cos(rad);
        p.y += motion.forward_step * std::sin(rad);
        if (motion.sigma_xy > 0.0) {
          p.x += rng.normal(0.0, motion.sigma_xy);
          p.y += rng.normal(0.0, motion.sigma_xy);
        }
        p.x = std::clamp(p.x, grid.x_min(), grid.x_max());
        p.y = std::clamp(p.y, grid.y_min(), grid.y_max());
        break;
      }
    }
  }
}

// Systematic (low-variance) resampling to uniform weights.
inline void systematic_resample(ParticleSet& set, Rng& rng) {
  const int m = set.size();
  std::vector<Particle> out;
  out.reserve(m);
  double u = rng.uniform() / m;
  double cumulative = set.particles[0].weight;
  int idx = 0;
  for (int i = 0; i < m; ++i) {
    double target = u + static_cast<double>(i) / m;
    while (cumulative < target && idx + 1 < m) {
      ++idx;
      cumulative += set.particles[idx].weight;
    }
    Particle p = set.particles[idx];
    p.weight = 1.0 / m;
    out.push_back(p);
  }
  set.particles.swap(out);
}

// Observation update: weights scale by the rank-state value of each
// particle's place class (plus a small floor), then renormalize. Resamples
// when the effective sample size drops below the configured fraction.
inline void update(ParticleSet& set, const Eigen::VectorXd& rank_state,
                   const PlaceClassGrid& grid, const TrackerConfig& cfg,
                   Rng& rng) {
  if (rank_state.size() != grid.num_classes()) {
    throw std::invalid_argument("rank state length does not match grid");
  }
  for (auto& p : set.particles) {
    int cls = grid.pose_to_class({p.x, p.y, p.theta});
    p.weight *= rank_state[cls] + cfg.weight_floor;
  }
  set.normalize();
  if (set.effective_sample_size() <
      cfg.resample_ess_fraction * set.size()) {
    systematic_resample(set, rng);
  }
}

struct BeliefSummary {
  // Max-pooled particle weight per location-only class (bearing
  // marginalized); cells without particles hold zero.
  Eigen::VectorXd location_belief;
  // Full (x, y, theta) class of the highest-weight particle; weight ties
  // resolve to the lowest class id.
  int top1_class = 0;
};

inline BeliefSummary class_belief(const ParticleSet& set,
                                  const PlaceClassGrid& grid) {
  if (set.size() == 0) throw std::invalid_argument("empty particle set");
  BeliefSummary out;
  out.location_belief = Eigen::VectorXd::Zero(grid.num_location_classes());
  double best_w = -1.0;
  int best_class = 0;
  for (const auto& p : set.particles) {
    int loc = grid.location_class(p.x, p.y);
    out.location_belief[loc] = std::max(out.location_belief[loc], p.weight);
    int cls = loc * PlaceClassGrid::kBearingBins + grid.bearing_bin(p.theta);
    if (p.weight > best_w || (p.weight == best_w && cls < best_class)) {
      best_w = p.weight;
      best_class = cls;
    }
  }
  out.top1_class = best_class;
  return out;
}

}  // namespace semloc
