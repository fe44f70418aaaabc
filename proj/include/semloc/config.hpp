#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "semloc/gcn.hpp"
#include "semloc/particle_filter.hpp"
#include "semloc/splits.hpp"
#include "semloc/world.hpp"

namespace semloc {

// Every numeric default of the pipeline in one place. A JSON config file
// may override any field; CLI flags override the file.
struct PipelineConfig {
  WorldGenConfig world;
  int scene_count = 10000;
  GcnTrainConfig gcn;

  int split_train_size = 10000;
  int split_test_size = 100;
  int split_validation_size = 10;

  TrackerConfig tracker;

  double tau_q = 1e-6;
  int knn = 4;

  int episode_length = 4;        // L plan-action-sense cycles
  double reward_success = 1.0;
  double reward_failure = -1.0;
  int train_episodes = 10000;
  double alpha = 0.1;
  double gamma = 0.9;
  int checkpoint_period = 1000;
  int test_episodes = 100;
  int validation_episodes = 10;

  std::uint64_t seed = 1;
};

inline void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j) {
  auto get = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) {
      field = obj.at(key).get<std::decay_t<decltype(field)>>();
    }
  };
  if (j.contains("world")) {
    const auto& w = j["world"];
    get(w, "width", cfg.world.width);
    get(w, "height", cfg.world.height);
    get(w, "objects", cfg.world.num_objects);
    get(w, "interior_walls", cfg.world.num_interior_walls);
  }
  if (j.contains("scenes")) get(j["scenes"], "count", cfg.scene_count);
  if (j.contains("gcn")) {
    const auto& g = j["gcn"];
    get(g, "epochs", cfg.gcn.epochs);
    get(g, "batch_size", cfg.gcn.batch_size);
    get(g, "learning_rate", cfg.gcn.learning_rate);
  }
  if (j.contains("splits")) {
    const auto& s = j["splits"];
    get(s, "train_size", cfg.split_train_size);
    get(s, "test_size", cfg.split_test_size);
    get(s, "validation_size", cfg.split_validation_size);
  }
  if (j.contains("tracker")) {
    const auto& t = j["tracker"];
    get(t, "particles", cfg.tracker.num_particles);
    get(t, "guided_top_k", cfg.tracker.guided_top_k);
    get(t, "weight_floor", cfg.tracker.weight_floor);
    get(t, "resample_ess_fraction", cfg.tracker.resample_ess_fraction);
    get(t, "rotate_step_deg", cfg.tracker.motion.rotate_step_deg);
    get(t, "forward_step", cfg.tracker.motion.forward_step);
    get(t, "sigma_xy", cfg.tracker.motion.sigma_xy);
    get(t, "sigma_theta_deg", cfg.tracker.motion.sigma_theta_deg);
  }
  if (j.contains("planner")) {
    const auto& p = j["planner"];
    get(p, "tau_q", cfg.tau_q);
    get(p, "knn", cfg.knn);
  }
  if (j.contains("episode")) {
    const auto& e = j["episode"];
    get(e, "length", cfg.episode_length);
    get(e, "reward_success", cfg.reward_success);
    get(e, "reward_failure", cfg.reward_failure);
    get(e, "train_episodes", cfg.train_episodes);
    get(e, "alpha", cfg.alpha);
    get(e, "gamma", cfg.gamma);
    get(e, "checkpoint_period", cfg.checkpoint_period);
    get(e, "test_episodes", cfg.test_episodes);
    get(e, "validation_episodes", cfg.validation_episodes);
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
}

inline PipelineConfig load_config(const std::string& path,
                                  PipelineConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  apply_config_json(base, j);
  return base;
}

}  // namespace semloc
