#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "semloc/config.hpp"
#include "semloc/gcn.hpp"
#include "semloc/particle_filter.hpp"
#include "semloc/place_grid.hpp"
#include "semloc/q_database.hpp"
#include "semloc/rank_state.hpp"
#include "semloc/scene_graph.hpp"
#include "semloc/splits.hpp"
#include "semloc/world.hpp"

namespace semloc {

enum class Method { kSingleView, kPassiveMultiView, kActive };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kSingleView: return "sv";
    case Method::kPassiveMultiView: return "mv";
    case Method::kActive: return "active";
  }
  return "?";
}

// Accumulated wall-clock cost of the three per-step stages.
struct StepTimers {
  double graph_build_ms = 0.0;
  double gcn_ms = 0.0;
  double planning_ms = 0.0;
  long sense_count = 0;
  long plan_count = 0;
};

struct EpisodeContext {
  const WorldModel& world;
  const PlaceClassGrid& grid;
  const GcnModel& model;
  const PipelineConfig& cfg;
  StepTimers* timers = nullptr;
};

struct EpisodeResult {
  bool success = false;
  int predicted_class = -1;
  int true_class = -1;
  int sense_count = 0;
  std::vector<Action> actions;
  std::vector<Eigen::VectorXf> states;  // rank state after each sense
  std::vector<Pose> poses;
};

namespace detail {

struct SenseOutput {
  Eigen::VectorXd rank_state;
  Eigen::VectorXf state32;
};

inline SenseOutput sense(const EpisodeContext& ctx, const Pose& pose) {
  using clock = std::chrono::steady_clock;
  auto regions = render(ctx.world, pose);
  auto t0 = clock::now();
  SceneGraph graph = build_graph(regions);
  auto t1 = clock::now();
  Eigen::VectorXd scores = gcn_forward(graph, ctx.model);
  auto t2 = clock::now();
  SenseOutput out;
  out.rank_state = scores_to_rank_state(scores);
  out.state32 = to_state_vector(out.rank_state);
  if (ctx.timers) {
    ctx.timers->graph_build_ms +=
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    ctx.timers->gcn_ms +=
        std::chrono::duration<double, std::milli>(t2 - t1).count();
    ++ctx.timers->sense_count;
  }
  return out;
}

}  // namespace detail

// One plan-action-sense episode. The initial sensing seeds the guided
// particle set and immediately weighs it; single-view episodes stop there.
// Multi-view episodes run L cycles with actions chosen by the method. In
// train mode (train_db != nullptr, active method) the terminal reward is
// propagated backward along the trajectory with Q-learning updates.
inline EpisodeResult run_episode(const EpisodeContext& ctx, const Pose& start,
                                 Method method, const QFunction* q,
                                 QDatabase* train_db, double epsilon,
                                 Rng& rng) {
  const PipelineConfig& cfg = ctx.cfg;
  if (ctx.model.num_classes() != ctx.grid.num_classes()) {
    throw std::invalid_argument("model/grid class count mismatch");
  }
  if (method == Method::kActive && q == nullptr) {
    throw std::invalid_argument("active method requires a Q function");
  }

  EpisodeResult result;
  Pose pose = start;
  result.poses.push_back(pose);

  auto obs = detail::sense(ctx, pose);
  ++result.sense_count;
  ParticleSet particles =
      init_guided(obs.rank_state, ctx.grid, cfg.tracker.num_particles,
                  cfg.tracker.guided_top_k, rng);
  update(particles, obs.rank_state, ctx.grid, cfg.tracker, rng);
  result.states.push_back(obs.state32);

  if (method != Method::kSingleView) {
    using clock = std::chrono::steady_clock;
    for (int t = 1; t <= cfg.episode_length; ++t) {
      Action action;
      if (method == Method::kActive) {
        auto t0 = clock::now();
        action = static_cast<Action>(
            select_action(*q, result.states.back(), epsilon, rng));
        if (ctx.timers) {
          ctx.timers->planning_ms +=
              std::chrono::duration<double, std::milli>(clock::now() - t0)
                  .count();
          ++ctx.timers->plan_count;
        }
      } else {
        action = static_cast<Action>(rng.uniform_int(kNumActions));
      }
      result.actions.push_back(action);
      pose = step(ctx.world, pose, action);
      result.poses.push_back(pose);
      predict(particles, action, cfg.tracker.motion, ctx.grid, rng);
      obs = detail::sense(ctx, pose);
      ++result.sense_count;
      update(particles, obs.rank_state, ctx.grid, cfg.tracker, rng);
      result.states.push_back(obs.state32);
    }
  }

  result.true_class = ctx.grid.pose_to_class(pose);
  result.predicted_class = class_belief(particles, ctx.grid).top1_class;
  result.success = result.predicted_class == result.true_class;

  if (train_db != nullptr && method == Method::kActive) {
    double reward =
        result.success ? cfg.reward_success : cfg.reward_failure;
    int last = static_cast<int>(result.actions.size()) - 1;
    if (last >= 0) {
      train_db->update_terminal(result.states[last],
                                static_cast<int>(result.actions[last]), reward,
                                cfg.alpha, cfg.gamma);
      for (int i = last - 1; i >= 0; --i) {
        train_db->update(result.states[i], static_cast<int>(result.actions[i]),
                         0.0, result.states[i + 1], cfg.alpha, cfg.gamma);
      }
    }
  }
  return result;
}

// --------------------------------------------------------------------------

namespace detail {
constexpr std::uint64_t kTrainSalt = 0x7e11a1;
constexpr std::uint64_t kEvalSalt = 0xeba100;
constexpr std::uint64_t kValidationSalt = 0xda1100;
}  // namespace detail

// NNQL training: one episode per training start pose with the published
// epsilon schedule, checkpointing the database every checkpoint_period
// episodes.
inline QDatabase train_planner(const EpisodeContext& ctx, const Splits& splits,
                               std::uint64_t run_seed) {
  if (splits.train.empty()) throw std::invalid_argument("empty train split");
  const PipelineConfig& cfg = ctx.cfg;
  QDatabase db(ctx.grid.num_classes(), kNumActions, cfg.tau_q, cfg.knn);
  for (int n = 0; n < cfg.train_episodes; ++n) {
    Rng rng(Rng::derive(run_seed, detail::kTrainSalt + n));
    const Pose& start = splits.train[n % splits.train.size()];
    run_episode(ctx, start, Method::kActive, &db, &db,
                epsilon_for_episode(n), rng);
    if (cfg.checkpoint_period > 0 && (n + 1) % cfg.checkpoint_period == 0) {
      db.checkpoint(static_cast<std::uint64_t>(n + 1));
    }
  }
  return db;
}

// Top-1 accuracy (%) over test episodes started from the test split.
inline double evaluate(const EpisodeContext& ctx, const Splits& splits,
                       Method method, const QFunction* q,
                       std::uint64_t run_seed) {
  if (splits.test.empty()) throw std::invalid_argument("empty test split");
  const PipelineConfig& cfg = ctx.cfg;
  int correct = 0;
  std::uint64_t method_salt =
      detail::kEvalSalt + static_cast<std::uint64_t>(method) * 1000003;
  for (int i = 0; i < cfg.test_episodes; ++i) {
    Rng rng(Rng::derive(run_seed, method_salt + i));
    const Pose& start = splits.test[i % splits.test.size()];
    auto r = run_episode(ctx, start, method, q, nullptr, 0.0, rng);
    if (r.success) ++correct;
  }
  return 100.0 * correct / cfg.test_episodes;
}

// Unsupervised domain adaptation: score every checkpoint on the small
// validation set from the test domain and adopt the best; accuracy ties
// resolve to the latest checkpoint.
inline std::uint64_t uda_select(const EpisodeContext& ctx, const QDatabase& db,
                                const std::vector<Pose>& validation,
                                std::uint64_t run_seed) {
  if (db.checkpoints().empty()) {
    throw std::invalid_argument("database has no checkpoints");
  }
  if (validation.empty()) {
    throw std::invalid_argument("empty validation set");
  }
  std::uint64_t best_id = 0;
  int best_correct = -1;
  for (std::uint64_t id : db.checkpoints()) {
    QFunctionView view = db.restore(id);
    int correct = 0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      // Same per-episode seeds across checkpoints so the comparison is fair.
      Rng rng(Rng::derive(run_seed, detail::kValidationSalt + i));
      auto r = run_episode(ctx, validation[i], Method::kActive, &view, nullptr,
                           0.0, rng);
      if (r.success) ++correct;
    }
    if (correct >= best_correct) {
      best_correct = correct;
      best_id = id;
    }
  }
  return best_id;
}

// --------------------------------------------------------------------------
// Full experiment matrix: world seeds x the 5x5 domain-gap grid, reporting
// Top-1 accuracy per method.

struct MatrixRow {
  std::uint64_t world_seed = 0;
  double t_xy = 0.0;
  double t_theta = 0.0;
  double sv = 0.0;
  double mv = 0.0;
  double active = 0.0;
  double da = 0.0;
};

struct MatrixResult {
  std::vector<MatrixRow> rows;
  double mean_sv = 0.0;
  double mean_mv = 0.0;
  double mean_active = 0.0;
  double mean_da = 0.0;
};

// Builds the per-seed training corpus and GCN, then runs one (seed, gap)
// cell: sample splits, train the planner, evaluate all four methods.
struct SeedAssets {
  WorldModel world;
  GcnModel model;
};

inline SeedAssets prepare_seed_assets(std::uint64_t world_seed,
                                      const PipelineConfig& cfg) {
  SeedAssets assets{generate_world(world_seed, cfg.world), GcnModel{}};
  PlaceClassGrid grid = assets.world.grid();
  Rng rng(Rng::derive(world_seed, 0x5ce9e5));
  std::vector<SceneGraph> graphs;
  std::vector<int> labels;
  graphs.reserve(cfg.scene_count);
  for (int i = 0; i < cfg.scene_count; ++i) {
    Pose p = sample_free_pose(assets.world, rng);
    graphs.push_back(build_graph(render(assets.world, p)));
    labels.push_back(grid.pose_to_class(p));
  }
  GcnTrainConfig tc = cfg.gcn;
  tc.seed = Rng::derive(world_seed, 0x6c4);
  assets.model = train_gcn(graphs, labels, grid.num_classes(), tc).model;
  return assets;
}

inline MatrixRow run_matrix_cell(const SeedAssets& assets, double t_xy,
                                 double t_theta, const PipelineConfig& cfg) {
  PlaceClassGrid grid = assets.world.grid();
  EpisodeContext ctx{assets.world, grid, assets.model, cfg, nullptr};
  SplitSpec spec;
  spec.t_xy = t_xy;
  spec.t_theta = t_theta;
  spec.train_size = cfg.split_train_size;
  spec.test_size = cfg.split_test_size;
  spec.validation_size = cfg.split_validation_size;
  std::uint64_t cell_seed = Rng::derive(
      assets.world.seed,
      static_cast<std::uint64_t>(t_xy * 1000) * 7919 +
          static_cast<std::uint64_t>(t_theta));
  Rng split_rng(Rng::derive(cell_seed, 0x591i7 & 0xffff));
  Splits splits = sample_splits(assets.world, spec, split_rng);

  QDatabase db = train_planner(ctx, splits, cell_seed);

  MatrixRow row;
  row.world_seed = assets.world.seed;
  row.t_xy = t_xy;
  row.t_theta = t_theta;
  row.sv = evaluate(ctx, splits, Method::kSingleView, nullptr, cell_seed);
  row.mv = evaluate(ctx, splits, Method::kPassiveMultiView, nullptr, cell_seed);
  row.active = evaluate(ctx, splits, Method::kActive, &db, cell_seed);
  QFunctionView best = db.restore(uda_select(ctx, db, splits.validation,
                                             cell_seed));
  row.da = evaluate(ctx, splits, Method::kActive, &best, cell_seed);
  return row;
}

inline MatrixResult run_matrix(const std::vector<std::uint64_t>& world_seeds,
                               const PipelineConfig& cfg, int num_threads) {
  struct Cell {
    int seed_index;
    double t_xy;
    double t_theta;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < world_seeds.size(); ++s) {
    for (double txy : t_xy_grid()) {
      for (double tth : t_theta_grid()) {
        cells.push_back({static_cast<int>(s), txy, tth});
      }
    }
  }

  std::vector<SeedAssets> assets(world_seeds.size());
  {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= world_seeds.size()) return;
        assets[i] = prepare_seed_assets(world_seeds[i], cfg);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, num_threads); ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  MatrixResult result;
  result.rows.resize(cells.size());
  {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        const Cell& c = cells[i];
        result.rows[i] =
            run_matrix_cell(assets[c.seed_index], c.t_xy, c.t_theta, cfg);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, num_threads); ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  for (const auto& r : result.rows) {
    result.mean_sv += r.sv;
    result.mean_mv += r.mv;
    result.mean_active += r.active;
    result.mean_da += r.da;
  }
  double n = static_cast<double>(result.rows.size());
  result.mean_sv /= n;
  result.mean_mv /= n;
  result.mean_active /= n;
  result.mean_da /= n;
  return result;
}

}  // namespace semloc
