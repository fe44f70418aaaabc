#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semloc/particle_filter.hpp"
#include "semloc/rng.hpp"

namespace semloc {

// Read interface shared by the live database and restored checkpoint views.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual double estimate(const Eigen::VectorXf& state, int action) const = 0;
  virtual int num_actions() const = 0;
  virtual int state_dim() const = 0;
};

inline int greedy_action(const QFunction& q, const Eigen::VectorXf& state) {
  int best = 0;
  double best_q = q.estimate(state, 0);
  for (int a = 1; a < q.num_actions(); ++a) {
    double v = q.estimate(state, a);
    if (v > best_q) {
      best_q = v;
      best = a;
    }
  }
  return best;
}

// Epsilon-greedy over the Q estimates; value ties resolve to the lowest
// action id. With epsilon == 0 the rng is not consumed.
inline int select_action(const QFunction& q, const Eigen::VectorXf& state,
                         double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("epsilon outside [0, 1]");
  }
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    return rng.uniform_int(q.num_actions());
  }
  return greedy_action(q, state);
}

// Exploration schedule: epsilon = (0.1 (n+1) + 1)^-1 for the n-th episode.
inline double epsilon_for_episode(int episode) {
  return 1.0 / (0.1 * (episode + 1) + 1.0);
}

namespace detail {

struct ScanOutcome {
  int revisit = -1;     // index of a record within tau, or -1
  double value = 0.0;   // kNN mean (or the revisited q)
  int neighbors = 0;
};

// Exact linear kNN scan over packed float32 states. Neighbor ties on
// distance resolve to the lower record index; the mean accumulates in
// ascending index order so that replayed databases reproduce it bit for bit.
inline ScanOutcome knn_scan(const float* states, const double* q_values,
                            std::size_t count, int dim,
                            const Eigen::VectorXf& query, double tau,
                            int k) {
  ScanOutcome out;
  if (count == 0) return out;
  const float tau_sq = static_cast<float>(tau * tau);
  std::array<float, 16> best_d;
  std::array<int, 16> best_i;
  if (k > 16) throw std::invalid_argument("neighbor count too large");
  int filled = 0;
  Eigen::Map<const Eigen::VectorXf> q(query.data(), dim);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Map<const Eigen::VectorXf> row(states + i * dim, dim);
    float d = (row - q).squaredNorm();
    if (d <= tau_sq && out.revisit < 0) out.revisit = static_cast<int>(i);
    int pos = filled;
    while (pos > 0 && best_d[pos - 1] > d) --pos;
    if (pos < k) {
      int end = std::min(filled, k - 1);
      for (int j = end; j > pos; --j) {
        best_d[j] = best_d[j - 1];
        best_i[j] = best_i[j - 1];
      }
      best_d[pos] = d;
      best_i[pos] = static_cast<int>(i);
      if (filled < k) ++filled;
    }
  }
  if (out.revisit >= 0) {
    out.value = q_values[out.revisit];
    out.neighbors = 1;
    return out;
  }
  std::sort(best_i.begin(), best_i.begin() + filled);
  double sum = 0.0;
  for (int j = 0; j < filled; ++j) sum += q_values[best_i[j]];
  out.value = filled > 0 ? sum / filled : 0.0;
  out.neighbors = filled;
  return out;
}

}  // namespace detail

class QFunctionView;

// Nearest-neighbor Q-learning storage: per-action record collections of
// (state, q) with per-checkpoint q history. Records are never deleted;
// a state-action pair within tau of an existing record is a revisit and
// overwrites that record's q instead of inserting.
class QDatabase : public QFunction {
 public:
  explicit QDatabase(int state_dim, int num_actions = kNumActions,
                     double tau = 1e-6, int knn = 4)
      : dim_(state_dim), tau_(tau), knn_(knn), stores_(num_actions) {
    if (state_dim <= 0 || num_actions <= 0 || knn <= 0 || tau < 0.0) {
      throw std::invalid_argument("bad QDatabase parameters");
    }
  }

  int state_dim() const override { return dim_; }
  int num_actions() const override { return static_cast<int>(stores_.size()); }
  double tau() const { return tau_; }
  int knn() const { return knn_; }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& s : stores_) n += s.count;
    return n;
  }
  std::size_t size(int action) const { return store(action).count; }

  // Eq. (1): revisited pairs return their stored q exactly; otherwise the
  // mean over the k nearest stored records of the same action (fewer when
  // the collection is smaller, 0 when empty).
  double estimate(const Eigen::VectorXf& state, int action) const override {
    check_state(state);
    const Store& s = store(action);
    return detail::knn_scan(s.states.data(), s.q.data(), s.count, dim_, state,
                            tau_, knn_)
        .value;
  }

  double max_estimate(const Eigen::VectorXf& state) const {
    double best = estimate(state, 0);
    for (int a = 1; a < num_actions(); ++a) {
      best = std::max(best, estimate(state, a));
    }
    return best;
  }

  // Eq. (2) with bootstrap from the successor state.
  void update(const Eigen::VectorXf& state, int action, double reward,
              const Eigen::VectorXf& next_state, double alpha, double gamma) {
    double target = reward + gamma * max_estimate(next_state);
    apply_target(state, action, target, alpha, gamma);
  }

  // Eq. (2) for a terminal transition: no successor bootstrap.
  void update_terminal(const Eigen::VectorXf& state, int action, double reward,
                       double alpha, double gamma) {
    apply_target(state, action, reward, alpha, gamma);
  }

  // Tags every live record's current q with this checkpoint id. Records
  // inserted later implicitly carry N/A for it. Ids must increase.
  void checkpoint(std::uint64_t id) {
    if (!checkpoints_.empty() && id <= checkpoints_.back()) {
      throw std::invalid_argument(
          "checkpoint ids must be strictly increasing (duplicate or stale id " +
          std::to_string(id) + ")");
    }
    checkpoints_.push_back(id);
    for (auto& s : stores_) {
      for (std::size_t i = 0; i < s.count; ++i) {
        s.history[i].push_back({id, s.q[i]});
      }
    }
  }

  const std::vector<std::uint64_t>& checkpoints() const { return checkpoints_; }

  QFunctionView restore(std::uint64_t id) const;

  // --- serialization ----------------------------------------------------

  void save(const std::string& path) const;
  static QDatabase load(const std::string& path);

 private:
  friend class QFunctionView;

  struct HistoryEntry {
    std::uint64_t checkpoint_id;
    double q;
  };

  struct Store {
    std::vector<float> states;  // packed row-major, count * dim
    std::vector<double> q;
    std::vector<std::vector<HistoryEntry>> history;
    std::size_t count = 0;
  };

  const Store& store(int action) const {
    if (action < 0 || action >= num_actions()) {
      throw std::invalid_argument("action id out of range");
    }
    return stores_[action];
  }

  void check_state(const Eigen::VectorXf& state) const {
    if (state.size() != dim_) {
      throw std::invalid_argument("state dimension mismatch");
    }
  }

  void apply_target(const Eigen::VectorXf& state, int action, double target,
                    double alpha, double gamma) {
    if (alpha <= 0.0 || alpha > 1.0 || gamma < 0.0 || gamma >= 1.0) {
      throw std::invalid_argument("alpha must be in (0,1], gamma in [0,1)");
    }
    check_state(state);
    Store& s = stores_[action];
    auto scan = detail::knn_scan(s.states.data(), s.q.data(), s.count, dim_,
                                 state, tau_, knn_);
    double new_q = scan.value + alpha * (target - scan.value);
    if (scan.revisit >= 0) {
      s.q[scan.revisit] = new_q;
    } else {
      s.states.insert(s.states.end(), state.data(), state.data() + dim_);
      s.q.push_back(new_q);
      s.history.emplace_back();
      ++s.count;
    }
  }

  int dim_;
  double tau_;
  int knn_;
  std::vector<Store> stores_;
  std::vector<std::uint64_t> checkpoints_;
};

// Read-only Q function as of a past checkpoint. Records inserted after the
// checkpoint are invisible (their history holds no entry for it); surviving
// records answer with their q value at that time. Because records are
// append-only, the visible set is a per-action prefix.
class QFunctionView : public QFunction {
 public:
  QFunctionView(const QDatabase* db, std::uint64_t checkpoint_id)
      : db_(db), checkpoint_id_(checkpoint_id) {
    const auto& cps = db->checkpoints_;
    if (std::find(cps.begin(), cps.end(), checkpoint_id) == cps.end()) {
      throw std::invalid_argument("unknown checkpoint id " +
                                  std::to_string(checkpoint_id));
    }
    counts_.resize(db->stores_.size());
    q_at_.resize(db->stores_.size());
    for (std::size_t a = 0; a < db->stores_.size(); ++a) {
      const auto& s = db->stores_[a];
      std::size_t visible = 0;
      for (std::size_t i = 0; i < s.count; ++i) {
        const auto& h = s.history[i];
        auto it = std::lower_bound(
            h.begin(), h.end(), checkpoint_id,
            [](const QDatabase::HistoryEntry& e, std::uint64_t id) {
              return e.checkpoint_id < id;
            });
        if (it == h.end() || it->checkpoint_id != checkpoint_id) break;
        q_at_[a].push_back(it->q);
        ++visible;
      }
      counts_[a] = visible;
    }
  }

  std::uint64_t checkpoint_id() const { return checkpoint_id_; }
  int state_dim() const override { return db_->dim_; }
  int num_actions() const override {
    return static_cast<int>(db_->stores_.size());
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }

  double estimate(const Eigen::VectorXf& state, int action) const override {
    if (action < 0 || action >= num_actions()) {
      throw std::invalid_argument("action id out of range");
    }
    if (state.size() != db_->dim_) {
      throw std::invalid_argument("state dimension mismatch");
    }
    const auto& s = db_->stores_[action];
    return detail::knn_scan(s.states.data(), q_at_[action].data(), counts_[action],
                            db_->dim_, state, db_->tau_, db_->knn_)
        .value;
  }

 private:
  const QDatabase* db_;
  std::uint64_t checkpoint_id_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<double>> q_at_;
};

inline QFunctionView QDatabase::restore(std::uint64_t id) const {
  return QFunctionView(this, id);
}

// ---------------------------------------------------------------------------
// Database container: header, checkpoint registry, then per record the
// action id, state floats, current q, and per-checkpoint (id, available, q).

constexpr char kQdbMagic[8] = {'S', 'L', 'Q', 'D', 'B', 'A', 'S', 'E'};
constexpr std::uint32_t kQdbVersion = 1;

inline void QDatabase::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  auto w32 = [&os](std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  auto w64 = [&os](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  auto wf64 = [&os](double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  os.write(kQdbMagic, sizeof(kQdbMagic));
  w32(kQdbVersion);
  w64(size());
  w32(static_cast<std::uint32_t>(dim_));
  w32(static_cast<std::uint32_t>(stores_.size()));
  wf64(tau_);
  w32(static_cast<std::uint32_t>(knn_));
  w32(static_cast<std::uint32_t>(checkpoints_.size()));
  for (auto id : checkpoints_) w64(id);
  for (std::size_t a = 0; a < stores_.size(); ++a) {
    const Store& s = stores_[a];
    for (std::size_t i = 0; i < s.count; ++i) {
      w32(static_cast<std::uint32_t>(a));
      os.write(reinterpret_cast<const char*>(s.states.data() + i * dim_),
               dim_ * sizeof(float));
      wf64(s.q[i]);
      const auto& h = s.history[i];
      // One entry per registered checkpoint; pre-insertion ones are N/A.
      for (auto id : checkpoints_) {
        w64(id);
        auto it = std::lower_bound(
            h.begin(), h.end(), id,
            [](const HistoryEntry& e, std::uint64_t cid) {
              return e.checkpoint_id < cid;
            });
        bool available = it != h.end() && it->checkpoint_id == id;
        std::uint8_t flag = available ? 1 : 0;
        os.write(reinterpret_cast<const char*>(&flag), sizeof(flag));
        if (available) wf64(it->q);
      }
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline QDatabase QDatabase::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  auto fail = [&path](const std::string& why) -> std::runtime_error {
    return std::runtime_error(path + ": " + why);
  };
  auto r32 = [&]() {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw fail("truncated");
    return v;
  };
  auto r64 = [&]() {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw fail("truncated");
    return v;
  };
  auto rf64 = [&]() {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw fail("truncated");
    return v;
  };
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kQdbMagic, sizeof(magic)) != 0) {
    throw fail("not a q-database file");
  }
  if (r32() != kQdbVersion) throw fail("unsupported version");
  std::uint64_t total = r64();
  std::uint32_t dim = r32();
  std::uint32_t num_actions = r32();
  double tau = rf64();
  std::uint32_t knn = r32();
  if (dim == 0 || num_actions == 0) throw fail("corrupt header");
  QDatabase db(static_cast<int>(dim), static_cast<int>(num_actions), tau,
               static_cast<int>(knn));
  std::uint32_t n_cp = r32();
  db.checkpoints_.reserve(n_cp);
  for (std::uint32_t i = 0; i < n_cp; ++i) db.checkpoints_.push_back(r64());
  for (std::uint64_t rec = 0; rec < total; ++rec) {
    std::uint32_t action = r32();
    if (action >= num_actions) throw fail("record action out of range");
    Store& s = db.stores_[action];
    std::size_t off = s.states.size();
    s.states.resize(off + dim);
    is.read(reinterpret_cast<char*>(s.states.data() + off),
            dim * sizeof(float));
    if (!is) throw fail("truncated");
    s.q.push_back(rf64());
    std::vector<HistoryEntry> h;
    for (std::uint32_t c = 0; c < n_cp; ++c) {
      std::uint64_t id = r64();
      if (id != db.checkpoints_[c]) throw fail("history out of sync");
      std::uint8_t flag = 0;
      is.read(reinterpret_cast<char*>(&flag), sizeof(flag));
      if (!is) throw fail("truncated");
      if (flag) h.push_back({id, rf64()});
    }
    s.history.push_back(std::move(h));
    ++s.count;
  }
  return db;
}

}  // namespace semloc
