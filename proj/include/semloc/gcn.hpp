#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "semloc/rng.hpp"
#include "semloc/scene_graph.hpp"

namespace semloc {

constexpr int kGcnHiddenDim = 64;

// Two graph-convolution layers (270 -> 64 -> 64) with symmetric-normalized
// propagation, mean readout, and a linear classification head (64 -> C).
struct GcnModel {
  Eigen::MatrixXd w1;  // 270 x hidden
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // hidden x C
  Eigen::VectorXd b3;

  int hidden_dim() const { return static_cast<int>(b1.size()); }
  int num_classes() const { return static_cast<int>(b3.size()); }

  bool finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite() && w3.allFinite() && b3.allFinite();
  }
};

inline GcnModel init_gcn_model(int num_classes, std::uint64_t seed) {
  if (num_classes <= 0) throw std::invalid_argument("num_classes must be > 0");
  const int h = kGcnHiddenDim;
  Rng rng(seed);
  auto glorot = [&rng](Eigen::MatrixXd& m, int fan_in, int fan_out) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(i, j) = rng.uniform(-limit, limit);
      }
    }
  };
  GcnModel m;
  m.w1.resize(kNodeFeatureDim, h);
  m.w2.resize(h, h);
  m.w3.resize(h, num_classes);
  glorot(m.w1, kNodeFeatureDim, h);
  glorot(m.w2, h, h);
  glorot(m.w3, h, num_classes);
  m.b1 = Eigen::VectorXd::Zero(h);
  m.b2 = Eigen::VectorXd::Zero(h);
  m.b3 = Eigen::VectorXd::Zero(num_classes);
  return m;
}

// Graph with its propagation matrix D^{-1/2}(A+I)D^{-1/2} precomputed.
struct PreparedGraph {
  std::vector<int> nodes;
  Eigen::MatrixXd norm_adj;
};

inline PreparedGraph prepare_graph(const SceneGraph& g) {
  PreparedGraph p;
  p.nodes = g.nodes;
  const int n = g.num_nodes();
  for (int f : g.nodes) {
    if (f < 0 || f >= kNodeFeatureDim) {
      throw std::invalid_argument("node feature index out of range");
    }
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& [i, j] : g.edges) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      throw std::invalid_argument("invalid edge");
    }
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  Eigen::VectorXd inv_sqrt_deg =
      a.rowwise().sum().array().sqrt().inverse().matrix();
  p.norm_adj = inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
  return p;
}

// Forward pass on a prepared graph. An empty graph has a zero readout, so
// the logits reduce to the head bias.
inline Eigen::VectorXd gcn_forward(const PreparedGraph& g,
                                   const GcnModel& model) {
  const int n = static_cast<int>(g.nodes.size());
  if (n == 0) return model.b3;
  const int h = model.hidden_dim();
  Eigen::MatrixXd gathered(n, h);
  for (int i = 0; i < n; ++i) gathered.row(i) = model.w1.row(g.nodes[i]);
  Eigen::MatrixXd z1 =
      (g.norm_adj * gathered).rowwise() + model.b1.transpose();
  Eigen::MatrixXd h1 = z1.cwiseMax(0.0);
  Eigen::MatrixXd z2 =
      (g.norm_adj * h1 * model.w2).rowwise() + model.b2.transpose();
  Eigen::VectorXd readout = z2.colwise().mean();
  return model.w3.transpose() * readout + model.b3;
}

inline Eigen::VectorXd gcn_forward(const SceneGraph& g, const GcnModel& model) {
  return gcn_forward(prepare_graph(g), model);
}

inline double softmax_cross_entropy(const Eigen::VectorXd& logits, int label) {
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits[label];
}

struct GcnGradients {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  explicit GcnGradients(const GcnModel& m) { set_zero_like(m); }

  void set_zero_like(const GcnModel& m) {
    w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
    w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
    w3 = Eigen::MatrixXd::Zero(m.w3.rows(), m.w3.cols());
    b1 = Eigen::VectorXd::Zero(m.b1.size());
    b2 = Eigen::VectorXd::Zero(m.b2.size());
    b3 = Eigen::VectorXd::Zero(m.b3.size());
  }
};

// Accumulates scale * d(loss)/d(params) for one sample; returns the sample
// loss. Mirrors gcn_forward step for step.
inline double gcn_loss_and_grad(const GcnModel& model, const PreparedGraph& g,
                                int label, double scale, GcnGradients& grads) {
  const int n = static_cast<int>(g.nodes.size());
  const int h = model.hidden_dim();
  const int c = model.num_classes();
  if (label < 0 || label >= c) throw std::invalid_argument("label out of range");

  Eigen::MatrixXd gathered, z1, h1, prop1, z2;
  Eigen::VectorXd readout;
  if (n > 0) {
    gathered.resize(n, h);
    for (int i = 0; i < n; ++i) gathered.row(i) = model.w1.row(g.nodes[i]);
    z1 = (g.norm_adj * gathered).rowwise() + model.b1.transpose();
    h1 = z1.cwiseMax(0.0);
    prop1 = g.norm_adj * h1;
    z2 = (prop1 * model.w2).rowwise() + model.b2.transpose();
    readout = z2.colwise().mean();
  } else {
    readout = Eigen::VectorXd::Zero(h);
  }
  Eigen::VectorXd logits = model.w3.transpose() * readout + model.b3;

  double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp();
  double denom = p.sum();
  double loss = mx + std::log(denom) - logits[label];
  p /= denom;

  Eigen::VectorXd dlogits = scale * p;
  dlogits[label] -= scale;

  grads.b3 += dlogits;
  grads.w3 += readout * dlogits.transpose();
  if (n == 0) return loss;

  Eigen::VectorXd dreadout = model.w3 * dlogits;
  // d(readout)/d(z2) spreads uniformly over rows.
  Eigen::MatrixXd dz2 =
      Eigen::MatrixXd::Ones(n, 1) * (dreadout.transpose() / n);
  grads.b2 += dz2.colwise().sum().transpose();
  grads.w2 += prop1.transpose() * dz2;
  Eigen::MatrixXd dh1 = g.norm_adj * (dz2 * model.w2.transpose());
  Eigen::MatrixXd dz1 = (z1.array() > 0.0).select(dh1, 0.0);
  grads.b1 += dz1.colwise().sum().transpose();
  Eigen::MatrixXd dgathered = g.norm_adj * dz1;
  for (int i = 0; i < n; ++i) grads.w1.row(g.nodes[i]) += dgathered.row(i);
  return loss;
}

struct GcnTrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct GcnTrainResult {
  GcnModel model;
  double final_train_accuracy = 0.0;
  double final_epoch_loss = 0.0;
};

namespace detail {

// Adam moments for one parameter array.
struct AdamSlot {
  Eigen::MatrixXd m, v;
  explicit AdamSlot(const Eigen::MatrixXd& like)
      : m(Eigen::MatrixXd::Zero(like.rows(), like.cols())),
        v(Eigen::MatrixXd::Zero(like.rows(), like.cols())) {}

  void apply(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
             double lr, int t) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(kBeta1, t);
    double c2 = 1.0 - std::pow(kBeta2, t);
    param -= (lr / c1) * m.cwiseQuotient(
                             ((v / c2).cwiseSqrt().array() + kEps).matrix());
  }
};

}  // namespace detail

inline int gcn_predict(const PreparedGraph& g, const GcnModel& model) {
  Eigen::VectorXd logits = gcn_forward(g, model);
  int best = 0;
  for (int i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

inline double gcn_dataset_loss(const GcnModel& model,
                               const std::vector<PreparedGraph>& graphs,
                               const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    total += softmax_cross_entropy(gcn_forward(graphs[i], model), labels[i]);
  }
  return total / static_cast<double>(graphs.size());
}

// Mini-batch Adam training on softmax cross entropy.
inline GcnTrainResult train_gcn(const std::vector<SceneGraph>& graphs,
                                const std::vector<int>& labels,
                                int num_classes, const GcnTrainConfig& cfg) {
  if (graphs.empty()) throw std::invalid_argument("empty training set");
  if (graphs.size() != labels.size()) {
    throw std::invalid_argument("graph/label count mismatch");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw std::invalid_argument("label out of range: " + std::to_string(l));
    }
  }

  std::vector<PreparedGraph> prepared;
  prepared.reserve(graphs.size());
  for (const auto& g : graphs) prepared.push_back(prepare_graph(g));

  GcnTrainResult result;
  result.model = init_gcn_model(num_classes, cfg.seed);
  GcnModel& model = result.model;

  detail::AdamSlot aw1(model.w1), aw2(model.w2), aw3(model.w3);
  detail::AdamSlot ab1(model.b1), ab2(model.b2), ab3(model.b3);
  GcnGradients grads(model);

  Rng shuffle_rng(Rng::derive(cfg.seed, 0x5u));
  std::vector<int> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  const int n = static_cast<int>(graphs.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      int count = std::min(cfg.batch_size, n - start);
      grads.set_zero_like(model);
      double scale = 1.0 / count;
      for (int b = 0; b < count; ++b) {
        int idx = order[start + b];
        epoch_loss +=
            gcn_loss_and_grad(model, prepared[idx], labels[idx], scale, grads);
      }
      ++step;
      aw1.apply(model.w1, grads.w1, cfg.learning_rate, step);
      ab1.apply(model.b1, grads.b1, cfg.learning_rate, step);
      aw2.apply(model.w2, grads.w2, cfg.learning_rate, step);
      ab2.apply(model.b2, grads.b2, cfg.learning_rate, step);
      aw3.apply(model.w3, grads.w3, cfg.learning_rate, step);
      ab3.apply(model.b3, grads.b3, cfg.learning_rate, step);
      if (!model.finite()) {
        throw std::runtime_error("non-finite parameters after training step");
      }
    }
    result.final_epoch_loss = epoch_loss / n;
  }

  int correct = 0;
  for (int i = 0; i < n; ++i) {
    if (gcn_predict(prepared[i], model) == labels[i]) ++correct;
  }
  result.final_train_accuracy = static_cast<double>(correct) / n;
  return result;
}

// ---------------------------------------------------------------------------
// Model container: magic, version, C, layer shapes, float32 row-major data.

constexpr char kModelMagic[8] = {'S', 'L', 'G', 'C', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("truncated file");
  return v;
}

inline void write_matrix_f32(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      float f = static_cast<float>(m(i, j));
      os.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
}

inline Eigen::MatrixXd read_matrix_f32(std::istream& is, Eigen::Index rows,
                                       Eigen::Index cols, const char* name) {
  std::uint32_t r = read_u32(is);
  std::uint32_t c = read_u32(is);
  if (r != static_cast<std::uint32_t>(rows) ||
      c != static_cast<std::uint32_t>(cols)) {
    throw std::runtime_error(std::string("model shape mismatch for ") + name);
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      float f = 0.0f;
      is.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!is) throw std::runtime_error("truncated file");
      m(i, j) = f;
    }
  }
  return m;
}

}  // namespace detail

inline void save_gcn_model(const std::string& path, const GcnModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kModelMagic, sizeof(kModelMagic));
  detail::write_u32(os, kModelVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(model.num_classes()));
  detail::write_u32(os, static_cast<std::uint32_t>(model.hidden_dim()));
  detail::write_matrix_f32(os, model.w1);
  detail::write_matrix_f32(os, model.b1);
  detail::write_matrix_f32(os, model.w2);
  detail::write_matrix_f32(os, model.b2);
  detail::write_matrix_f32(os, model.w3);
  detail::write_matrix_f32(os, model.b3);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline GcnModel load_gcn_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a model file: " + path);
  }
  std::uint32_t version = detail::read_u32(is);
  if (version != kModelVersion) {
    throw std::runtime_error("unsupported model version " +
                             std::to_string(version));
  }
  std::uint32_t c = detail::read_u32(is);
  std::uint32_t h = detail::read_u32(is);
  if (c == 0 || h == 0) throw std::runtime_error("corrupt model header");
  GcnModel m;
  m.w1 = detail::read_matrix_f32(is, kNodeFeatureDim, h, "w1");
  m.b1 = detail::read_matrix_f32(is, h, 1, "b1");
  m.w2 = detail::read_matrix_f32(is, h, h, "w2");
  m.b2 = detail::read_matrix_f32(is, h, 1, "b2");
  m.w3 = detail::read_matrix_f32(is, h, c, "w3");
  m.b3 = detail::read_matrix_f32(is, c, 1, "b3");
  return m;
}

}  // namespace semloc
