#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace semloc {

// Reciprocal rank encoding of a classifier score vector: element c becomes
// 1/rank(c) under descending score, ties broken by ascending class id. The
// result is invariant to any strictly monotone transform of the scores.
inline Eigen::VectorXd scores_to_rank_state(const Eigen::VectorXd& scores) {
  const int n = static_cast<int>(scores.size());
  if (n == 0) throw std::invalid_argument("empty score vector");
  for (int i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) {
      throw std::invalid_argument("NaN in classifier scores");
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  Eigen::VectorXd rank_state(n);
  for (int r = 0; r < n; ++r) {
    rank_state[order[r]] = 1.0 / static_cast<double>(r + 1);
  }
  return rank_state;
}

// Rank states are consumed as float32 by the planner database.
inline Eigen::VectorXf to_state_vector(const Eigen::VectorXd& rank_state) {
  return rank_state.cast<float>();
}

}  // namespace semloc
