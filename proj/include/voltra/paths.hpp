#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "voltra/time_mesh.hpp"

namespace voltra {

using Eigen::MatrixXd;

/// Strictly increasing index chain j = sigma_0 < sigma_1 < ... < sigma_len = i
/// through switching-time indices. The singleton {i} stands for the empty
/// product (identity weight).
using IndexPath = std::vector<int>;

/// All increasing chains from j to i (1-based endpoints, j <= i). There are
/// 2^(i-j-1) of them for j < i, one singleton for j == i, none for j > i.
/// Guarded because the count is exponential.
inline std::vector<IndexPath> enumerate_paths(int j, int i, int max_span = 20) {
  if (j < 1 || i < j) return {};
  if (i - j > max_span)
    throw std::invalid_argument("paths: span too large to enumerate explicitly");
  std::vector<IndexPath> out;
  if (j == i) {
    out.push_back({j});
    return out;
  }
  const int mid = i - j - 1;  // indices j+1 .. i-1, each in or out
  for (unsigned long mask = 0; mask < (1ul << mid); ++mask) {
    IndexPath p{j};
    for (int k = 0; k < mid; ++k)
      if (mask & (1ul << k)) p.push_back(j + 1 + k);
    p.push_back(i);
    out.push_back(std::move(p));
  }
  return out;
}

/// Two-index factor supplier: factor(to, from) is the n x n weight attached
/// to the chain step from index `from` up to index `to`.
using ChainFactor = std::function<MatrixXd(int to, int from)>;

/// Product of factors along one chain, later steps multiplying from the
/// left: factor(s_L, s_{L-1}) * ... * factor(s_1, s_0). Singleton chains give
/// the identity.
inline MatrixXd path_weight(const IndexPath& path, const ChainFactor& factor, int n) {
  MatrixXd W = MatrixXd::Identity(n, n);
  for (std::size_t k = 1; k < path.size(); ++k)
    W = factor(path[k], path[k - 1]).eval() * W;
  return W;
}

/// Sums of path weights over all increasing chains, tabulated by the
/// recursion M(j, i) = sum over k in [j, i) of factor(i, k) * M(j, k),
/// M(i, i) = I. Linear in the number of (j, k) pairs instead of exponential.
class PathSumTable {
 public:
  PathSumTable(const ChainFactor& factor, int i_max, int n) : i_max_(i_max), n_(n) {
    table_.assign(static_cast<std::size_t>(i_max) * i_max, MatrixXd());
    for (int j = 1; j <= i_max; ++j) {
      slot(j, j) = MatrixXd::Identity(n, n);
      for (int i = j + 1; i <= i_max; ++i) {
        MatrixXd acc = MatrixXd::Zero(n, n);
        for (int k = j; k < i; ++k) acc += factor(i, k) * slot(j, k);
        slot(j, i) = std::move(acc);
      }
    }
  }

  int dim() const { return n_; }
  int max_index() const { return i_max_; }

  /// M(j, i) for 1 <= j <= i <= i_max.
  const MatrixXd& at(int j, int i) const {
    if (j < 1 || i < j || i > i_max_)
      throw std::invalid_argument("path table: index pair out of range");
    return table_[idx(j, i)];
  }

 private:
  std::size_t idx(int j, int i) const {
    return static_cast<std::size_t>(j - 1) * i_max_ + (i - 1);
  }
  MatrixXd& slot(int j, int i) { return table_[idx(j, i)]; }

  int i_max_;
  int n_;
  std::vector<MatrixXd> table_;
};

/// Brute-force path sum for cross-checking the table: enumerate every chain
/// and add its weight.
inline MatrixXd path_sum_direct(int j, int i, const ChainFactor& factor, int n) {
  MatrixXd acc = MatrixXd::Zero(n, n);
  for (const IndexPath& p : enumerate_paths(j, i)) acc += path_weight(p, factor, n);
  return acc;
}

}  // namespace voltra
