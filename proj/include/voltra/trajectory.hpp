#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "voltra/time_mesh.hpp"

namespace voltra {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// State values on a duplicated-node mesh, row j holds the value at flat
/// node j. One-sided limits at switching times live in the two slots that
/// share the time value.
struct Trajectory {
  MeshPtr mesh;
  MatrixXd values;  // size() x n

  Trajectory() = default;
  Trajectory(MeshPtr m, int n) : mesh(std::move(m)), values(MatrixXd::Zero(mesh->size(), n)) {}

  int dim() const { return static_cast<int>(values.cols()); }

  VectorXd at(int u) const { return values.row(u).transpose(); }
  void set(int u, const VectorXd& v) { values.row(u) = v.transpose(); }

  /// Left limit at boundary i = 1..N+1 (i = N+1 is the horizon).
  VectorXd left_limit(int i) const { return at(mesh->left_slot(i)); }
  /// Right value at switching time i = 1..N.
  VectorXd right_limit(int i) const { return at(mesh->right_slot(i)); }

  double sup_distance(const Trajectory& other) const {
    if (values.rows() != other.values.rows() || values.cols() != other.values.cols())
      throw std::invalid_argument("trajectory: sup_distance shape mismatch");
    return (values - other.values).cwiseAbs().maxCoeff();
  }
  double sup_norm() const { return values.cwiseAbs().maxCoeff(); }
};

/// Row-valued grid function (adjoint quantities), row j is the 1 x n value at
/// flat node j. Same slot conventions as Trajectory.
using RowField = Trajectory;

}  // namespace voltra
