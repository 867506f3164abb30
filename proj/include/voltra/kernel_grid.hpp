#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"

namespace voltra {

using Eigen::MatrixXd;

/// Dense two-time kernel on a duplicated-node mesh: an n x n block for every
/// ordered node pair (s, t). Blocks with time(t) > time(s) are zero (Volterra
/// causality); equal-time cross-slot blocks are kept because quadrature
/// endpoints touch the diagonal. Storage is flat row-major [s][t][r][c].
class KernelGrid {
 public:
  KernelGrid() = default;
  KernelGrid(MeshPtr mesh, int n)
      : mesh_(std::move(mesh)), n_(n),
        v_(static_cast<std::size_t>(mesh_->size()) * mesh_->size() * n * n, 0.0) {}

  const MeshPtr& mesh() const { return mesh_; }
  int dim() const { return n_; }
  int nodes() const { return mesh_->size(); }

  double* block(int s, int t) {
    return v_.data() + (static_cast<std::size_t>(s) * nodes() + t) * n_ * n_;
  }
  const double* block(int s, int t) const {
    return v_.data() + (static_cast<std::size_t>(s) * nodes() + t) * n_ * n_;
  }

  MatrixXd block_matrix(int s, int t) const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(block(s, t), n_, n_);
  }
  void set_block(int s, int t, const MatrixXd& m) {
    double* b = block(s, t);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) b[r * n_ + c] = m(r, c);
  }

  double sup_norm() const {
    double w = 0.0;
    for (double x : v_) w = std::max(w, std::abs(x));
    return w;
  }

  KernelGrid& operator+=(const KernelGrid& o) {
    if (o.v_.size() != v_.size()) throw std::invalid_argument("kernel grid: size mismatch");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  KernelGrid operator-(const KernelGrid& o) const {
    KernelGrid out = *this;
    for (std::size_t i = 0; i < v_.size(); ++i) out.v_[i] -= o.v_[i];
    return out;
  }

 private:
  MeshPtr mesh_;
  int n_ = 0;
  std::vector<double> v_;
};

/// Sample a kernel function onto the grid. The sampler receives flat node
/// indices and is called exactly for the pairs with time(t) <= time(s); all
/// other blocks stay zero.
inline KernelGrid sample_kernel(MeshPtr mesh, int n,
                                const std::function<MatrixXd(int, int)>& sampler) {
  KernelGrid K(mesh, n);
  const int M = mesh->size();
  for (int s = 0; s < M; ++s) {
    const double ts = mesh->time(s);
    for (int t = 0; t < M; ++t)
      if (mesh->time(t) <= ts) K.set_block(s, t, sampler(s, t));
  }
  return K;
}

/// Kernel convolution (A * B)(s, t) = integral over (t, s) of A(s, r) B(r, t),
/// evaluated with the shared range quadrature. The triangular structure is
/// preserved exactly.
inline KernelGrid kernel_convolve(const KernelGrid& A, const KernelGrid& B) {
  if (A.mesh() != B.mesh() || A.dim() != B.dim())
    throw std::invalid_argument("kernel convolve: operands on different grids");
  const TimeMesh& mesh = *A.mesh();
  const int M = mesh.size();
  const int n = A.dim();
  KernelGrid out(A.mesh(), n);

  // Column-contiguous copy of B so the inner loop walks both factors linearly.
  std::vector<double> BT(static_cast<std::size_t>(M) * M * n * n);
  for (int r = 0; r < M; ++r)
    for (int t = 0; t < M; ++t)
      std::memcpy(&BT[(static_cast<std::size_t>(t) * M + r) * n * n], B.block(r, t),
                  sizeof(double) * n * n);

  for (int s = 0; s < M; ++s) {
    const int b = mesh.floor_slot(s);
    const double ts = mesh.time(s);
    const double* rowA = A.block(s, 0);
    for (int t = 0; t < M; ++t) {
      const int a = mesh.ceil_slot(t);
      if (a >= b || !(mesh.time(t) < ts)) continue;
      const double* colB = &BT[static_cast<std::size_t>(t) * M * n * n];
      double* dst = out.block(s, t);
      if (n == 1) {
        double acc = 0.0;
        for (int j = a; j <= b; ++j) acc += mesh.weight(j) * rowA[j] * colB[j];
        acc += (mesh.half_step(a) - mesh.weight(a)) * rowA[a] * colB[a];
        acc += (mesh.half_step(b) - mesh.weight(b)) * rowA[b] * colB[b];
        dst[0] = acc;
      } else {
        for (int j = a; j <= b; ++j) {
          const double w = mesh.range_weight(j, a, b);
          const double* Ab = rowA + static_cast<std::size_t>(j) * n * n;
          const double* Bb = colB + static_cast<std::size_t>(j) * n * n;
          for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) {
              const double ark = w * Ab[r * n + k];
              for (int c = 0; c < n; ++c) dst[r * n + c] += ark * Bb[k * n + c];
            }
        }
      }
    }
  }
  return out;
}

struct ResolventResult {
  KernelGrid R;
  int terms = 0;            // number of iterated kernels summed
  double last_term = 0.0;   // sup norm of the final summand
  bool converged = false;
};

/// Resolvent of a Volterra kernel by its iterated-kernel series
/// R = K + K*K + K*K*K + ... The factorial decay of iterated Volterra
/// kernels makes the series converge for any bounded kernel; the loop stops
/// once a summand's sup norm drops below tol.
inline ResolventResult resolvent_kernel(const KernelGrid& K, double tol = 1e-12,
                                        int max_terms = 200) {
  ResolventResult res{K, 1, K.sup_norm(), false};
  if (res.last_term == 0.0) {
    res.converged = true;
    return res;
  }
  KernelGrid power = K;
  double prev = res.last_term;
  for (int k = 2; k <= max_terms; ++k) {
    power = kernel_convolve(power, K);
    const double norm = power.sup_norm();
    res.R += power;
    res.terms = k;
    res.last_term = norm;
    if (norm <= tol) {
      res.converged = true;
      return res;
    }
    // Factorial decay must kick in once k exceeds ||K|| T e; a growing tail
    // this deep means the grid is corrupt.
    if (k > 8 && norm > 1e6 * std::max(1.0, prev)) break;
    prev = norm;
  }
  if (!res.converged)
    throw std::runtime_error("resolvent: series did not reach tolerance after " +
                             std::to_string(res.terms) + " terms (last " +
                             std::to_string(res.last_term) + ")");
  return res;
}

/// Residuals of the two-sided resolvent identity R - K = R*K = K*R, the
/// internal consistency check of a computed resolvent.
struct ResolventIdentity {
  double right = 0.0;  // sup |R*K - (R - K)|
  double left = 0.0;   // sup |K*R - (R - K)|
};

inline ResolventIdentity resolvent_identity_residual(const KernelGrid& R,
                                                     const KernelGrid& K) {
  const KernelGrid diff = R - K;
  ResolventIdentity out;
  out.right = (kernel_convolve(R, K) - diff).sup_norm();
  out.left = (kernel_convolve(K, R) - diff).sup_norm();
  return out;
}

/// y(s) = forcing(s) + integral over (0, s) of Kernel(s, t) forcing(t): apply
/// a kernel to a column-valued grid function.
inline Trajectory apply_kernel(const KernelGrid& K, const Trajectory& fvec) {
  const TimeMesh& mesh = *K.mesh();
  const int n = K.dim();
  Trajectory out(K.mesh(), n);
  for (int s = 0; s < mesh.size(); ++s) {
    VectorXd acc = fvec.at(s);
    for_quad(mesh, quad_range(mesh, 0, s), [&](int j, double w) {
      acc += w * K.block_matrix(s, j) * fvec.at(j);
    });
    out.set(s, acc);
  }
  return out;
}

/// y(t) = eta(t) + integral over (t, T) of eta(s) Kernel(s, t): the dual
/// (row-valued) application, integrating forward arguments against rows.
inline RowField apply_kernel_dual(const KernelGrid& K, const RowField& eta) {
  const TimeMesh& mesh = *K.mesh();
  const int n = K.dim();
  RowField out(K.mesh(), n);
  const int M = mesh.size();
  for (int t = 0; t < M; ++t) {
    Eigen::RowVectorXd acc = eta.values.row(t);
    for_quad(mesh, quad_range(mesh, t, M - 1), [&](int j, double w) {
      acc += w * eta.values.row(j) * K.block_matrix(j, t);
    });
    out.values.row(t) = acc;
  }
  return out;
}

}  // namespace voltra
