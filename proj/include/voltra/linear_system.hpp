#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltra/kernel_grid.hpp"
#include "voltra/paths.hpp"
#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"

namespace voltra {

/// Linear impulsive Volterra system
///   x(s) = forcing(s) + integral over (0, s) of K(s, t) x(t) dt
///          + sum over switching times tau_i < s of L_i(s) x(tau_i-).
/// L[i][s] stores L_{i+1} at flat node s (0-based impulse index); entries for
/// nodes at or before the impulse are zero by construction.
struct LinearSystem {
  MeshPtr mesh;
  int n = 1;
  KernelGrid K;
  std::vector<std::vector<MatrixXd>> L;  // [impulse][flat node]
  Trajectory forcing;
};

/// Build a system from samplers. K_sampler(s, t) is called on the causal
/// pairs; L_sampler(i, s) with 0-based impulse i is called only where the
/// impulse is active (strictly later intervals).
inline LinearSystem make_linear_system(
    MeshPtr mesh, int n, const std::function<MatrixXd(int, int)>& K_sampler,
    const std::function<MatrixXd(int, int)>& L_sampler,
    const std::function<VectorXd(int)>& forcing_sampler) {
  LinearSystem sys;
  sys.mesh = mesh;
  sys.n = n;
  sys.K = sample_kernel(mesh, n, K_sampler);
  const int M = mesh->size();
  const int N = mesh->n_switches();
  sys.L.assign(N, std::vector<MatrixXd>(M, MatrixXd::Zero(n, n)));
  for (int i = 0; i < N; ++i)
    for (int s = 0; s < M; ++s)
      if (mesh->interval(s) >= i + 1) sys.L[i][s] = L_sampler(i, s);
  sys.forcing = Trajectory(mesh, n);
  for (int s = 0; s < M; ++s) sys.forcing.set(s, forcing_sampler(s));
  return sys;
}

/// Chain factors L(tau_to, tau_from) read at the left slot of the target
/// boundary, the values the left-limit recursion actually uses. Boundary
/// index to = N+1 addresses the horizon.
inline ChainFactor system_chain_factor(const LinearSystem& sys) {
  return [&sys](int to, int from) -> MatrixXd {
    const int s = sys.mesh->left_slot(to);
    return sys.L[from - 1][s];
  };
}

/// Path-sum table of the system's impulse factors up to the horizon index.
inline PathSumTable system_path_table(const LinearSystem& sys) {
  return PathSumTable(system_chain_factor(sys), sys.mesh->n_intervals(), sys.n);
}

namespace detail {

/// B[s][j] = sum over i in [j, p(s)] of L_i(s) M(j, i): the weight the
/// left limit at tau_j contributes to node s after unfolding the impulses.
/// Only j in 1..p(s) are meaningful; other entries stay zero.
inline std::vector<std::vector<MatrixXd>> unfold_weights(const LinearSystem& sys,
                                                         const PathSumTable& table) {
  const TimeMesh& mesh = *sys.mesh;
  const int M = mesh.size();
  const int N = mesh.n_switches();
  std::vector<std::vector<MatrixXd>> B(
      M, std::vector<MatrixXd>(N, MatrixXd::Zero(sys.n, sys.n)));
  for (int s = 0; s < M; ++s) {
    const int p = mesh.interval(s);
    for (int j = 1; j <= std::min(p, N); ++j) {
      MatrixXd acc = MatrixXd::Zero(sys.n, sys.n);
      for (int i = j; i <= std::min(p, N); ++i) acc += sys.L[i - 1][s] * table.at(j, i);
      B[s][j - 1] = std::move(acc);
    }
  }
  return B;
}

}  // namespace detail

/// Impulse-free equivalent kernel: the jumps are unfolded into extra rank
/// contributions that read the kernel's own rows at the boundary left slots.
/// The t-side activation is slot-based, so the left slot of tau_j still sees
/// the boundary term for tau_j while the right slot no longer does.
inline KernelGrid combined_kernel(const LinearSystem& sys, const PathSumTable& table) {
  const TimeMesh& mesh = *sys.mesh;
  const int M = mesh.size();
  const int N = mesh.n_switches();
  const int n = sys.n;
  auto B = detail::unfold_weights(sys, table);
  KernelGrid big = sys.K;
  for (int s = 0; s < M; ++s) {
    const int p = mesh.interval(s);
    if (p == 0) continue;
    const double ts = mesh.time(s);
    for (int t = 0; t < M; ++t) {
      if (!(mesh.time(t) <= ts)) continue;
      const int pt = mesh.interval(t);
      if (pt + 1 > std::min(p, N)) continue;
      MatrixXd add = MatrixXd::Zero(n, n);
      for (int j = pt + 1; j <= std::min(p, N); ++j)
        add += B[s][j - 1] * sys.K.block_matrix(mesh.left_slot(j), t);
      double* dst = big.block(s, t);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) dst[r * n + c] += add(r, c);
    }
  }
  return big;
}

/// Matching forcing for the combined kernel: the boundary left-limit forcing
/// folded through the same unfold weights.
inline Trajectory combined_forcing(const LinearSystem& sys, const PathSumTable& table) {
  const TimeMesh& mesh = *sys.mesh;
  const int M = mesh.size();
  const int N = mesh.n_switches();
  auto B = detail::unfold_weights(sys, table);
  Trajectory big = sys.forcing;
  for (int s = 0; s < M; ++s) {
    const int p = mesh.interval(s);
    VectorXd acc = big.at(s);
    for (int j = 1; j <= std::min(p, N); ++j)
      acc += B[s][j - 1] * sys.forcing.at(mesh.left_slot(j));
    big.set(s, acc);
  }
  return big;
}

enum class LinearMode { direct, path_boundary, resolvent };

inline const char* to_string(LinearMode m) {
  switch (m) {
    case LinearMode::direct: return "direct";
    case LinearMode::path_boundary: return "path_boundary";
    case LinearMode::resolvent: return "resolvent";
  }
  return "?";
}

struct LinearSolveResult {
  Trajectory x;
  std::vector<VectorXd> boundary;  // x(tau_i-), i = 1..N+1
  LinearMode mode = LinearMode::direct;
  int resolvent_terms = 0;
};

namespace detail {

/// Left-limit supplier for path mode: receives the 1-based switch index and
/// the partially built grid (final on every node up to that switch).
using BoundaryMaker = std::function<VectorXd(int, const Trajectory&)>;

/// March the node equations left to right. boundary_maker, when given,
/// supplies the left limits used by later impulse terms (path mode); plain
/// marching reads them off the grid.
inline LinearSolveResult march_linear(const LinearSystem& sys,
                                      const BoundaryMaker* boundary_maker) {
  const TimeMesh& mesh = *sys.mesh;
  const int M = mesh.size();
  const int n = sys.n;
  LinearSolveResult out;
  out.x = Trajectory(sys.mesh, n);
  std::vector<VectorXd> left(mesh.n_switches() + 1, VectorXd::Zero(n));

  for (int u = 0; u < M; ++u) {
    const int p = mesh.interval(u);
    VectorXd rhs = sys.forcing.at(u);
    const QuadRange r = quad_range(mesh, 0, u);
    for_quad(mesh, r, [&](int j, double w) {
      if (j == u) return;
      rhs += w * sys.K.block_matrix(u, j) * out.x.at(j);
    });
    for (int i = 1; i <= p; ++i) rhs += sys.L[i - 1][u] * left[i - 1];

    if (!r.empty && r.b == u) {
      const double wd = mesh.range_weight(u, r.a, r.b);
      const MatrixXd A = MatrixXd::Identity(n, n) - wd * sys.K.block_matrix(u, u);
      out.x.set(u, A.partialPivLu().solve(rhs));
    } else {
      out.x.set(u, rhs);
    }

    // Crossing a switching time: fix the left limit later nodes will see.
    if (mesh.node_in_interval(u) == mesh.points_per_interval() - 1 &&
        p < mesh.n_intervals() - 1) {
      const int i = p + 1;  // 1-based switch index just reached
      left[i - 1] = boundary_maker ? (*boundary_maker)(i, out.x) : out.x.at(u);
    }
  }
  out.boundary.assign(left.begin(), left.end() - 1);
  out.boundary.push_back(out.x.at(M - 1));
  return out;
}

}  // namespace detail

/// Solve the linear system by straight marching; left limits propagate from
/// the grid.
inline LinearSolveResult solve_linear_direct(const LinearSystem& sys) {
  LinearSolveResult out = detail::march_linear(sys, nullptr);
  out.mode = LinearMode::direct;
  return out;
}

/// Solve with boundary values reconstructed through the path-sum table: each
/// left limit is assembled from the forcing and kernel history at all earlier
/// boundaries, weighted by the table, instead of read off the grid.
inline LinearSolveResult solve_linear_path(const LinearSystem& sys,
                                           const PathSumTable& table) {
  const TimeMesh& mesh = *sys.mesh;
  detail::BoundaryMaker maker = [&sys, &mesh, &table](int i,
                                                      const Trajectory& xg) -> VectorXd {
    VectorXd acc = VectorXd::Zero(sys.n);
    for (int j = 1; j <= i; ++j) {
      const int lf = mesh.left_slot(j);
      VectorXd cj = sys.forcing.at(lf);
      for_quad(mesh, quad_range(mesh, 0, lf), [&](int t, double w) {
        cj += w * sys.K.block_matrix(lf, t) * xg.at(t);
      });
      acc += table.at(j, i) * cj;
    }
    return acc;
  };
  LinearSolveResult out = detail::march_linear(sys, &maker);
  out.mode = LinearMode::path_boundary;
  return out;
}

/// Solve by the impulse-free route with a precomputed resolvent of the
/// combined kernel: one pass of the solution formula.
inline LinearSolveResult solve_linear_resolvent(const LinearSystem& sys,
                                                const PathSumTable& table,
                                                const KernelGrid& R) {
  Trajectory bigF = combined_forcing(sys, table);
  LinearSolveResult out;
  out.x = apply_kernel(R, bigF);
  const TimeMesh& mesh = *sys.mesh;
  for (int i = 1; i <= mesh.n_intervals(); ++i) out.boundary.push_back(out.x.left_limit(i));
  out.mode = LinearMode::resolvent;
  return out;
}

/// Solve by the impulse-free route: combined kernel and forcing, Neumann
/// resolvent, then one pass of the solution formula.
inline LinearSolveResult solve_linear_resolvent(const LinearSystem& sys,
                                                const PathSumTable& table,
                                                double tol = 1e-12) {
  KernelGrid bigK = combined_kernel(sys, table);
  ResolventResult rr = resolvent_kernel(bigK, tol);
  LinearSolveResult out = solve_linear_resolvent(sys, table, rr.R);
  out.resolvent_terms = rr.terms;
  return out;
}

/// Dual solve y(t) = eta(t) + integral over (t, T) of eta(s) R(s, t) ds with
/// a resolvent grid R.
inline RowField dual_solve(const KernelGrid& R, const RowField& eta) {
  return apply_kernel_dual(R, eta);
}

/// Defect of the unfolded dual equation at every node: y should equal
/// eta + (y K) + impulse corridor terms built from the path table. Returns
/// the sup norm of the violation.
inline double dual_residual(const LinearSystem& sys, const PathSumTable& table,
                            const RowField& y, const RowField& eta) {
  const TimeMesh& mesh = *sys.mesh;
  const int M = mesh.size();
  const int N = mesh.n_switches();
  const int n = sys.n;

  // cum[i][u] = integral over (time(u), T) of y(s) L_{i+1}(s) ds, backward
  // per-interval trapezoid with slot continuity across switches.
  std::vector<std::vector<Eigen::RowVectorXd>> cum(
      N, std::vector<Eigen::RowVectorXd>(M, Eigen::RowVectorXd::Zero(n)));
  for (int i = 0; i < N; ++i) {
    auto integrand = [&](int u) -> Eigen::RowVectorXd {
      return y.values.row(u) * sys.L[i][u];
    };
    for (int u = M - 2; u >= 0; --u) {
      if (mesh.interval(u) == mesh.interval(u + 1)) {
        const double h2 = mesh.half_step(u);
        cum[i][u] = cum[i][u + 1] + h2 * (integrand(u) + integrand(u + 1));
      } else {
        cum[i][u] = cum[i][u + 1];  // duplicated slot, same time
      }
    }
  }

  double worst = 0.0;
  for (int t = 0; t < M; ++t) {
    Eigen::RowVectorXd rhs = eta.values.row(t);
    for_quad(mesh, quad_range(mesh, t, M - 1), [&](int s, double w) {
      rhs += w * y.values.row(s) * sys.K.block_matrix(s, t);
    });
    const int pt = mesh.interval(t);
    for (int j = pt + 1; j <= N; ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      for (int i = j; i <= N; ++i) row += cum[i - 1][t] * table.at(j, i);
      rhs += row * sys.K.block_matrix(mesh.left_slot(j), t);
    }
    worst = std::max(worst, (y.values.row(t) - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace voltra
