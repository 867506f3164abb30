#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "voltra/control_policy.hpp"
#include "voltra/linear_system.hpp"
#include "voltra/problem.hpp"
#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"

namespace voltra {

/// Linearization data of the dynamics along a solved trajectory: the state
/// kernel K(s, t) = f_x(s, t, x(t), u(t)), the impulse factors
/// L_i(s) = G_x(s, tau_i, x(tau_i-), a_i, a_{i+1}), and the path-sum table of
/// the boundary-to-boundary factors.
struct VariationalKernels {
  MeshPtr mesh;
  int n = 1;
  KernelGrid K;
  std::vector<std::vector<MatrixXd>> L;  // [impulse][flat node]
  PathSumTable table;
};

inline VariationalKernels variational_kernels(const ProblemSpec& problem,
                                              const ControlPolicy& policy,
                                              const Trajectory& x) {
  MeshPtr mesh_ptr = x.mesh;
  const TimeMesh& mesh = *mesh_ptr;
  const int n = problem.n;
  const auto& tau = mesh.switch_times();

  KernelGrid K = sample_kernel(mesh_ptr, n, [&](int s, int t) {
    return problem.f_x(mesh.time(s), mesh.time(t), x.at(t), policy.a[mesh.interval(t)]);
  });

  const int N = mesh.n_switches();
  std::vector<std::vector<MatrixXd>> L(
      N, std::vector<MatrixXd>(mesh.size(), MatrixXd::Zero(n, n)));
  for (int i = 0; i < N; ++i) {
    const VectorXd xl = x.left_limit(i + 1);
    for (int s = 0; s < mesh.size(); ++s)
      if (mesh.interval(s) >= i + 1)
        L[i][s] = problem.G_x(mesh.time(s), tau[i], xl, policy.a[i], policy.a[i + 1]);
  }

  ChainFactor factor = [&problem, &policy, &x, &tau, &mesh](int to, int from) -> MatrixXd {
    const double s = (to <= static_cast<int>(tau.size())) ? tau[to - 1] : mesh.horizon();
    return problem.G_x(s, tau[from - 1], x.left_limit(from), policy.a[from - 1],
                       policy.a[from]);
  };
  PathSumTable table(factor, mesh.n_intervals(), n);

  return VariationalKernels{mesh_ptr, n, std::move(K), std::move(L), std::move(table)};
}

/// Assemble the linear system satisfied by the first-order state response to
/// a control variation: kernel and impulse factors from the linearization,
/// forcing from the control partials integrated against the variation.
inline LinearSystem variational_system(const ProblemSpec& problem,
                                       const ControlPolicy& policy, const Trajectory& x,
                                       const VariationalKernels& vk,
                                       const ControlVariation& alpha) {
  MeshPtr mesh_ptr = x.mesh;
  const TimeMesh& mesh = *mesh_ptr;
  const auto& tau = mesh.switch_times();

  LinearSystem sys;
  sys.mesh = mesh_ptr;
  sys.n = problem.n;
  sys.K = vk.K;
  sys.L = vk.L;
  sys.forcing = Trajectory(mesh_ptr, problem.n);

  for (int u = 0; u < mesh.size(); ++u) {
    const double s = mesh.time(u);
    VectorXd val = VectorXd::Zero(problem.n);
    for_quad(mesh, quad_range(mesh, 0, u), [&](int j, double w) {
      const int q = mesh.interval(j);
      val += w * problem.f_u(s, mesh.time(j), x.at(j), policy.a[q]) * alpha.alpha[q];
    });
    const int p = mesh.interval(u);
    for (int i = 1; i <= p; ++i) {
      const VectorXd xl = x.left_limit(i);
      val += problem.G_a(s, tau[i - 1], xl, policy.a[i - 1], policy.a[i]) *
                 alpha.alpha[i - 1] +
             problem.G_b(s, tau[i - 1], xl, policy.a[i - 1], policy.a[i]) * alpha.alpha[i];
    }
    sys.forcing.set(u, val);
  }
  return sys;
}

/// Affine tangent model of the problem anchored at a solved trajectory:
/// kernels are the linearization, the forcing absorbs the zeroth-order
/// remainders, so the tangent solution reproduces the trajectory itself for
/// problems affine in the state (and matches it to solver tolerance
/// otherwise). This is the linear system the mode-equivalence and duality
/// checks run on.
inline LinearSystem tangent_linear_system(const ProblemSpec& problem,
                                          const ControlPolicy& policy, const Trajectory& x,
                                          const VariationalKernels& vk) {
  MeshPtr mesh_ptr = x.mesh;
  const TimeMesh& mesh = *mesh_ptr;
  const auto& tau = mesh.switch_times();
  LinearSystem sys;
  sys.mesh = mesh_ptr;
  sys.n = problem.n;
  sys.K = vk.K;
  sys.L = vk.L;
  sys.forcing = Trajectory(mesh_ptr, problem.n);
  for (int u = 0; u < mesh.size(); ++u) {
    const double s = mesh.time(u);
    VectorXd val = problem.h(s);
    for_quad(mesh, quad_range(mesh, 0, u), [&](int j, double w) {
      const int q = mesh.interval(j);
      val += w * (problem.f(s, mesh.time(j), x.at(j), policy.a[q]) -
                  problem.f_x(s, mesh.time(j), x.at(j), policy.a[q]) * x.at(j));
    });
    const int p = mesh.interval(u);
    for (int i = 1; i <= p; ++i) {
      const VectorXd xl = x.left_limit(i);
      val += problem.G(s, tau[i - 1], xl, policy.a[i - 1], policy.a[i]) -
             problem.G_x(s, tau[i - 1], xl, policy.a[i - 1], policy.a[i]) * xl;
    }
    sys.forcing.set(u, val);
  }
  return sys;
}

/// First-order state response to the variation, by the requested route.
inline LinearSolveResult delta_x(const ProblemSpec& problem, const ControlPolicy& policy,
                                 const Trajectory& x, const VariationalKernels& vk,
                                 const ControlVariation& alpha, LinearMode mode,
                                 double resolvent_tol = 1e-12) {
  LinearSystem sys = variational_system(problem, policy, x, vk, alpha);
  switch (mode) {
    case LinearMode::direct: return solve_linear_direct(sys);
    case LinearMode::path_boundary: return solve_linear_path(sys, vk.table);
    case LinearMode::resolvent: return solve_linear_resolvent(sys, vk.table, resolvent_tol);
  }
  throw std::invalid_argument("delta_x: unknown mode");
}

/// Boundary responses assembled purely from the path-sum table, bypassing the
/// grid propagation: each left limit is the table-weighted sum of the
/// per-boundary forcing plus kernel history.
inline std::vector<VectorXd> delta_boundary_path(const LinearSystem& sys,
                                                 const PathSumTable& table,
                                                 const Trajectory& dx) {
  const TimeMesh& mesh = *sys.mesh;
  std::vector<VectorXd> out;
  for (int i = 1; i <= mesh.n_intervals(); ++i) {
    VectorXd acc = VectorXd::Zero(sys.n);
    for (int j = 1; j <= i; ++j) {
      const int lf = mesh.left_slot(j);
      VectorXd cj = sys.forcing.at(lf);
      for_quad(mesh, quad_range(mesh, 0, lf), [&](int t, double w) {
        cj += w * sys.K.block_matrix(lf, t) * dx.at(t);
      });
      acc += table.at(j, i) * cj;
    }
    out.push_back(acc);
  }
  return out;
}

/// First-order cost change along a variation, from the state response: the
/// running-cost terms integrate g_x delta_x + g_u alpha, the boundary charge
/// differentiates into its state and control slots.
inline double delta_J_direct(const ProblemSpec& problem, const ControlPolicy& policy,
                             const Trajectory& x, const ControlVariation& alpha,
                             const LinearSolveResult& dx) {
  const TimeMesh& mesh = *x.mesh;
  double dJ = 0.0;
  for (int u = 0; u < mesh.size(); ++u) {
    const double t = mesh.time(u);
    const int p = mesh.interval(u);
    dJ += mesh.weight(u) * (problem.g_x(t, x.at(u), policy.a[p]).dot(dx.x.at(u)) +
                            problem.g_u(t, x.at(u), policy.a[p]).dot(alpha.alpha[p]));
  }
  const BoundaryStates xs = boundary_states(x);
  for (int i = 1; i <= mesh.n_intervals(); ++i) {
    dJ += problem.phi_x(i, xs, policy.a).dot(dx.boundary[i - 1]);
    dJ += problem.phi_a(i, xs, policy.a).dot(alpha.alpha[i - 1]);
  }
  return dJ;
}

}  // namespace voltra
