#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "voltra/control_policy.hpp"
#include "voltra/linear_system.hpp"
#include "voltra/problem.hpp"
#include "voltra/variational.hpp"

namespace voltra {

/// phi partial rows at the solved boundaries, index k = 1..N+1 at [k-1].
inline std::vector<RowVectorXd> phi_state_rows(const ProblemSpec& problem,
                                               const ControlPolicy& policy,
                                               const Trajectory& x) {
  const BoundaryStates xs = boundary_states(x);
  std::vector<RowVectorXd> rows;
  for (int k = 1; k <= x.mesh->n_intervals(); ++k)
    rows.push_back(problem.phi_x(k, xs, policy.a));
  return rows;
}

/// Boundary-charge weights pushed back through the jump cascade:
/// W_j = sum over k in [j, N+1] of phi_x_k * M(j, k). W_j is the sensitivity
/// of the boundary charge to anything entering the state at tau_j-.
inline std::vector<RowVectorXd> boundary_weights(const std::vector<RowVectorXd>& phi_rows,
                                                 const PathSumTable& table) {
  const int P = static_cast<int>(phi_rows.size());
  std::vector<RowVectorXd> W(P);
  for (int j = 1; j <= P; ++j) {
    RowVectorXd acc = RowVectorXd::Zero(phi_rows[0].size());
    for (int k = j; k <= P; ++k) acc += phi_rows[k - 1] * table.at(j, k);
    W[j - 1] = acc;
  }
  return W;
}

/// Running sensitivity source: the cost's direct state derivative plus the
/// boundary weights fed through the dynamics kernel toward each later
/// boundary. Row-valued on the mesh; slot position decides which boundaries
/// still count as later.
inline RowField sensitivity_source(const ProblemSpec& problem, const ControlPolicy& policy,
                                   const Trajectory& x,
                                   const std::vector<RowVectorXd>& W) {
  MeshPtr mesh_ptr = x.mesh;
  const TimeMesh& mesh = *mesh_ptr;
  const auto& tau = mesh.switch_times();
  const int P = mesh.n_intervals();
  RowField xi(mesh_ptr, problem.n);
  for (int u = 0; u < mesh.size(); ++u) {
    const double t = mesh.time(u);
    const int p = mesh.interval(u);
    const VectorXd xu = x.at(u);
    const VectorXd& au = policy.a[p];
    RowVectorXd row = problem.g_x(t, xu, au);
    for (int j = p + 1; j <= P; ++j) {
      const double s = (j <= static_cast<int>(tau.size())) ? tau[j - 1] : mesh.horizon();
      row += W[j - 1] * problem.f_x(s, t, xu, au);
    }
    xi.values.row(u) = row;
  }
  return xi;
}

/// Impulse-free kernel of the linearized dynamics, the one whose resolvent
/// drives the costate.
inline KernelGrid combined_variational_kernel(const VariationalKernels& vk) {
  LinearSystem shell;
  shell.mesh = vk.mesh;
  shell.n = vk.n;
  shell.K = vk.K;
  shell.L = vk.L;
  shell.forcing = Trajectory(vk.mesh, vk.n);
  return combined_kernel(shell, vk.table);
}

/// Costate field: psi = -(xi + integral over (t, T) of xi(s) R(s, t) ds),
/// R the resolvent of the combined linearized kernel.
inline RowField costate_field(const RowField& xi, const KernelGrid& R) {
  RowField psi = apply_kernel_dual(R, xi);
  psi.values = -psi.values;
  return psi;
}

/// Defect of the costate equation at every node: psi must solve the unfolded
/// dual equation with source -xi against the plain (not combined) kernels.
inline double costate_residual(const VariationalKernels& vk, const RowField& psi,
                               const RowField& xi) {
  LinearSystem shell;
  shell.mesh = vk.mesh;
  shell.n = vk.n;
  shell.K = vk.K;
  shell.L = vk.L;
  shell.forcing = Trajectory(vk.mesh, vk.n);
  RowField neg_xi = xi;
  neg_xi.values = -neg_xi.values;
  return dual_residual(shell, vk.table, psi, neg_xi);
}

/// Everything the gradient and the optimality checks need at one policy.
struct AdjointBundle {
  Trajectory x;
  VariationalKernels vk;
  std::vector<RowVectorXd> phi_rows;
  std::vector<RowVectorXd> W;
  RowField xi;
  RowField psi;
  KernelGrid R;  // resolvent of the combined linearized kernel
  int resolvent_terms = 0;
};

inline AdjointBundle build_adjoint(const ProblemSpec& problem, const ControlPolicy& policy,
                                   const Trajectory& x, double resolvent_tol = 1e-12) {
  AdjointBundle b{x, variational_kernels(problem, policy, x), {}, {}, {}, {}, {}, 0};
  b.phi_rows = phi_state_rows(problem, policy, x);
  b.W = boundary_weights(b.phi_rows, b.vk.table);
  b.xi = sensitivity_source(problem, policy, x, b.W);
  KernelGrid bigK = combined_variational_kernel(b.vk);
  ResolventResult rr = resolvent_kernel(bigK, resolvent_tol);
  b.resolvent_terms = rr.terms;
  b.R = std::move(rr.R);
  b.psi = costate_field(b.xi, b.R);
  return b;
}

namespace detail {

/// integral over (time(lo), T) of psi(s) * Mat(s) ds for a per-node matrix
/// field, starting at a flat node (right-sided).
template <class MatFn>
inline RowVectorXd psi_weighted_tail(const TimeMesh& mesh, const RowField& psi, int lo,
                                     const MatFn& mat, int cols) {
  RowVectorXd acc = RowVectorXd::Zero(cols);
  for_quad(mesh, quad_range(mesh, lo, mesh.size() - 1), [&](int s, double w) {
    acc += w * psi.values.row(s) * mat(s);
  });
  return acc;
}

}  // namespace detail

/// First-order decrease rates of the cost per interval: row i-1 holds the
/// 1 x m row Delta_i such that the cost change along an admissible variation
/// alpha is -sum_i Delta_i . alpha_i to first order.
inline std::vector<RowVectorXd> decrease_rates(const ProblemSpec& problem,
                                               const ControlPolicy& policy,
                                               const AdjointBundle& b) {
  const Trajectory& x = b.x;
  const TimeMesh& mesh = *x.mesh;
  const auto& tau = mesh.switch_times();
  const int N = mesh.n_switches();
  const int P = mesh.n_intervals();
  const int m = problem.m;
  const BoundaryStates xs = boundary_states(x);

  auto boundary_time = [&](int j) {
    return (j <= N) ? tau[j - 1] : mesh.horizon();
  };

  std::vector<RowVectorXd> Delta(P);
  for (int i = 1; i <= P; ++i) {
    const VectorXd& ai = policy.a[i - 1];
    RowVectorXd D = RowVectorXd::Zero(m);

    // Running-dynamics sensitivity: for t inside interval i, the tail
    // integral of psi against f_u, then integrated over the interval.
    for (int k = 0; k < mesh.points_per_interval(); ++k) {
      const int u = mesh.flat(i - 1, k);
      const double t = mesh.time(u);
      const VectorXd xu = x.at(u);
      RowVectorXd inner = detail::psi_weighted_tail(
          mesh, b.psi, u, [&](int s) { return problem.f_u(mesh.time(s), t, xu, ai); }, m);
      D += mesh.weight(u) * inner;
    }

    // Jump sensitivities: the control before the switch enters through G_a at
    // its own switch, the control after through G_b at the previous one.
    if (i <= N) {
      const VectorXd xl = xs[i - 1];
      D += detail::psi_weighted_tail(
          mesh, b.psi, mesh.right_slot(i),
          [&](int s) {
            return problem.G_a(mesh.time(s), tau[i - 1], xl, ai, policy.a[i]);
          },
          m);
    }
    if (i >= 2) {
      const VectorXd xl = xs[i - 2];
      D += detail::psi_weighted_tail(
          mesh, b.psi, mesh.right_slot(i - 1),
          [&](int s) {
            return problem.G_b(mesh.time(s), tau[i - 2], xl, policy.a[i - 2], ai);
          },
          m);
    }

    // Direct cost terms.
    D -= problem.phi_a(i, xs, policy.a);
    for (int k = 0; k < mesh.points_per_interval(); ++k) {
      const int u = mesh.flat(i - 1, k);
      D -= mesh.weight(u) * problem.g_u(mesh.time(u), x.at(u), ai);
    }

    // Boundary-weight corrections: the same control slots as above, but felt
    // through the boundary charge at each later boundary.
    for (int j = i; j <= P; ++j) {
      const double sj = boundary_time(j);
      RowVectorXd ft = RowVectorXd::Zero(m);
      for (int k = 0; k < mesh.points_per_interval(); ++k) {
        const int u = mesh.flat(i - 1, k);
        ft += mesh.weight(u) * (b.W[j - 1] * problem.f_u(sj, mesh.time(u), x.at(u), ai));
      }
      D -= ft;
      if (i >= 2)
        D -= b.W[j - 1] *
             problem.G_b(sj, tau[i - 2], xs[i - 2], policy.a[i - 2], ai);
    }
    if (i <= N)
      for (int j = i + 1; j <= P; ++j)
        D -= b.W[j - 1] *
             problem.G_a(boundary_time(j), tau[i - 1], xs[i - 1], ai, policy.a[i]);

    Delta[i - 1] = D;
  }
  return Delta;
}

/// First-order cost change along a variation, adjoint route.
inline double delta_J_adjoint(const std::vector<RowVectorXd>& Delta,
                              const ControlVariation& alpha) {
  double dJ = 0.0;
  for (std::size_t i = 0; i < Delta.size(); ++i) dJ -= Delta[i].dot(alpha.alpha[i]);
  return dJ;
}

/// One component's stationarity classification.
struct StationarityEntry {
  int interval = 0;   // 1-based control index
  int component = 0;  // 0-based within the control vector
  enum class Position { interior, at_lower, at_upper } position = Position::interior;
  double delta = 0.0;      // decrease rate component
  double violation = 0.0;  // how far it breaks the first-order condition
};

struct StationarityReport {
  bool stationary = false;
  double worst = 0.0;
  std::vector<StationarityEntry> entries;
};

/// First-order optimality against a box: interior components need a vanishing
/// decrease rate; components pinned at a face only forbid improvement by
/// moving inward. The cost gradient is -Delta, so at the lower face
/// stationarity means Delta <= tol, at the upper face Delta >= -tol.
inline StationarityReport check_stationarity(const std::vector<RowVectorXd>& Delta,
                                             const ControlPolicy& policy,
                                             const ControlBox& box, double tol,
                                             double face_tol = 1e-9) {
  StationarityReport rep;
  for (int i = 1; i <= policy.n_intervals(); ++i) {
    for (int c = 0; c < box.dim(); ++c) {
      StationarityEntry e;
      e.interval = i;
      e.component = c;
      e.delta = Delta[i - 1][c];
      const double a = policy.a[i - 1][c];
      const bool lo = a <= box.lo[c] + face_tol;
      const bool hi = a >= box.hi[c] - face_tol;
      if (lo && !hi) {
        e.position = StationarityEntry::Position::at_lower;
        e.violation = std::max(0.0, e.delta);
      } else if (hi && !lo) {
        e.position = StationarityEntry::Position::at_upper;
        e.violation = std::max(0.0, -e.delta);
      } else if (lo && hi) {
        e.position = StationarityEntry::Position::at_lower;
        e.violation = 0.0;  // pinned by a degenerate box
      } else {
        e.violation = std::abs(e.delta);
      }
      rep.worst = std::max(rep.worst, e.violation);
      rep.entries.push_back(e);
    }
  }
  rep.stationary = rep.worst <= tol;
  return rep;
}

/// Pointwise Hamiltonian with frozen sensitivity coefficients. The state and
/// control slots are free arguments; everything else (psi, boundary weights,
/// jump cascade) is taken from the bundle.
inline double hamiltonian(const ProblemSpec& problem, const ControlPolicy& policy,
                          const AdjointBundle& b, int u, const VectorXd& x_val,
                          const VectorXd& u_val) {
  const TimeMesh& mesh = *b.x.mesh;
  const auto& tau = mesh.switch_times();
  const int N = mesh.n_switches();
  const int P = mesh.n_intervals();
  const double t = mesh.time(u);
  const int p = mesh.interval(u);

  double H = -problem.g(t, x_val, u_val);
  for (int j = p + 1; j <= P; ++j) {
    const double sj = (j <= N) ? tau[j - 1] : mesh.horizon();
    H -= b.W[j - 1].dot(problem.f(sj, t, x_val, u_val));
  }
  RowVectorXd tail = detail::psi_weighted_tail(
      mesh, b.psi, u, [&](int s) -> MatrixXd {
        return problem.f(mesh.time(s), t, x_val, u_val);
      },
      1);
  H += tail[0];

  // Jump-cascade correction: sensitivities of later boundaries to the state
  // kernel at each still-ahead switching time.
  for (int j = p + 1; j <= N; ++j) {
    RowVectorXd row = RowVectorXd::Zero(problem.n);
    for (int i = j; i <= N; ++i) {
      RowVectorXd Ei = detail::psi_weighted_tail(
          mesh, b.psi, mesh.right_slot(i),
          [&](int s) {
            return problem.G_x(mesh.time(s), tau[i - 1], b.x.left_limit(i),
                               policy.a[i - 1], policy.a[i]);
          },
          problem.n);
      row += Ei * b.vk.table.at(j, i);
    }
    H += row.dot(problem.f(tau[j - 1], t, x_val, u_val));
  }
  return H;
}

/// Independent check of the costate: the state gradient of the Hamiltonian,
/// taken by central differences in the state slot, must reproduce psi along
/// the trajectory. Returns the largest mismatch over the sampled nodes.
inline double hamiltonian_gradient_residual(const ProblemSpec& problem,
                                            const ControlPolicy& policy,
                                            const AdjointBundle& b, int stride = 1,
                                            double step = 1e-6) {
  const TimeMesh& mesh = *b.x.mesh;
  double worst = 0.0;
  for (int u = 0; u < mesh.size(); u += stride) {
    const VectorXd& u_val = policy.a[mesh.interval(u)];
    VectorXd x_val = b.x.at(u);
    for (int c = 0; c < problem.n; ++c) {
      const double keep = x_val[c];
      x_val[c] = keep + step;
      const double hi = hamiltonian(problem, policy, b, u, x_val, u_val);
      x_val[c] = keep - step;
      const double lo = hamiltonian(problem, policy, b, u, x_val, u_val);
      x_val[c] = keep;
      const double grad = (hi - lo) / (2 * step);
      worst = std::max(worst, std::abs(grad - b.psi.values(u, c)));
    }
  }
  return worst;
}

}  // namespace voltra
