#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltra/control_policy.hpp"
#include "voltra/problem.hpp"
#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"

namespace voltra {

struct SolverConfig {
  double tol = 1e-10;       // outer tolerance; inner node solves use tol / 10
  int max_inner = 50;       // fixed-point iterations per implicit node
  int max_picard = 200;     // iteration cap for the whole-path fixed point
};

namespace detail {

/// Jump increment applied at switching time i (1-based) given the left limit
/// there: G(s, tau_i, x(tau_i-), a_i, a_{i+1}).
inline VectorXd jump_term(const ProblemSpec& problem, const ControlPolicy& policy,
                          const TimeMesh& mesh, double s, int i, const VectorXd& x_left) {
  return problem.G(s, mesh.switch_times()[i - 1], x_left, policy.a[i - 1], policy.a[i]);
}

}  // namespace detail

/// Interval-marching solution of the impulsive Volterra equation.
///
/// Intervals are processed left to right. Within an interval the first node
/// is explicit (its integral ends at the previous interval) and every later
/// node has one implicit diagonal sample, resolved by a damped fixed point.
/// Jump contributions from earlier switching times enter through the stored
/// left limits, so the duplicated slots carry the genuine one-sided values.
inline Trajectory solve_marching(const ProblemSpec& problem, const ControlPolicy& policy,
                                 MeshPtr mesh_ptr, const SolverConfig& cfg = {}) {
  const TimeMesh& mesh = *mesh_ptr;
  if (policy.n_intervals() != mesh.n_intervals())
    throw std::invalid_argument("marching: policy interval count does not match the mesh");
  Trajectory x(mesh_ptr, problem.n);
  const double inner_tol = cfg.tol / 10.0;

  for (int u = 0; u < mesh.size(); ++u) {
    const int p = mesh.interval(u);
    const double s = mesh.time(u);

    // History integral plus the jumps already crossed. The quadrature range
    // [0, s] excludes the diagonal node itself (handled implicitly below).
    VectorXd rhs = problem.h(s);
    const QuadRange r = quad_range(mesh, 0, u);
    for_quad(mesh, r, [&](int j, double w) {
      if (j == u) return;
      rhs += w * problem.f(s, mesh.time(j), x.at(j), policy.a[mesh.interval(j)]);
    });
    for (int i = 1; i <= p; ++i)
      rhs += detail::jump_term(problem, policy, mesh, s, i, x.left_limit(i));

    if (r.empty || r.b != u) {
      // Explicit node: diagonal sample not part of the range.
      x.set(u, rhs);
      continue;
    }

    // Implicit node: x = rhs + w_d * f(s, s, x, a_p).
    const double wd = mesh.range_weight(u, r.a, r.b);
    VectorXd cur = (mesh.node_in_interval(u) > 0) ? x.at(u - 1) : rhs;
    bool done = false;
    for (int it = 0; it < cfg.max_inner; ++it) {
      VectorXd next = rhs + wd * problem.f(s, s, cur, policy.a[p]);
      const double move = (next - cur).cwiseAbs().maxCoeff();
      cur = next;
      if (move <= inner_tol) {
        done = true;
        break;
      }
    }
    if (!done)
      throw std::runtime_error("marching: node " + std::to_string(u) +
                               " fixed point stalled (time " + std::to_string(s) + ")");
    x.set(u, cur);
  }
  return x;
}

/// The pair a whole-path fixed point acts on: a grid path and the jump-base
/// values at the switching times.
struct OperatorPair {
  Trajectory xi;               // candidate path on the mesh
  std::vector<VectorXd> eta;   // candidate left limits at tau_i, i = 1..N

  double sup_distance(const OperatorPair& o) const {
    double d = xi.sup_distance(o.xi);
    for (std::size_t i = 0; i < eta.size(); ++i)
      d = std::max(d, (eta[i] - o.eta[i]).cwiseAbs().maxCoeff());
    return d;
  }
};

/// Natural starting point: the forcing path and its switch values.
inline OperatorPair initial_pair(const ProblemSpec& problem, MeshPtr mesh_ptr) {
  const TimeMesh& mesh = *mesh_ptr;
  OperatorPair z;
  z.xi = Trajectory(mesh_ptr, problem.n);
  for (int u = 0; u < mesh.size(); ++u) z.xi.set(u, problem.h(mesh.time(u)));
  for (int i = 1; i <= mesh.n_switches(); ++i)
    z.eta.push_back(problem.h(mesh.switch_times()[i - 1]));
  return z;
}

/// One sweep of the solution operator: evaluate the right-hand side of the
/// equation at every node using the incoming pair, jumps fed by the incoming
/// eta. The outgoing eta re-reads the new path at the left slots, which by
/// construction reproduces the dedicated boundary evaluation exactly.
inline OperatorPair apply_operator(const ProblemSpec& problem, const ControlPolicy& policy,
                                   const OperatorPair& z) {
  MeshPtr mesh_ptr = z.xi.mesh;
  const TimeMesh& mesh = *mesh_ptr;
  OperatorPair out;
  out.xi = Trajectory(mesh_ptr, problem.n);

  for (int u = 0; u < mesh.size(); ++u) {
    const int p = mesh.interval(u);
    const double s = mesh.time(u);
    VectorXd val = problem.h(s);
    for_quad(mesh, quad_range(mesh, 0, u), [&](int j, double w) {
      val += w * problem.f(s, mesh.time(j), z.xi.at(j), policy.a[mesh.interval(j)]);
    });
    for (int i = 1; i <= p; ++i)
      val += detail::jump_term(problem, policy, mesh, s, i, z.eta[i - 1]);
    out.xi.set(u, val);
  }
  for (int i = 1; i <= mesh.n_switches(); ++i) out.eta.push_back(out.xi.left_limit(i));
  return out;
}

struct PicardResult {
  Trajectory x;
  int iterations = 0;
  bool converged = false;
  double final_step = 0.0;
  std::vector<double> step_norms;
};

/// Whole-path successive substitution, the constructive counterpart of the
/// marching solver. Stops when consecutive pairs agree to cfg.tol in the sup
/// norm over both components.
inline PicardResult solve_picard(const ProblemSpec& problem, const ControlPolicy& policy,
                                 MeshPtr mesh_ptr, const SolverConfig& cfg = {}) {
  if (policy.n_intervals() != mesh_ptr->n_intervals())
    throw std::invalid_argument("picard: policy interval count does not match the mesh");
  OperatorPair z = initial_pair(problem, mesh_ptr);
  PicardResult res;
  for (int it = 1; it <= cfg.max_picard; ++it) {
    OperatorPair next = apply_operator(problem, policy, z);
    const double step = next.sup_distance(z);
    res.step_norms.push_back(step);
    z = std::move(next);
    res.iterations = it;
    res.final_step = step;
    if (step <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.x = z.xi;
  return res;
}

/// Weighted-norm contraction certificate for the solution operator.
///
/// The 2 x 2 matrix bounds how the operator moves the path component and the
/// switch-value component against each other under the weight exp(-mu t).
/// Its spectral radius is below one iff |trace| - 1 < det < 1.
struct ContractionCertificate {
  double mu = 0.0;
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
  double min_gap = 0.0;
  bool spectral_ok = false;

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a21; }
};

inline ContractionCertificate contraction_certificate(double C_f, double C_G, double T,
                                                      const std::vector<double>& tau,
                                                      double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("certificate: weight rate must be positive");
  if (C_f < 0.0 || C_G < 0.0)
    throw std::invalid_argument("certificate: Lipschitz bounds must be nonnegative");
  // Validates ordering constraints as a side effect.
  const TimeMesh probe(T, tau, 2);
  const int N = static_cast<int>(tau.size());
  const double h = probe.min_gap();

  ContractionCertificate c;
  c.mu = mu;
  c.min_gap = h;
  c.a11 = C_f * (1.0 - std::exp(-mu * T)) / mu;
  if (N >= 1) {
    c.a21 = C_f * (1.0 - std::exp(-mu * tau[N - 1])) / mu;
    const double geo = std::exp(-mu * h) * (1.0 - std::exp(-mu * (N - 1) * h)) /
                       (1.0 - std::exp(-mu * h));
    c.a22 = C_G * geo;
    c.a12 = C_G * (1.0 + geo);
  }
  const double tr = c.trace(), det = c.det();
  c.spectral_ok = (std::abs(tr) - 1.0 < det) && (det < 1.0);
  return c;
}

/// Smallest power-of-two weight rate that certifies contraction, if any.
inline std::optional<ContractionCertificate> find_contractive_rate(
    double C_f, double C_G, double T, const std::vector<double>& tau,
    double mu_max = 1e6) {
  for (double mu = 1.0; mu <= mu_max; mu *= 2.0) {
    ContractionCertificate c = contraction_certificate(C_f, C_G, T, tau, mu);
    if (c.spectral_ok) return c;
  }
  return std::nullopt;
}

/// Largest violation of the original equation by a trajectory, evaluated on
/// the grid with the same quadrature the solvers use. The jump terms read the
/// trajectory's own left limits.
inline double equation_residual(const ProblemSpec& problem, const ControlPolicy& policy,
                                const Trajectory& x) {
  const TimeMesh& mesh = *x.mesh;
  double worst = 0.0;
  for (int u = 0; u < mesh.size(); ++u) {
    const int p = mesh.interval(u);
    const double s = mesh.time(u);
    VectorXd val = problem.h(s);
    for_quad(mesh, quad_range(mesh, 0, u), [&](int j, double w) {
      val += w * problem.f(s, mesh.time(j), x.at(j), policy.a[mesh.interval(j)]);
    });
    for (int i = 1; i <= p; ++i)
      val += detail::jump_term(problem, policy, mesh, s, i, x.left_limit(i));
    worst = std::max(worst, (val - x.at(u)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace voltra
