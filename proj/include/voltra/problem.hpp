#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "voltra/control_policy.hpp"
#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"

namespace voltra {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

using BoundaryStates = std::vector<VectorXd>;  // x(tau_i-) for i = 1..N+1
using Controls = std::vector<VectorXd>;        // a_i for i = 1..N+1

/// A controlled Volterra problem with jumps at fixed switching times.
///
/// State dynamics: x(s) = h(s) + integral over [0, s] of f(s, t, x(t), u(t))
/// plus, for every switching time tau_i < s, a jump term
/// G(s, tau_i, x(tau_i-), u(tau_i-), u(tau_i+)). Controls are piecewise
/// constant between switching times. The cost is the integral of
/// g(t, x(t), u(t)) plus a terminal-and-jump charge phi on the left limits
/// at the boundaries and the control values.
///
/// All partial derivatives are supplied by the problem; validate_derivatives
/// probes them against finite differences.
struct ProblemSpec {
  int n = 1;  // state dimension
  int m = 1;  // control dimension

  std::function<VectorXd(double)> h;
  std::function<VectorXd(double, double, const VectorXd&, const VectorXd&)> f;
  // G(s, tau, x(tau-), a_before, a_after)
  std::function<VectorXd(double, double, const VectorXd&, const VectorXd&, const VectorXd&)> G;
  std::function<double(double, const VectorXd&, const VectorXd&)> g;
  std::function<double(const BoundaryStates&, const Controls&)> phi;

  std::function<MatrixXd(double, double, const VectorXd&, const VectorXd&)> f_x;  // n x n
  std::function<MatrixXd(double, double, const VectorXd&, const VectorXd&)> f_u;  // n x m
  std::function<MatrixXd(double, double, const VectorXd&, const VectorXd&, const VectorXd&)> G_x;
  std::function<MatrixXd(double, double, const VectorXd&, const VectorXd&, const VectorXd&)> G_a;
  std::function<MatrixXd(double, double, const VectorXd&, const VectorXd&, const VectorXd&)> G_b;
  std::function<RowVectorXd(double, const VectorXd&, const VectorXd&)> g_x;  // 1 x n
  std::function<RowVectorXd(double, const VectorXd&, const VectorXd&)> g_u;  // 1 x m
  // Derivative of phi with respect to the i-th boundary state / control,
  // 1-based i in 1..N+1.
  std::function<RowVectorXd(int, const BoundaryStates&, const Controls&)> phi_x;
  std::function<RowVectorXd(int, const BoundaryStates&, const Controls&)> phi_a;

  // Lipschitz bounds feeding the contraction certificate.
  double C_f = 0.0;
  double C_G = 0.0;

  /// Fully zero problem of the given dimensions; builders overwrite the
  /// pieces they need and inherit zero for the rest.
  static ProblemSpec zeros(int n, int m) {
    ProblemSpec ps;
    ps.n = n;
    ps.m = m;
    ps.h = [n](double) { return VectorXd::Zero(n).eval(); };
    ps.f = [n](double, double, const VectorXd&, const VectorXd&) {
      return VectorXd::Zero(n).eval();
    };
    ps.G = [n](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
      return VectorXd::Zero(n).eval();
    };
    ps.g = [](double, const VectorXd&, const VectorXd&) { return 0.0; };
    ps.phi = [](const BoundaryStates&, const Controls&) { return 0.0; };
    ps.f_x = [n](double, double, const VectorXd&, const VectorXd&) {
      return MatrixXd::Zero(n, n).eval();
    };
    ps.f_u = [n, m](double, double, const VectorXd&, const VectorXd&) {
      return MatrixXd::Zero(n, m).eval();
    };
    ps.G_x = [n](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
      return MatrixXd::Zero(n, n).eval();
    };
    ps.G_a = [n, m](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
      return MatrixXd::Zero(n, m).eval();
    };
    ps.G_b = [n, m](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
      return MatrixXd::Zero(n, m).eval();
    };
    ps.g_x = [n](double, const VectorXd&, const VectorXd&) {
      return RowVectorXd::Zero(n).eval();
    };
    ps.g_u = [m](double, const VectorXd&, const VectorXd&) {
      return RowVectorXd::Zero(m).eval();
    };
    ps.phi_x = [n](int, const BoundaryStates&, const Controls&) {
      return RowVectorXd::Zero(n).eval();
    };
    ps.phi_a = [m](int, const BoundaryStates&, const Controls&) {
      return RowVectorXd::Zero(m).eval();
    };
    return ps;
  }
};

/// Left limits x(tau_i-), i = 1..N+1, read off a solved trajectory.
inline BoundaryStates boundary_states(const Trajectory& x) {
  BoundaryStates xs;
  const int P = x.mesh->n_intervals();
  xs.reserve(P);
  for (int i = 1; i <= P; ++i) xs.push_back(x.left_limit(i));
  return xs;
}

/// Total cost of a policy along a solved trajectory: per-interval trapezoid
/// of the running cost plus the boundary charge.
inline double eval_cost(const ProblemSpec& problem, const ControlPolicy& policy,
                        const Trajectory& x) {
  const TimeMesh& mesh = *x.mesh;
  double J = 0.0;
  for (int u = 0; u < mesh.size(); ++u)
    J += mesh.weight(u) * problem.g(mesh.time(u), x.at(u), policy.a[mesh.interval(u)]);
  return J + problem.phi(boundary_states(x), policy.a);
}

/// Worst relative finite-difference error found for each supplied partial.
struct DerivativeReport {
  double f_x = 0, f_u = 0, G_x = 0, G_a = 0, G_b = 0;
  double g_x = 0, g_u = 0, phi_x = 0, phi_a = 0;

  double worst() const {
    double w = f_x;
    for (double v : {f_u, G_x, G_a, G_b, g_x, g_u, phi_x, phi_a}) w = std::max(w, v);
    return w;
  }
  bool pass(double tol) const { return worst() <= tol; }
};

namespace detail {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

template <class Eval>
inline double fd_column_err(const Eval& eval, const MatrixXd& jac, VectorXd& arg,
                            double step) {
  double worst = 0.0;
  for (int c = 0; c < arg.size(); ++c) {
    const double keep = arg[c];
    arg[c] = keep + step;
    const VectorXd hi = eval();
    arg[c] = keep - step;
    const VectorXd lo = eval();
    arg[c] = keep;
    for (int r = 0; r < jac.rows(); ++r)
      worst = std::max(worst, rel_err((hi[r] - lo[r]) / (2 * step), jac(r, c)));
  }
  return worst;
}

template <class Eval>
inline double fd_row_err(const Eval& eval, const RowVectorXd& grad, VectorXd& arg,
                         double step) {
  double worst = 0.0;
  for (int c = 0; c < arg.size(); ++c) {
    const double keep = arg[c];
    arg[c] = keep + step;
    const double hi = eval();
    arg[c] = keep - step;
    const double lo = eval();
    arg[c] = keep;
    worst = std::max(worst, rel_err((hi - lo) / (2 * step), grad[c]));
  }
  return worst;
}

}  // namespace detail

/// Probe every supplied partial derivative against central differences at
/// random interior points. Intended as a cheap self-check before trusting
/// gradients built from the analytic partials.
inline DerivativeReport validate_derivatives(const ProblemSpec& problem, double T,
                                             const std::vector<double>& tau,
                                             const ControlBox& box, int probes = 8,
                                             double step = 1e-6, unsigned seed = 1234) {
  DerivativeReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const int n = problem.n;
  const int N1 = static_cast<int>(tau.size()) + 1;

  auto rand_x = [&] {
    VectorXd x(n);
    for (int c = 0; c < n; ++c) x[c] = 0.4 + 0.8 * sym(rng);
    return x;
  };
  auto rand_a = [&] {
    VectorXd a(box.dim());
    for (int c = 0; c < box.dim(); ++c)
      a[c] = box.lo[c] + (box.hi[c] - box.lo[c]) * unit(rng);
    return a;
  };

  for (int probe = 0; probe < probes; ++probe) {
    const double t = 0.05 * T + 0.9 * T * unit(rng);
    const double s = t + (T - t) * unit(rng);
    const double tj = tau.empty() ? 0.5 * T : tau[probe % tau.size()];
    VectorXd x = rand_x(), a = rand_a(), b = rand_a();

    rep.f_x = std::max(rep.f_x, detail::fd_column_err(
        [&] { return problem.f(s, t, x, a); }, problem.f_x(s, t, x, a), x, step));
    rep.f_u = std::max(rep.f_u, detail::fd_column_err(
        [&] { return problem.f(s, t, x, a); }, problem.f_u(s, t, x, a), a, step));
    rep.G_x = std::max(rep.G_x, detail::fd_column_err(
        [&] { return problem.G(s, tj, x, a, b); }, problem.G_x(s, tj, x, a, b), x, step));
    rep.G_a = std::max(rep.G_a, detail::fd_column_err(
        [&] { return problem.G(s, tj, x, a, b); }, problem.G_a(s, tj, x, a, b), a, step));
    rep.G_b = std::max(rep.G_b, detail::fd_column_err(
        [&] { return problem.G(s, tj, x, a, b); }, problem.G_b(s, tj, x, a, b), b, step));
    rep.g_x = std::max(rep.g_x, detail::fd_row_err(
        [&] { return problem.g(t, x, a); }, problem.g_x(t, x, a), x, step));
    rep.g_u = std::max(rep.g_u, detail::fd_row_err(
        [&] { return problem.g(t, x, a); }, problem.g_u(t, x, a), a, step));

    BoundaryStates xs;
    Controls as;
    for (int i = 0; i < N1; ++i) {
      xs.push_back(rand_x());
      as.push_back(rand_a());
    }
    for (int i = 1; i <= N1; ++i) {
      rep.phi_x = std::max(rep.phi_x, detail::fd_row_err(
          [&] { return problem.phi(xs, as); }, problem.phi_x(i, xs, as), xs[i - 1], step));
      rep.phi_a = std::max(rep.phi_a, detail::fd_row_err(
          [&] { return problem.phi(xs, as); }, problem.phi_a(i, xs, as), as[i - 1], step));
    }
  }
  return rep;
}

}  // namespace voltra
