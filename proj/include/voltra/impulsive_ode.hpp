#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "voltra/adjoint.hpp"
#include "voltra/problem.hpp"

namespace voltra {

/// An impulsive ODE control problem: classical dynamics between switching
/// times, state resets at the switches, running plus per-switch plus terminal
/// cost. A special case of the integral formulation (the kernel forgets its
/// first argument), with its own costate machinery.
struct OdeProblemSpec {
  int n = 1, m = 1;
  VectorXd x0;

  std::function<VectorXd(double, const VectorXd&, const VectorXd&)> f;  // f(t, x, a)
  // G(tau, x(tau-), a_before, a_after)
  std::function<VectorXd(double, const VectorXd&, const VectorXd&, const VectorXd&)> G;
  std::function<double(double, const VectorXd&, const VectorXd&)> g;
  // Per-switch charge Phi(x(tau_i-), a_i, a_{i+1}) and terminal charge g0.
  std::function<double(const VectorXd&, const VectorXd&, const VectorXd&)> Phi;
  std::function<double(const VectorXd&)> g0;

  std::function<MatrixXd(double, const VectorXd&, const VectorXd&)> f_x;
  std::function<MatrixXd(double, const VectorXd&, const VectorXd&)> f_u;
  std::function<MatrixXd(double, const VectorXd&, const VectorXd&, const VectorXd&)> G_x;
  std::function<MatrixXd(double, const VectorXd&, const VectorXd&, const VectorXd&)> G_a;
  std::function<MatrixXd(double, const VectorXd&, const VectorXd&, const VectorXd&)> G_b;
  std::function<RowVectorXd(double, const VectorXd&, const VectorXd&)> g_x;
  std::function<RowVectorXd(double, const VectorXd&, const VectorXd&)> g_u;
  std::function<RowVectorXd(const VectorXd&, const VectorXd&, const VectorXd&)> Phi_x;
  std::function<RowVectorXd(const VectorXd&, const VectorXd&, const VectorXd&)> Phi_a;
  std::function<RowVectorXd(const VectorXd&, const VectorXd&, const VectorXd&)> Phi_b;
  std::function<RowVectorXd(const VectorXd&)> g0_x;

  double C_f = 0.0;
  double C_G = 0.0;
};

/// Embed the ODE problem into the integral formulation: the forcing is the
/// initial state, the kernel drops its slow argument, the boundary charge
/// splits into per-switch charges plus the terminal one.
inline ProblemSpec lift_ode(const OdeProblemSpec& ode) {
  ProblemSpec ps = ProblemSpec::zeros(ode.n, ode.m);
  ps.n = ode.n;
  ps.m = ode.m;
  ps.C_f = ode.C_f;
  ps.C_G = ode.C_G;
  const VectorXd x0 = ode.x0;
  ps.h = [x0](double) { return x0; };
  ps.f = [ode](double, double t, const VectorXd& x, const VectorXd& a) {
    return ode.f(t, x, a);
  };
  ps.G = [ode](double, double tau, const VectorXd& x, const VectorXd& a,
               const VectorXd& b) { return ode.G(tau, x, a, b); };
  ps.g = ode.g;
  ps.phi = [ode](const BoundaryStates& xs, const Controls& as) {
    const int N = static_cast<int>(xs.size()) - 1;
    double v = ode.g0(xs[N]);
    for (int i = 1; i <= N; ++i) v += ode.Phi(xs[i - 1], as[i - 1], as[i]);
    return v;
  };
  ps.f_x = [ode](double, double t, const VectorXd& x, const VectorXd& a) {
    return ode.f_x(t, x, a);
  };
  ps.f_u = [ode](double, double t, const VectorXd& x, const VectorXd& a) {
    return ode.f_u(t, x, a);
  };
  ps.G_x = [ode](double, double tau, const VectorXd& x, const VectorXd& a,
                 const VectorXd& b) { return ode.G_x(tau, x, a, b); };
  ps.G_a = [ode](double, double tau, const VectorXd& x, const VectorXd& a,
                 const VectorXd& b) { return ode.G_a(tau, x, a, b); };
  ps.G_b = [ode](double, double tau, const VectorXd& x, const VectorXd& a,
                 const VectorXd& b) { return ode.G_b(tau, x, a, b); };
  ps.g_x = ode.g_x;
  ps.g_u = ode.g_u;
  ps.phi_x = [ode](int i, const BoundaryStates& xs, const Controls& as) -> RowVectorXd {
    const int N = static_cast<int>(xs.size()) - 1;
    if (i <= N) return ode.Phi_x(xs[i - 1], as[i - 1], as[i]);
    return ode.g0_x(xs[N]);
  };
  ps.phi_a = [ode](int i, const BoundaryStates& xs, const Controls& as) -> RowVectorXd {
    const int N = static_cast<int>(xs.size()) - 1;
    RowVectorXd row = RowVectorXd::Zero(as[0].size());
    if (i <= N) row += ode.Phi_a(xs[i - 1], as[i - 1], as[i]);
    if (i >= 2) row += ode.Phi_b(xs[i - 2], as[i - 2], as[i - 1]);
    return row;
  };
  return ps;
}

namespace detail {

/// Backward cumulative integral of a row field: out[u] = integral over
/// (time(u), T), per-interval trapezoid, duplicated slots share the value.
inline RowField backward_cumulative(const RowField& field) {
  const TimeMesh& mesh = *field.mesh;
  RowField cum(field.mesh, static_cast<int>(field.values.cols()));
  const int M = mesh.size();
  for (int u = M - 2; u >= 0; --u) {
    if (mesh.interval(u) == mesh.interval(u + 1)) {
      cum.values.row(u) = cum.values.row(u + 1) +
                          mesh.half_step(u) * (field.values.row(u) + field.values.row(u + 1));
    } else {
      cum.values.row(u) = cum.values.row(u + 1);
    }
  }
  return cum;
}

}  // namespace detail

/// Costate reconstructed from the integral-problem sensitivity field: the
/// tail integral of psi plus a per-interval block built from the per-switch
/// charges, the jump linearization, and the terminal charge pushed through
/// the path-sum table.
inline RowField costate_from_sensitivity(const OdeProblemSpec& ode,
                                         const ControlPolicy& policy,
                                         const AdjointBundle& b) {
  const TimeMesh& mesh = *b.x.mesh;
  const auto& tau = mesh.switch_times();
  const int N = mesh.n_switches();
  const int n = ode.n;
  const RowField cum = detail::backward_cumulative(b.psi);
  const RowVectorXd g0row = ode.g0_x(b.x.left_limit(N + 1));

  // v_i = -Phi_x(i) + (tail integral of psi from tau_i) G_x(i).
  std::vector<RowVectorXd> v(N);
  for (int i = 1; i <= N; ++i) {
    const VectorXd xl = b.x.left_limit(i);
    const MatrixXd Gx = ode.G_x(tau[i - 1], xl, policy.a[i - 1], policy.a[i]);
    v[i - 1] = -ode.Phi_x(xl, policy.a[i - 1], policy.a[i]) +
               cum.values.row(mesh.right_slot(i)) * Gx;
  }

  std::vector<RowVectorXd> block(N + 1, RowVectorXd::Zero(n));
  for (int p = 0; p <= N; ++p) {
    RowVectorXd acc = RowVectorXd::Zero(n);
    for (int j = p + 1; j <= N; ++j)
      for (int i = j; i <= N; ++i) acc += v[i - 1] * b.vk.table.at(j, i);
    for (int j = p + 1; j <= N + 1; ++j) acc += g0row * b.vk.table.at(j, N + 1);
    block[p] = acc;
  }

  RowField p_field(b.x.mesh, n);
  for (int u = 0; u < mesh.size(); ++u)
    p_field.values.row(u) = cum.values.row(u) + block[mesh.interval(u)];
  return p_field;
}

/// Classical backward costate sweep: between switches integrate
/// dp/dt = g_x - p f_x with an implicit trapezoid step; across a switch apply
/// the jump p(tau-) = p(tau+) - Phi_x + p(tau+) G_x; start from
/// p(T-) = g0_x at the final state.
inline RowField solve_costate_backward(const OdeProblemSpec& ode,
                                       const ControlPolicy& policy, const Trajectory& x) {
  const TimeMesh& mesh = *x.mesh;
  const auto& tau = mesh.switch_times();
  const int n = ode.n;
  const int M = mesh.size();
  RowField p(x.mesh, n);
  p.values.row(M - 1) = ode.g0_x(x.at(M - 1));

  auto rhs_terms = [&](int u) {
    const int q = mesh.interval(u);
    const double t = mesh.time(u);
    return std::make_pair(ode.g_x(t, x.at(u), policy.a[q]),
                          ode.f_x(t, x.at(u), policy.a[q]));
  };

  for (int u = M - 2; u >= 0; --u) {
    if (mesh.interval(u) == mesh.interval(u + 1)) {
      const double h2 = mesh.half_step(u);
      const auto [gx0, fx0] = rhs_terms(u);
      const auto [gx1, fx1] = rhs_terms(u + 1);
      const RowVectorXd rhs = p.values.row(u + 1) - h2 * (gx0 + gx1) +
                              h2 * p.values.row(u + 1) * fx1;
      const MatrixXd A = MatrixXd::Identity(n, n) - h2 * fx0;
      p.values.row(u) =
          A.transpose().partialPivLu().solve(rhs.transpose()).transpose();
    } else {
      // u is the left slot of switching time i = interval(u+1).
      const int i = mesh.interval(u + 1);
      const VectorXd xl = x.at(u);
      const RowVectorXd pplus = p.values.row(u + 1);
      const MatrixXd Gx = ode.G_x(tau[i - 1], xl, policy.a[i - 1], policy.a[i]);
      p.values.row(u) = pplus - ode.Phi_x(xl, policy.a[i - 1], policy.a[i]) + pplus * Gx;
    }
  }
  return p;
}

/// Consistency report between the two costate routes and the sensitivity
/// field of the lifted problem.
struct OdeCostateReport {
  RowField p_sweep;
  RowField p_sensitivity;
  RowField psi_hat;                // -(g_x - p_sweep f_x), nodewise
  double route_gap = 0.0;          // sup |p_sweep - p_sensitivity|
  double terminal_residual = 0.0;  // |p(T-) - g0_x| for both routes
  double jump_residual = 0.0;      // worst defect of the switch relation
  double interior_residual = 0.0;  // worst trapezoid defect of dp/dt between switches
  double psi_match = 0.0;          // sup |psi_hat - psi|
};

inline OdeCostateReport ode_costate_report(const OdeProblemSpec& ode,
                                           const ControlPolicy& policy,
                                           const AdjointBundle& b) {
  OdeCostateReport rep{solve_costate_backward(ode, policy, b.x),
                       costate_from_sensitivity(ode, policy, b)};
  const TimeMesh& mesh = *b.x.mesh;
  const auto& tau = mesh.switch_times();
  rep.route_gap = (rep.p_sweep.values - rep.p_sensitivity.values).cwiseAbs().maxCoeff();

  const RowVectorXd g0row = ode.g0_x(b.x.left_limit(mesh.n_intervals()));
  const int last = mesh.size() - 1;
  rep.terminal_residual =
      std::max((rep.p_sweep.values.row(last) - g0row).cwiseAbs().maxCoeff(),
               (rep.p_sensitivity.values.row(last) - g0row).cwiseAbs().maxCoeff());

  for (int i = 1; i <= mesh.n_switches(); ++i) {
    const int ls = mesh.left_slot(i);
    const int rs = mesh.right_slot(i);
    const VectorXd xl = b.x.at(ls);
    const MatrixXd Gx = ode.G_x(tau[i - 1], xl, policy.a[i - 1], policy.a[i]);
    const RowVectorXd Px = ode.Phi_x(xl, policy.a[i - 1], policy.a[i]);
    for (const RowField* f : {&rep.p_sweep, &rep.p_sensitivity}) {
      const RowVectorXd defect = f->values.row(rs) - f->values.row(ls) - Px +
                                 f->values.row(rs) * Gx;
      rep.jump_residual = std::max(rep.jump_residual, defect.cwiseAbs().maxCoeff());
    }
  }

  rep.psi_hat = RowField(b.x.mesh, ode.n);
  for (int u = 0; u < mesh.size(); ++u) {
    const int q = mesh.interval(u);
    const double t = mesh.time(u);
    rep.psi_hat.values.row(u) =
        -(ode.g_x(t, b.x.at(u), policy.a[q]) -
          rep.p_sweep.values.row(u) * ode.f_x(t, b.x.at(u), policy.a[q]));
    rep.psi_match = std::max(
        rep.psi_match,
        (rep.psi_hat.values.row(u) - b.psi.values.row(u)).cwiseAbs().maxCoeff());
  }

  // Interior line of the costate problem, per-panel trapezoid defect of
  // dp/dt = g_x - p f_x in derivative form; near machine level for the sweep
  // (it is how the sweep steps), second order for the reconstructed route.
  for (const RowField* f : {&rep.p_sweep, &rep.p_sensitivity}) {
    for (int u = 0; u + 1 < mesh.size(); ++u) {
      if (mesh.interval(u) != mesh.interval(u + 1)) continue;
      const int q = mesh.interval(u);
      const double dt = 2.0 * mesh.half_step(u);
      RowVectorXd rate = (f->values.row(u + 1) - f->values.row(u)) / dt;
      RowVectorXd rhs0 = ode.g_x(mesh.time(u), b.x.at(u), policy.a[q]) -
                         f->values.row(u) * ode.f_x(mesh.time(u), b.x.at(u), policy.a[q]);
      RowVectorXd rhs1 = ode.g_x(mesh.time(u + 1), b.x.at(u + 1), policy.a[q]) -
                         f->values.row(u + 1) *
                             ode.f_x(mesh.time(u + 1), b.x.at(u + 1), policy.a[q]);
      rep.interior_residual =
          std::max(rep.interior_residual,
                   (rate - 0.5 * (rhs0 + rhs1)).cwiseAbs().maxCoeff());
    }
  }
  return rep;
}

}  // namespace voltra
