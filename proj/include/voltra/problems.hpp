#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltra/control_policy.hpp"
#include "voltra/impulsive_ode.hpp"
#include "voltra/problem.hpp"

namespace voltra {

/// A catalog entry: the problem functions plus the default horizon,
/// switching times, mesh resolution, control box, and starting policy.
struct BuiltinProblem {
  std::string name;
  ProblemSpec spec;
  std::optional<OdeProblemSpec> ode;
  double T = 1.0;
  std::vector<double> tau;
  int ppi = 101;
  ControlBox box;
  ControlPolicy policy;
};

using Params = std::map<std::string, double>;

namespace detail {

/// Defaults merged with overrides; unknown override keys are rejected so a
/// config typo cannot silently fall back to a default.
inline Params merge_params(Params defaults, const Params& overrides,
                           const std::string& name) {
  for (const auto& [k, v] : overrides) {
    auto it = defaults.find(k);
    if (it == defaults.end())
      throw std::invalid_argument("problem " + name + ": unknown parameter '" + k + "'");
    it->second = v;
  }
  return defaults;
}

inline VectorXd scalar1(double v) {
  VectorXd x(1);
  x[0] = v;
  return x;
}

}  // namespace detail

/// Trivial problem: constant forcing, no dynamics, no jumps, zero cost.
inline BuiltinProblem make_null(const Params& overrides) {
  const Params p = detail::merge_params({}, overrides, "null");
  BuiltinProblem b;
  b.name = "null";
  b.spec = ProblemSpec::zeros(1, 1);
  b.spec.h = [](double) { return detail::scalar1(1.0); };
  OdeProblemSpec ode;
  ode.n = 1;
  ode.m = 1;
  ode.x0 = detail::scalar1(1.0);
  ode.f = [](double, const VectorXd&, const VectorXd&) { return VectorXd::Zero(1).eval(); };
  ode.G = [](double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return VectorXd::Zero(1).eval();
  };
  ode.g = [](double, const VectorXd&, const VectorXd&) { return 0.0; };
  ode.Phi = [](const VectorXd&, const VectorXd&, const VectorXd&) { return 0.0; };
  ode.g0 = [](const VectorXd&) { return 0.0; };
  ode.f_x = [](double, const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(1, 1).eval();
  };
  ode.f_u = ode.f_x;
  ode.G_x = [](double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(1, 1).eval();
  };
  ode.G_a = ode.G_x;
  ode.G_b = ode.G_x;
  ode.g_x = [](double, const VectorXd&, const VectorXd&) {
    return RowVectorXd::Zero(1).eval();
  };
  ode.g_u = ode.g_x;
  ode.Phi_x = [](const VectorXd&, const VectorXd&, const VectorXd&) {
    return RowVectorXd::Zero(1).eval();
  };
  ode.Phi_a = ode.Phi_x;
  ode.Phi_b = ode.Phi_x;
  ode.g0_x = [](const VectorXd&) { return RowVectorXd::Zero(1).eval(); };
  b.ode = ode;
  b.T = 1.0;
  b.ppi = 51;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(1, 1);
  return b;
}

/// No running dynamics, multiplicative jumps: x compounds by (1 + c) at each
/// switching time, plus a control-difference kick d (a_after - a_before).
/// Boundary left limits for d = 0 follow the geometric cascade
/// 1, 1+c, (1+c)^2, ...
inline BuiltinProblem make_pure_jump(const Params& overrides) {
  const Params p = detail::merge_params({{"c", 1.0}, {"d", 0.25}}, overrides, "pure-jump");
  const double c = p.at("c"), d = p.at("d");
  BuiltinProblem b;
  b.name = "pure-jump";
  b.spec = ProblemSpec::zeros(1, 1);
  b.spec.h = [](double) { return detail::scalar1(1.0); };
  b.spec.G = [c, d](double, double, const VectorXd& x, const VectorXd& a,
                    const VectorXd& bb) { return detail::scalar1(c * x[0] + d * (bb[0] - a[0])); };
  b.spec.G_x = [c](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << c).finished();
  };
  b.spec.G_a = [d](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << -d).finished();
  };
  b.spec.G_b = [d](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << d).finished();
  };
  b.spec.phi = [](const BoundaryStates& xs, const Controls&) { return xs.back()[0]; };
  b.spec.phi_x = [](int i, const BoundaryStates& xs, const Controls&) -> RowVectorXd {
    RowVectorXd r = RowVectorXd::Zero(1);
    if (i == static_cast<int>(xs.size())) r[0] = 1.0;
    return r;
  };
  b.spec.C_f = 0.0;
  b.spec.C_G = std::abs(c);
  b.T = 1.0;
  b.tau = {1.0 / 3.0, 2.0 / 3.0};
  b.ppi = 51;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(3, 1);
  return b;
}

/// Linear growth kernel with additive control: x(s) = 1 + the integral of
/// kappa x + bu a. At kappa = 1 and zero control the solution is e^s and the
/// state kernel of the linearization is identically one.
inline BuiltinProblem make_exp_kernel(const Params& overrides) {
  const Params p =
      detail::merge_params({{"kappa", 1.0}, {"bu", 0.5}}, overrides, "exp-kernel");
  const double kappa = p.at("kappa"), bu = p.at("bu");
  BuiltinProblem b;
  b.name = "exp-kernel";
  b.spec = ProblemSpec::zeros(1, 1);
  b.spec.h = [](double) { return detail::scalar1(1.0); };
  b.spec.f = [kappa, bu](double, double, const VectorXd& x, const VectorXd& a) {
    return detail::scalar1(kappa * x[0] + bu * a[0]);
  };
  b.spec.f_x = [kappa](double, double, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << kappa).finished();
  };
  b.spec.f_u = [bu](double, double, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << bu).finished();
  };
  b.spec.phi = [](const BoundaryStates& xs, const Controls&) { return xs.back()[0]; };
  b.spec.phi_x = [](int i, const BoundaryStates& xs, const Controls&) -> RowVectorXd {
    RowVectorXd r = RowVectorXd::Zero(1);
    if (i == static_cast<int>(xs.size())) r[0] = 1.0;
    return r;
  };
  b.spec.C_f = std::abs(kappa);
  b.spec.C_G = 0.0;
  b.T = 1.0;
  b.ppi = 401;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(1, 1);
  return b;
}

/// Pure control integrator with a quadratic target charge: the state is
/// x0 plus the time-weighted sum of the interval controls, the cost targets
/// x(T-) while penalizing control energy. The constrained minimizer is
/// computable by hand, which makes this the optimizer's reference problem.
inline BuiltinProblem make_controlled_linear(const Params& overrides) {
  const Params p = detail::merge_params(
      {{"b", 1.0}, {"w_lin", 0.0}, {"w_q", 1.0}, {"theta", 2.0}, {"rho", 0.05}},
      overrides, "controlled-linear");
  const double bc = p.at("b"), w_lin = p.at("w_lin"), w_q = p.at("w_q");
  const double theta = p.at("theta"), rho = p.at("rho");
  BuiltinProblem b;
  b.name = "controlled-linear";
  b.spec = ProblemSpec::zeros(1, 1);
  b.spec.h = [](double) { return detail::scalar1(1.0); };
  b.spec.f = [bc](double, double, const VectorXd&, const VectorXd& a) {
    return detail::scalar1(bc * a[0]);
  };
  b.spec.f_u = [bc](double, double, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << bc).finished();
  };
  b.spec.phi = [w_lin, w_q, theta, rho](const BoundaryStates& xs, const Controls& as) {
    const double xT = xs.back()[0];
    double v = w_lin * xT + w_q * (xT - theta) * (xT - theta);
    for (const auto& a : as) v += rho * a.squaredNorm();
    return v;
  };
  b.spec.phi_x = [w_lin, w_q, theta](int i, const BoundaryStates& xs,
                                     const Controls&) -> RowVectorXd {
    RowVectorXd r = RowVectorXd::Zero(1);
    if (i == static_cast<int>(xs.size()))
      r[0] = w_lin + 2.0 * w_q * (xs.back()[0] - theta);
    return r;
  };
  b.spec.phi_a = [rho](int i, const BoundaryStates&, const Controls& as) -> RowVectorXd {
    return (2.0 * rho * as[i - 1].transpose()).eval();
  };
  b.spec.C_f = 0.0;
  b.spec.C_G = 0.0;
  b.T = 1.0;
  b.tau = {0.4};
  b.ppi = 201;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(2, 1);
  return b;
}

/// Nonlinear fading-memory dynamics with nonlinear jumps and a tracking cost:
/// the kernel decays exponentially in s - t, the state feedback saturates
/// through a sine, jumps kick by c sin(x) plus a control difference. The
/// stress-test problem for every nonlinear route.
inline BuiltinProblem make_memory_decay(const Params& overrides) {
  const Params p = detail::merge_params(
      {{"kappa", 0.4}, {"gamma", 1.5}, {"beta", 0.5}, {"bu", 0.6}, {"c", 0.35},
       {"d", 0.25}, {"q", 1.0}, {"r_track", 0.5}, {"rho", 0.1}, {"wq", 1.0},
       {"theta", 1.2}},
      overrides, "memory-decay");
  const double kappa = p.at("kappa"), gamma = p.at("gamma"), beta = p.at("beta");
  const double bu = p.at("bu"), c = p.at("c"), d = p.at("d");
  const double q = p.at("q"), r_track = p.at("r_track"), rho = p.at("rho");
  const double wq = p.at("wq"), theta = p.at("theta");
  BuiltinProblem b;
  b.name = "memory-decay";
  b.spec = ProblemSpec::zeros(1, 1);
  b.spec.h = [](double) { return detail::scalar1(1.0); };
  b.spec.f = [kappa, gamma, beta, bu](double s, double t, const VectorXd& x,
                                      const VectorXd& a) {
    return detail::scalar1(std::exp(-gamma * (s - t)) *
                           (-kappa * (x[0] + beta * std::sin(x[0])) + bu * a[0]));
  };
  b.spec.f_x = [kappa, gamma, beta](double s, double t, const VectorXd& x,
                                    const VectorXd&) {
    return (MatrixXd(1, 1) << std::exp(-gamma * (s - t)) *
                                  (-kappa * (1.0 + beta * std::cos(x[0]))))
        .finished();
  };
  b.spec.f_u = [gamma, bu](double s, double t, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << std::exp(-gamma * (s - t)) * bu).finished();
  };
  b.spec.G = [c, d](double, double, const VectorXd& x, const VectorXd& a,
                    const VectorXd& bb) {
    return detail::scalar1(c * std::sin(x[0]) + d * (bb[0] - a[0]));
  };
  b.spec.G_x = [c](double, double, const VectorXd& x, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << c * std::cos(x[0])).finished();
  };
  b.spec.G_a = [d](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << -d).finished();
  };
  b.spec.G_b = [d](double, double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << d).finished();
  };
  b.spec.g = [q, r_track, rho](double, const VectorXd& x, const VectorXd& a) {
    return q * (x[0] - r_track) * (x[0] - r_track) + rho * a[0] * a[0];
  };
  b.spec.g_x = [q, r_track](double, const VectorXd& x, const VectorXd&) {
    return (RowVectorXd(1) << 2.0 * q * (x[0] - r_track)).finished();
  };
  b.spec.g_u = [rho](double, const VectorXd&, const VectorXd& a) {
    return (RowVectorXd(1) << 2.0 * rho * a[0]).finished();
  };
  b.spec.phi = [wq, theta](const BoundaryStates& xs, const Controls&) {
    const double xT = xs.back()[0];
    return wq * (xT - theta) * (xT - theta);
  };
  b.spec.phi_x = [wq, theta](int i, const BoundaryStates& xs,
                             const Controls&) -> RowVectorXd {
    RowVectorXd r = RowVectorXd::Zero(1);
    if (i == static_cast<int>(xs.size())) r[0] = 2.0 * wq * (xs.back()[0] - theta);
    return r;
  };
  b.spec.C_f = kappa * (1.0 + beta);
  b.spec.C_G = std::abs(c);
  b.T = 1.0;
  b.tau = {1.0 / 3.0, 2.0 / 3.0};
  b.ppi = 401;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(3, 1);
  b.policy.a[0][0] = 0.3;
  b.policy.a[1][0] = -0.2;
  b.policy.a[2][0] = 0.1;
  return b;
}

/// Scalar linear-quadratic impulsive ODE: stable drift with additive control,
/// affine jump at the switch, quadratic tracking plus control energy, a
/// quadratic per-switch charge, and no terminal charge. The reference problem
/// for the two costate routes.
inline BuiltinProblem make_lq_impulsive_ode(const Params& overrides) {
  const Params p = detail::merge_params(
      {{"al", -0.8}, {"be", 1.0}, {"c", 0.3}, {"d", 0.2}, {"q", 1.0}, {"r", 0.5},
       {"rho", 0.1}, {"w", 0.25}, {"sw", 0.1}},
      overrides, "lq-impulsive-ode");
  const double al = p.at("al"), be = p.at("be"), c = p.at("c"), d = p.at("d");
  const double q = p.at("q"), r = p.at("r"), rho = p.at("rho");
  const double w = p.at("w"), sw = p.at("sw");
  OdeProblemSpec ode;
  ode.n = 1;
  ode.m = 1;
  ode.x0 = detail::scalar1(1.0);
  ode.f = [al, be](double, const VectorXd& x, const VectorXd& a) {
    return detail::scalar1(al * x[0] + be * a[0]);
  };
  ode.f_x = [al](double, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << al).finished();
  };
  ode.f_u = [be](double, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << be).finished();
  };
  ode.G = [c, d](double, const VectorXd& x, const VectorXd& a, const VectorXd& bb) {
    return detail::scalar1(c * x[0] + d * (bb[0] - a[0]));
  };
  ode.G_x = [c](double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << c).finished();
  };
  ode.G_a = [d](double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << -d).finished();
  };
  ode.G_b = [d](double, const VectorXd&, const VectorXd&, const VectorXd&) {
    return (MatrixXd(1, 1) << d).finished();
  };
  ode.g = [q, r, rho](double, const VectorXd& x, const VectorXd& a) {
    return q * (x[0] - r) * (x[0] - r) + rho * a[0] * a[0];
  };
  ode.g_x = [q, r](double, const VectorXd& x, const VectorXd&) {
    return (RowVectorXd(1) << 2.0 * q * (x[0] - r)).finished();
  };
  ode.g_u = [rho](double, const VectorXd&, const VectorXd& a) {
    return (RowVectorXd(1) << 2.0 * rho * a[0]).finished();
  };
  ode.Phi = [w, sw](const VectorXd& x, const VectorXd& a, const VectorXd& bb) {
    return w * x[0] * x[0] + sw * (bb[0] - a[0]) * (bb[0] - a[0]);
  };
  ode.Phi_x = [w](const VectorXd& x, const VectorXd&, const VectorXd&) {
    return (RowVectorXd(1) << 2.0 * w * x[0]).finished();
  };
  ode.Phi_a = [sw](const VectorXd&, const VectorXd& a, const VectorXd& bb) {
    return (RowVectorXd(1) << -2.0 * sw * (bb[0] - a[0])).finished();
  };
  ode.Phi_b = [sw](const VectorXd&, const VectorXd& a, const VectorXd& bb) {
    return (RowVectorXd(1) << 2.0 * sw * (bb[0] - a[0])).finished();
  };
  ode.g0 = [](const VectorXd&) { return 0.0; };
  ode.g0_x = [](const VectorXd&) { return RowVectorXd::Zero(1).eval(); };
  ode.C_f = std::abs(al);
  ode.C_G = std::abs(c);

  BuiltinProblem b;
  b.name = "lq-impulsive-ode";
  b.spec = lift_ode(ode);
  b.ode = ode;
  b.T = 1.0;
  b.tau = {0.5};
  b.ppi = 401;
  b.box = ControlBox::cube(1, -1.0, 1.0);
  b.policy = ControlPolicy(2, 1);
  b.policy.a[0][0] = 0.2;
  b.policy.a[1][0] = -0.1;
  return b;
}

inline std::vector<std::string> builtin_names() {
  return {"null",           "pure-jump",         "exp-kernel",
          "controlled-linear", "memory-decay",   "lq-impulsive-ode"};
}

inline BuiltinProblem make_builtin(const std::string& name, const Params& overrides = {}) {
  if (name == "null") return make_null(overrides);
  if (name == "pure-jump") return make_pure_jump(overrides);
  if (name == "exp-kernel") return make_exp_kernel(overrides);
  if (name == "controlled-linear") return make_controlled_linear(overrides);
  if (name == "memory-decay") return make_memory_decay(overrides);
  if (name == "lq-impulsive-ode") return make_lq_impulsive_ode(overrides);
  throw std::invalid_argument("unknown problem '" + name + "'");
}

}  // namespace voltra
