#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <vector>

#include "voltra/time_mesh.hpp"

namespace voltra {

using Eigen::VectorXd;

/// Axis-aligned box of admissible control values.
struct ControlBox {
  VectorXd lo, hi;

  ControlBox() = default;
  ControlBox(VectorXd l, VectorXd h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size())
      throw std::invalid_argument("control box: bound dimensions differ");
    for (int c = 0; c < lo.size(); ++c)
      if (!(lo[c] <= hi[c])) throw std::invalid_argument("control box: lo > hi");
  }
  static ControlBox cube(int m, double lo, double hi) {
    return ControlBox(VectorXd::Constant(m, lo), VectorXd::Constant(m, hi));
  }

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const VectorXd& a, double tol = 0.0) const {
    for (int c = 0; c < lo.size(); ++c)
      if (a[c] < lo[c] - tol || a[c] > hi[c] + tol) return false;
    return true;
  }
  VectorXd project(const VectorXd& a) const {
    return a.cwiseMax(lo).cwiseMin(hi);
  }
};

/// Piecewise-constant control: value a[p] on interval p (0-based, N+1
/// intervals). At a switching time tau_i the left limit is a[i-1] and the
/// right value is a[i].
struct ControlPolicy {
  std::vector<VectorXd> a;

  ControlPolicy() = default;
  ControlPolicy(int n_intervals, int m) : a(n_intervals, VectorXd::Zero(m)) {}

  int n_intervals() const { return static_cast<int>(a.size()); }
  int dim() const { return a.empty() ? 0 : static_cast<int>(a[0].size()); }

  /// Value governing flat node u of the mesh: the interval's own control.
  /// Slots at switching times pick the matching one-sided value.
  const VectorXd& at_node(const TimeMesh& mesh, int u) const { return a[mesh.interval(u)]; }
};

enum class Side { left, right };

/// Control value at time t with an explicit side choice at switching times.
/// Interior times ignore the side. Throws outside [0, T].
inline VectorXd control_at(const ControlPolicy& policy, const TimeMesh& mesh, double t,
                           Side side) {
  if (t < 0.0 || t > mesh.horizon())
    throw std::invalid_argument("control_at: time outside the horizon");
  const auto& tau = mesh.switch_times();
  int p = 0;
  while (p < static_cast<int>(tau.size()) && t > tau[p]) ++p;
  // Now t <= tau[p] (or p == N). Resolve an exact hit on a switching time.
  if (p < static_cast<int>(tau.size()) && t == tau[p] && side == Side::right) ++p;
  if (t == 0.0) p = 0;
  return policy.a[p];
}

/// Direction of change of a policy, one increment per interval.
struct ControlVariation {
  std::vector<VectorXd> alpha;

  ControlVariation() = default;
  ControlVariation(int n_intervals, int m) : alpha(n_intervals, VectorXd::Zero(m)) {}
  int n_intervals() const { return static_cast<int>(alpha.size()); }
};

inline ControlPolicy perturbed(const ControlPolicy& policy, const ControlVariation& v,
                               double eps) {
  ControlPolicy out = policy;
  for (std::size_t p = 0; p < out.a.size(); ++p) out.a[p] += eps * v.alpha[p];
  return out;
}

/// One-sided admissibility of a variation at a policy: components sitting on
/// a box face may only move inward.
inline bool is_admissible(const ControlVariation& v, const ControlPolicy& policy,
                          const ControlBox& box, double tol = 1e-12) {
  for (int p = 0; p < policy.n_intervals(); ++p) {
    for (int c = 0; c < box.dim(); ++c) {
      const double a = policy.a[p][c];
      const double al = v.alpha[p][c];
      if (a <= box.lo[c] + tol && al < -tol) return false;
      if (a >= box.hi[c] - tol && al > tol) return false;
    }
  }
  return true;
}

/// Uniform random policy inside the box, for probing.
inline ControlPolicy random_policy(int n_intervals, const ControlBox& box,
                                   std::mt19937_64& rng) {
  ControlPolicy out(n_intervals, box.dim());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& a : out.a)
    for (int c = 0; c < box.dim(); ++c) a[c] = box.lo[c] + (box.hi[c] - box.lo[c]) * unit(rng);
  return out;
}

/// Random variation admissible at the given policy: uniform in [-1, 1] per
/// component, with face components folded inward.
inline ControlVariation random_admissible_variation(const ControlPolicy& policy,
                                                    const ControlBox& box,
                                                    std::mt19937_64& rng,
                                                    double tol = 1e-12) {
  ControlVariation v(policy.n_intervals(), box.dim());
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (int p = 0; p < policy.n_intervals(); ++p) {
    for (int c = 0; c < box.dim(); ++c) {
      double al = sym(rng);
      const double a = policy.a[p][c];
      const bool at_lo = a <= box.lo[c] + tol;
      const bool at_hi = a >= box.hi[c] - tol;
      if (at_lo && at_hi) al = 0.0;
      else if (at_lo && al < 0.0) al = -al;
      else if (at_hi && al > 0.0) al = -al;
      v.alpha[p][c] = al;
    }
  }
  return v;
}

}  // namespace voltra
