#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "voltra/adjoint.hpp"
#include "voltra/control_policy.hpp"
#include "voltra/forward_solver.hpp"
#include "voltra/problem.hpp"

namespace voltra {

struct GradientDescentConfig {
  double step = 0.5;
  int max_iters = 100;
  double tol = 1e-6;            // stationarity tolerance for stopping
  int max_backtracks = 30;
  double resolvent_tol = 1e-10;
  SolverConfig solver{1e-10, 50, 200};
};

struct DescentStep {
  int iter = 0;
  double J = 0.0;
  double step = 0.0;   // step size actually accepted (0 on the final record)
  double worst = 0.0;  // stationarity violation at this iterate
};

struct DescentResult {
  ControlPolicy policy;
  double J = 0.0;
  std::vector<RowVectorXd> Delta;
  StationarityReport stationarity;
  std::vector<DescentStep> history;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double objective(const ProblemSpec& problem, const ControlPolicy& policy,
                        MeshPtr mesh, const SolverConfig& solver) {
  const Trajectory x = solve_marching(problem, policy, mesh, solver);
  return eval_cost(problem, policy, x);
}

}  // namespace detail

/// Projected gradient ascent in the decrease rates: a <- project(a + s Delta),
/// which lowers the cost to first order. The step is re-tried with halving
/// whenever the cost fails to decrease; the loop stops at stationarity, at
/// the iteration cap, or when no halved step makes progress.
inline DescentResult projected_gradient(const ProblemSpec& problem, const ControlBox& box,
                                        const ControlPolicy& a0, MeshPtr mesh,
                                        const GradientDescentConfig& cfg = {}) {
  DescentResult res;
  res.policy = a0;
  ControlPolicy a = a0;
  double J = detail::objective(problem, a, mesh, cfg.solver);

  for (int it = 0; it < cfg.max_iters; ++it) {
    const Trajectory x = solve_marching(problem, a, mesh, cfg.solver);
    const AdjointBundle bundle = build_adjoint(problem, a, x, cfg.resolvent_tol);
    res.Delta = decrease_rates(problem, a, bundle);
    res.stationarity = check_stationarity(res.Delta, a, box, cfg.tol);
    res.iterations = it;
    if (res.stationarity.stationary) {
      res.history.push_back({it, J, 0.0, res.stationarity.worst});
      res.converged = true;
      break;
    }

    double s = cfg.step;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt, s *= 0.5) {
      ControlPolicy cand = a;
      double moved = 0.0;
      for (int p = 0; p < a.n_intervals(); ++p) {
        cand.a[p] = box.project(a.a[p] + s * res.Delta[p].transpose());
        moved = std::max(moved, (cand.a[p] - a.a[p]).cwiseAbs().maxCoeff());
      }
      if (moved == 0.0) break;  // gradient points out of the box everywhere
      const double Jc = detail::objective(problem, cand, mesh, cfg.solver);
      if (Jc < J) {
        res.history.push_back({it, J, s, res.stationarity.worst});
        a = std::move(cand);
        J = Jc;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.history.push_back({it, J, 0.0, res.stationarity.worst});
      break;  // no descending step found at this resolution
    }
  }
  res.policy = a;
  res.J = J;
  return res;
}

struct EnumerationResult {
  ControlPolicy policy;
  double J = 0.0;
  std::vector<int> index;       // flat grid index per scalar control slot
  std::vector<double> table;    // J over the grid in lexicographic order
};

/// Exhaustive cost evaluation over a regular product grid on the control box.
/// The argmin tie-breaks to the lexicographically smallest index. The total
/// grid size is guarded.
inline EnumerationResult enumerate_optimal(const ProblemSpec& problem,
                                           const ControlBox& box, MeshPtr mesh,
                                           int grid_per_dim,
                                           const SolverConfig& solver = {},
                                           std::size_t guard = 1000000) {
  if (grid_per_dim < 1) throw std::invalid_argument("enumerate: grid must be positive");
  const int P = mesh->n_intervals();
  const int m = box.dim();
  const int D = P * m;
  double total_d = 1.0;
  for (int d = 0; d < D; ++d) total_d *= grid_per_dim;
  if (total_d > static_cast<double>(guard))
    throw std::invalid_argument("enumerate: grid too large");
  const std::size_t total = static_cast<std::size_t>(total_d);

  auto value_at = [&](int c, int idx) {
    if (grid_per_dim == 1) return 0.5 * (box.lo[c] + box.hi[c]);
    return box.lo[c] + (box.hi[c] - box.lo[c]) * idx / (grid_per_dim - 1);
  };

  EnumerationResult res;
  res.table.reserve(total);
  std::vector<int> digits(D, 0);
  ControlPolicy cand(P, m);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_digits(D, 0);

  for (std::size_t k = 0; k < total; ++k) {
    for (int p = 0; p < P; ++p)
      for (int c = 0; c < m; ++c) cand.a[p][c] = value_at(c, digits[p * m + c]);
    const double J = detail::objective(problem, cand, mesh, solver);
    res.table.push_back(J);
    if (J < best) {
      best = J;
      best_digits = digits;
    }
    // Odometer, last digit fastest, so the scan order is lexicographic.
    for (int d = D - 1; d >= 0; --d) {
      if (++digits[d] < grid_per_dim) break;
      digits[d] = 0;
    }
  }

  res.J = best;
  res.index = best_digits;
  res.policy = ControlPolicy(P, m);
  for (int p = 0; p < P; ++p)
    for (int c = 0; c < m; ++c) res.policy.a[p][c] = value_at(c, best_digits[p * m + c]);
  return res;
}

}  // namespace voltra
