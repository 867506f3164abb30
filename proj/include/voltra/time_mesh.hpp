#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace voltra {

/// Piecewise-uniform grid on [0, T], split at the switching times.
///
/// The horizon is divided into N+1 closed intervals by the switching times
/// tau_1 < ... < tau_N. Every interval carries `ppi` equally spaced nodes
/// including both endpoints, so each interior switching time appears twice:
/// as the last node of the interval ending there (left slot) and as the first
/// node of the interval starting there (right slot). Grid functions that jump
/// at a switching time keep both one-sided values, one per slot.
///
/// Switching times use 1-based indices i = 1..N in the API that mirrors the
/// continuous-time statement (boundary index N+1 means the horizon T), and
/// 0-based indices where the container layout leads. Helpers below state
/// which convention they take.
class TimeMesh {
 public:
  TimeMesh(double T, std::vector<double> tau, int ppi)
      : T_(T), tau_(std::move(tau)), ppi_(ppi) {
    if (!(T > 0.0)) throw std::invalid_argument("mesh: horizon must be positive");
    if (ppi < 2) throw std::invalid_argument("mesh: need at least 2 nodes per interval");
    for (std::size_t i = 0; i < tau_.size(); ++i) {
      if (!(tau_[i] > 0.0) || !(tau_[i] < T))
        throw std::invalid_argument("mesh: switching times must lie strictly inside (0, T)");
      if (i > 0 && !(tau_[i] > tau_[i - 1]))
        throw std::invalid_argument("mesh: switching times must be strictly increasing");
    }
    const int P = n_intervals();
    start_.resize(P);
    end_.resize(P);
    for (int p = 0; p < P; ++p) {
      start_[p] = (p == 0) ? 0.0 : tau_[p - 1];
      end_[p] = (p == P - 1) ? T_ : tau_[p];
    }
    M_ = P * ppi_;
    time_.resize(M_);
    interval_.resize(M_);
    w_.resize(M_);
    h2_.resize(M_);
    for (int p = 0; p < P; ++p) {
      const double h = spacing(p);
      for (int k = 0; k < ppi_; ++k) {
        const int u = flat(p, k);
        // Endpoints are taken exactly so duplicated slots share one time value.
        time_[u] = (k == 0) ? start_[p]
                 : (k == ppi_ - 1) ? end_[p]
                                   : start_[p] + h * k;
        interval_[u] = p;
        w_[u] = (k == 0 || k == ppi_ - 1) ? 0.5 * h : h;
        h2_[u] = 0.5 * h;
      }
    }
  }

  double horizon() const { return T_; }
  const std::vector<double>& switch_times() const { return tau_; }
  int n_switches() const { return static_cast<int>(tau_.size()); }
  int n_intervals() const { return n_switches() + 1; }
  int points_per_interval() const { return ppi_; }
  /// Total flat node count, (N+1) * ppi.
  int size() const { return M_; }

  double interval_start(int p) const { return start_[p]; }
  double interval_end(int p) const { return end_[p]; }
  double spacing(int p) const { return (end_[p] - start_[p]) / (ppi_ - 1); }

  /// Flat index of node k of interval p.
  int flat(int p, int k) const { return p * ppi_ + k; }
  double time(int u) const { return time_[u]; }
  int interval(int u) const { return interval_[u]; }
  int node_in_interval(int u) const { return u % ppi_; }

  /// Left slot of switching time tau_i (1-based i in 1..N): last node of
  /// interval i-1. Also accepts i = N+1 for the horizon's left limit.
  int left_slot(int i) const {
    if (i < 1 || i > n_intervals())
      throw std::invalid_argument("mesh: boundary index out of range");
    return flat(i - 1, ppi_ - 1);
  }
  /// Right slot of switching time tau_i (1-based i in 1..N): first node of
  /// interval i.
  int right_slot(int i) const {
    if (i < 1 || i > n_switches())
      throw std::invalid_argument("mesh: switch index out of range");
    return flat(i, 0);
  }

  /// Smallest gap between consecutive interval boundaries (0, tau_i, T).
  double min_gap() const {
    double g = end_[0] - start_[0];
    for (int p = 1; p < n_intervals(); ++p) g = std::min(g, end_[p] - start_[p]);
    return g;
  }
  /// Largest node spacing over all intervals, the quadrature resolution.
  double max_spacing() const {
    double h = spacing(0);
    for (int p = 1; p < n_intervals(); ++p) h = std::max(h, spacing(p));
    return h;
  }

  /// Snap a flat index upward across a duplicated slot: the left slot of an
  /// interior switching time maps to the matching right slot. Used for lower
  /// integration endpoints so the quadrature starts inside the correct
  /// interval.
  int ceil_slot(int u) const {
    const int p = interval_[u];
    if (node_in_interval(u) == ppi_ - 1 && p < n_intervals() - 1) return flat(p + 1, 0);
    return u;
  }
  /// Snap a flat index downward across a duplicated slot, the mirror of
  /// ceil_slot for upper integration endpoints.
  int floor_slot(int u) const {
    const int p = interval_[u];
    if (node_in_interval(u) == 0 && p > 0) return flat(p - 1, ppi_ - 1);
    return u;
  }

  /// Base composite-trapezoid weight of flat node u for integrals spanning
  /// whole intervals. Range integrals additionally apply the endpoint
  /// corrections below.
  double weight(int u) const { return w_[u]; }
  /// Half spacing of the interval containing u, the endpoint weight a
  /// trapezoid rule assigns at a range boundary.
  double half_step(int u) const { return h2_[u]; }

  /// Effective weight of node j inside the quadrature range [a, b] (flat,
  /// already slot-snapped, a <= j <= b).
  double range_weight(int j, int a, int b) const {
    double w = w_[j];
    if (j == a) w += h2_[j] - w_[j];
    if (j == b) w += h2_[j] - w_[j];
    return w;
  }

 private:
  double T_;
  std::vector<double> tau_;
  int ppi_;
  int M_ = 0;
  std::vector<double> start_, end_;
  std::vector<double> time_;
  std::vector<int> interval_;
  std::vector<double> w_, h2_;
};

using MeshPtr = std::shared_ptr<const TimeMesh>;

inline MeshPtr make_mesh(double T, std::vector<double> tau, int ppi) {
  return std::make_shared<const TimeMesh>(T, std::move(tau), ppi);
}

/// Closed quadrature range between two flat nodes, with trapezoid endpoint
/// corrections baked in. Empty when the endpoints touch or cross.
struct QuadRange {
  int a = 0;
  int b = -1;
  bool empty = true;
};

/// Range for integrating from the time of `lo` to the time of `hi`,
/// interpreted one-sidedly: the lower endpoint enters from the right of its
/// slot, the upper endpoint from the left.
inline QuadRange quad_range(const TimeMesh& mesh, int lo, int hi) {
  QuadRange r;
  r.a = mesh.ceil_slot(lo);
  r.b = mesh.floor_slot(hi);
  r.empty = (r.a >= r.b) || !(mesh.time(r.a) < mesh.time(r.b));
  return r;
}

/// Sum f(j) * weight over the range with endpoint corrections. F takes
/// (flat index, weight) and accumulates into its own target.
template <class F>
inline void for_quad(const TimeMesh& mesh, const QuadRange& r, F&& f) {
  if (r.empty) return;
  for (int j = r.a; j <= r.b; ++j) f(j, mesh.range_weight(j, r.a, r.b));
}

}  // namespace voltra
