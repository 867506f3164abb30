#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "voltra/voltra.hpp"

using namespace voltra;

namespace {

MatrixXd m1(double v) { return (MatrixXd(1, 1) << v).finished(); }
VectorXd v1(double v) { return (VectorXd(1) << v).finished(); }

/// Jump-cascade system: no kernel, unit impulse factors, unit forcing.
LinearSystem cascade_system(MeshPtr mesh) {
  return make_linear_system(
      mesh, 1, [](int, int) { return m1(0.0); }, [](int, int) { return m1(1.0); },
      [](int) { return v1(1.0); });
}

/// Unit-kernel system with unit impulse factors and unit forcing.
LinearSystem mixed_system(MeshPtr mesh) {
  return make_linear_system(
      mesh, 1, [](int, int) { return m1(1.0); }, [](int, int) { return m1(1.0); },
      [](int) { return v1(1.0); });
}

double mode_gap(const LinearSolveResult& a, const LinearSolveResult& b) {
  double d = a.x.sup_distance(b.x);
  for (std::size_t i = 0; i < a.boundary.size(); ++i)
    d = std::max(d, (a.boundary[i] - b.boundary[i]).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

TEST_CASE("impulse unfolding leaves kernel-only systems untouched") {
  auto mesh = make_mesh(1.0, {0.4}, 21);
  LinearSystem sys = make_linear_system(
      mesh, 1,
      [&](int s, int t) { return m1(1.0 + mesh->time(s) * mesh->time(t)); },
      [](int, int) { return m1(0.0); }, [&](int s) { return v1(mesh->time(s)); });
  PathSumTable table = system_path_table(sys);
  REQUIRE((combined_kernel(sys, table) - sys.K).sup_norm() == 0.0);
  REQUIRE(combined_forcing(sys, table).sup_distance(sys.forcing) == 0.0);
}

TEST_CASE("pure jump cascade folds into the forcing") {
  auto mesh = make_mesh(1.0, {1.0 / 3.0, 2.0 / 3.0}, 21);
  LinearSystem sys = cascade_system(mesh);
  PathSumTable table = system_path_table(sys);

  REQUIRE(combined_kernel(sys, table).sup_norm() == 0.0);
  Trajectory f = combined_forcing(sys, table);
  for (int u = 0; u < mesh->size(); ++u) {
    const double want = std::pow(2.0, mesh->interval(u));
    REQUIRE(f.at(u)[0] == want);
  }
}

TEST_CASE("jump cascade boundary values are exact in every mode") {
  auto mesh = make_mesh(1.0, {1.0 / 3.0, 2.0 / 3.0}, 21);
  LinearSystem sys = cascade_system(mesh);
  PathSumTable table = system_path_table(sys);

  const LinearSolveResult direct = solve_linear_direct(sys);
  const LinearSolveResult path = solve_linear_path(sys, table);
  const LinearSolveResult resol = solve_linear_resolvent(sys, table);

  for (const LinearSolveResult* r : {&direct, &path, &resol}) {
    REQUIRE(r->boundary.size() == 3);
    REQUIRE(r->boundary[0][0] == 1.0);
    REQUIRE(r->boundary[1][0] == 2.0);
    REQUIRE(r->boundary[2][0] == 4.0);
  }
}

TEST_CASE("unit kernel without impulses solves to the exponential") {
  auto mesh = make_mesh(1.0, {}, 201);
  LinearSystem sys = make_linear_system(
      mesh, 1, [](int, int) { return m1(1.0); }, [](int, int) { return m1(0.0); },
      [](int) { return v1(1.0); });
  PathSumTable table = system_path_table(sys);

  for (const LinearSolveResult& r :
       {solve_linear_direct(sys), solve_linear_path(sys, table),
        solve_linear_resolvent(sys, table, 1e-10)}) {
    double worst = 0.0;
    for (int u = 0; u < mesh->size(); ++u)
      worst = std::max(worst, std::abs(r.x.at(u)[0] - std::exp(mesh->time(u))));
    REQUIRE(worst < 1e-3);
  }
}

TEST_CASE("the three solution routes agree on a mixed system") {
  auto mesh = make_mesh(1.0, {1.0 / 3.0, 2.0 / 3.0}, 101);
  LinearSystem sys = mixed_system(mesh);
  PathSumTable table = system_path_table(sys);

  const LinearSolveResult direct = solve_linear_direct(sys);
  const LinearSolveResult path = solve_linear_path(sys, table);
  const LinearSolveResult resol = solve_linear_resolvent(sys, table, 1e-12);
  REQUIRE(resol.resolvent_terms > 1);

  REQUIRE(mode_gap(direct, path) < 1e-6);
  REQUIRE(mode_gap(direct, resol) < 1e-6);
  REQUIRE(mode_gap(path, resol) < 1e-6);
}

TEST_CASE("impulse sums reindex to the zero-extended full square") {
  auto mesh = make_mesh(1.0, {0.3, 0.7}, 17);
  LinearSystem sys = make_linear_system(
      mesh, 1,
      [&](int s, int t) { return m1(0.8 + 0.3 * mesh->time(s) - 0.2 * mesh->time(t)); },
      [&](int i, int s) { return m1(0.6 + 0.2 * i + 0.1 * mesh->time(s)); },
      [&](int s) { return v1(1.0 + mesh->time(s)); });
  PathSumTable table = system_path_table(sys);
  const KernelGrid got = combined_kernel(sys, table);

  // full two-index sum, out-of-order terms zero-extended: chains with i < j
  // vanish, impulse factors vanish at and before their own switch, and the
  // boundary kernel column stops at the left slot
  const int N = mesh->n_switches();
  KernelGrid want = sys.K;
  for (int s = 0; s < mesh->size(); ++s)
    for (int j = 1; j <= N; ++j) {
      const int ls = mesh->left_slot(j);
      for (int t = 0; t <= ls; ++t) {
        double add = 0.0;
        for (int i = 1; i <= N; ++i) {
          if (i < j) continue;
          add += sys.L[i - 1][s](0, 0) * table.at(j, i)(0, 0) *
                 sys.K.block_matrix(ls, t)(0, 0);
        }
        if (add != 0.0)
          want.set_block(s, t, m1(want.block_matrix(s, t)(0, 0) + add));
      }
    }
  REQUIRE((got - want).sup_norm() < 1e-12);
}

TEST_CASE("dual application of a zero resolvent returns the data") {
  auto mesh = make_mesh(1.0, {}, 51);
  LinearSystem sys = make_linear_system(
      mesh, 1, [](int, int) { return m1(0.0); }, [](int, int) { return m1(0.0); },
      [](int) { return v1(0.0); });
  PathSumTable table = system_path_table(sys);

  RowField eta(mesh, 1);
  for (int u = 0; u < mesh->size(); ++u) eta.values(u, 0) = std::sin(3.0 * mesh->time(u));
  RowField y = dual_solve(KernelGrid(mesh, 1), eta);
  REQUIRE((y.values - eta.values).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(dual_residual(sys, table, y, eta) == 0.0);
}

TEST_CASE("dual of the unit kernel is the reflected exponential") {
  auto mesh = make_mesh(1.0, {}, 201);
  KernelGrid one = sample_kernel(mesh, 1, [](int, int) { return m1(1.0); });
  ResolventResult rr = resolvent_kernel(one, 1e-10);

  RowField eta(mesh, 1);
  for (int u = 0; u < mesh->size(); ++u) eta.values(u, 0) = 1.0;
  RowField y = dual_solve(rr.R, eta);
  double worst = 0.0;
  for (int u = 0; u < mesh->size(); ++u)
    worst = std::max(worst, std::abs(y.values(u, 0) - std::exp(1.0 - mesh->time(u))));
  REQUIRE(worst < 1e-3);
}

TEST_CASE("dual defect vanishes for resolvent-built adjoint data") {
  auto mesh = make_mesh(1.0, {1.0 / 3.0, 2.0 / 3.0}, 51);
  LinearSystem sys = mixed_system(mesh);
  PathSumTable table = system_path_table(sys);
  ResolventResult rr = resolvent_kernel(combined_kernel(sys, table), 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    RowField eta(mesh, 1);
    for (int u = 0; u < mesh->size(); ++u) eta.values(u, 0) = sym(rng);
    RowField y = dual_solve(rr.R, eta);
    REQUIRE(dual_residual(sys, table, y, eta) < 1e-8);
  }
}
