#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "voltra/voltra.hpp"

using namespace voltra;

TEST_CASE("mesh layout and duplicated slots") {
  auto mesh = make_mesh(1.0, {1.0 / 3, 2.0 / 3}, 5);
  REQUIRE(mesh->n_intervals() == 3);
  REQUIRE(mesh->n_switches() == 2);
  REQUIRE(mesh->size() == 15);
  REQUIRE(mesh->time(0) == 0.0);
  REQUIRE(mesh->time(mesh->size() - 1) == 1.0);
  REQUIRE(mesh->left_slot(3) == mesh->size() - 1);

  // slots of an interior switching time share the time value exactly
  for (int i = 1; i <= 2; ++i) {
    REQUIRE(mesh->left_slot(i) + 1 == mesh->right_slot(i));
    REQUIRE(mesh->time(mesh->left_slot(i)) == mesh->time(mesh->right_slot(i)));
  }

  // snapping moves across a duplicated slot and nowhere else
  REQUIRE(mesh->ceil_slot(mesh->left_slot(1)) == mesh->right_slot(1));
  REQUIRE(mesh->floor_slot(mesh->right_slot(2)) == mesh->left_slot(2));
  REQUIRE(mesh->ceil_slot(3) == 3);
  REQUIRE(mesh->floor_slot(3) == 3);
  REQUIRE(mesh->ceil_slot(mesh->size() - 1) == mesh->size() - 1);
  REQUIRE(mesh->floor_slot(0) == 0);

  REQUIRE(mesh->interval(mesh->left_slot(1)) == 0);
  REQUIRE(mesh->interval(mesh->right_slot(1)) == 1);
  REQUIRE(std::abs(mesh->min_gap() - 1.0 / 3) < 1e-15);
  REQUIRE(std::abs(mesh->max_spacing() - (1.0 / 3) / 4) < 1e-15);
}

TEST_CASE("mesh rejects malformed inputs") {
  REQUIRE_THROWS_AS(TimeMesh(0.0, {}, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(-1.0, {}, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(1.0, {}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(1.0, {0.0}, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(1.0, {1.0}, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(1.0, {0.5, 0.5}, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh(1.0, {0.6, 0.4}, 5), std::invalid_argument);
  REQUIRE_NOTHROW(TimeMesh(1.0, {}, 2));
}

TEST_CASE("quadrature weights integrate constants exactly") {
  auto mesh = make_mesh(2.0, {0.5, 1.2}, 11);

  double mass = 0.0;
  for (int u = 0; u < mesh->size(); ++u) mass += mesh->weight(u);
  REQUIRE(std::abs(mass - 2.0) < 1e-14);

  // a range integral of 1 equals the time difference
  QuadRange r = quad_range(*mesh, 3, 17);
  REQUIRE(!r.empty);
  double acc = 0.0;
  for_quad(*mesh, r, [&](int, double w) { acc += w; });
  REQUIRE(std::abs(acc - (mesh->time(17) - mesh->time(3))) < 1e-14);

  // crossing a switching time: both slots contribute their own half panels
  const int lo = 3, hi = mesh->flat(1, 4);
  QuadRange rx = quad_range(*mesh, lo, hi);
  acc = 0.0;
  for_quad(*mesh, rx, [&](int, double w) { acc += w; });
  REQUIRE(std::abs(acc - (mesh->time(hi) - mesh->time(lo))) < 1e-14);

  // empty ranges: touching endpoints, duplicated slot pairs, reversed order
  REQUIRE(quad_range(*mesh, 5, 5).empty);
  REQUIRE(quad_range(*mesh, mesh->left_slot(1), mesh->right_slot(1)).empty);
  REQUIRE(quad_range(*mesh, 9, 4).empty);

  // endpoint corrections: interior node of a range keeps its base weight,
  // range ends drop to half a panel
  REQUIRE(mesh->range_weight(4, 3, 17) == mesh->weight(4));
  REQUIRE(mesh->range_weight(3, 3, 17) == mesh->half_step(3));
  REQUIRE(mesh->range_weight(17, 3, 17) == mesh->half_step(17));
}

TEST_CASE("policy node mapping and side selection") {
  auto mesh = make_mesh(1.0, {0.25, 0.75}, 5);
  ControlPolicy pol(3, 1);
  pol.a[0][0] = 1.0;
  pol.a[1][0] = 2.0;
  pol.a[2][0] = 3.0;

  REQUIRE(pol.at_node(*mesh, mesh->left_slot(1))[0] == 1.0);
  REQUIRE(pol.at_node(*mesh, mesh->right_slot(1))[0] == 2.0);
  REQUIRE(pol.at_node(*mesh, mesh->size() - 1)[0] == 3.0);

  REQUIRE(control_at(pol, *mesh, 0.25, Side::left)[0] == 1.0);
  REQUIRE(control_at(pol, *mesh, 0.25, Side::right)[0] == 2.0);
  REQUIRE(control_at(pol, *mesh, 0.5, Side::left)[0] == 2.0);
  REQUIRE(control_at(pol, *mesh, 0.5, Side::right)[0] == 2.0);
  REQUIRE(control_at(pol, *mesh, 0.0, Side::right)[0] == 1.0);
  REQUIRE(control_at(pol, *mesh, 1.0, Side::left)[0] == 3.0);
  REQUIRE_THROWS_AS(control_at(pol, *mesh, -0.1, Side::left), std::invalid_argument);
  REQUIRE_THROWS_AS(control_at(pol, *mesh, 1.1, Side::left), std::invalid_argument);
}

TEST_CASE("box projection and membership") {
  ControlBox box = ControlBox::cube(2, -1.0, 1.0);
  VectorXd v(2);
  v << 2.0, -3.0;
  VectorXd pv = box.project(v);
  REQUIRE(pv[0] == 1.0);
  REQUIRE(pv[1] == -1.0);
  REQUIRE(box.contains(pv));
  REQUIRE(!box.contains(v));
  REQUIRE_THROWS_AS(ControlBox(VectorXd::Ones(2), VectorXd::Zero(2)),
                    std::invalid_argument);
}

TEST_CASE("random variations respect the active faces") {
  ControlBox box = ControlBox::cube(2, -1.0, 1.0);
  ControlPolicy pol(2, 2);
  pol.a[0] << -1.0, 1.0;  // both components pinned
  pol.a[1] << 0.0, 0.3;   // interior

  std::mt19937_64 rng(7);
  for (int k = 0; k < 200; ++k) {
    ControlVariation al = random_admissible_variation(pol, box, rng);
    REQUIRE(al.alpha[0][0] >= 0.0);  // at the lower face only inward moves
    REQUIRE(al.alpha[0][1] <= 0.0);  // at the upper face only inward moves
    REQUIRE(is_admissible(al, pol, box));
  }

  // a degenerate box pins its component completely
  ControlBox degen(VectorXd::Zero(1), VectorXd::Zero(1));
  ControlPolicy dp(1, 1);
  ControlVariation al = random_admissible_variation(dp, degen, rng);
  REQUIRE(al.alpha[0][0] == 0.0);
}

TEST_CASE("perturbed policies move along the variation") {
  ControlPolicy pol(2, 1);
  pol.a[0][0] = 0.5;
  pol.a[1][0] = -0.25;
  ControlVariation al(2, 1);
  al.alpha[0][0] = 1.0;
  al.alpha[1][0] = -2.0;
  ControlPolicy moved = perturbed(pol, al, 0.125);
  REQUIRE(moved.a[0][0] == 0.625);
  REQUIRE(moved.a[1][0] == -0.5);
}

TEST_CASE("trajectory slots and norms") {
  auto mesh = make_mesh(1.0, {0.5}, 3);
  Trajectory x(mesh, 2);
  VectorXd v(2);
  v << 1.0, -4.0;
  x.set(mesh->left_slot(1), v);
  REQUIRE(x.left_limit(1)[1] == -4.0);
  REQUIRE(x.right_limit(1)[0] == 0.0);
  REQUIRE(x.sup_norm() == 4.0);

  Trajectory y = x;
  y.values(0, 0) = 2.5;
  REQUIRE(x.sup_distance(y) == 2.5);
  Trajectory z(make_mesh(1.0, {}, 4), 2);
  REQUIRE_THROWS_AS(x.sup_distance(z), std::invalid_argument);
}
