#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "voltra/voltra.hpp"

using namespace voltra;

namespace {

KernelGrid constant_kernel(MeshPtr mesh, double v) {
  return sample_kernel(mesh, 1, [v](int, int) { return (MatrixXd(1, 1) << v).finished(); });
}

/// Smooth random kernel: a low-order polynomial in (s, t) with seeded
/// coefficients.
KernelGrid smooth_kernel(MeshPtr mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const double c0 = sym(rng), c1 = sym(rng), c2 = sym(rng), c3 = sym(rng);
  return sample_kernel(mesh, 1, [=, m = mesh.get()](int us, int ut) {
    const double s = m->time(us), t = m->time(ut);
    return (MatrixXd(1, 1) << c0 + c1 * s + c2 * t + c3 * s * t).finished();
  });
}

double associativity_gap(MeshPtr mesh, unsigned seed) {
  std::mt19937_64 rng(seed);
  KernelGrid K1 = smooth_kernel(mesh, rng);
  KernelGrid K2 = smooth_kernel(mesh, rng);
  KernelGrid K3 = smooth_kernel(mesh, rng);
  const KernelGrid left = kernel_convolve(kernel_convolve(K1, K2), K3);
  const KernelGrid right = kernel_convolve(K1, kernel_convolve(K2, K3));
  return (left - right).sup_norm();
}

}  // namespace

TEST_CASE("convolving two unit kernels gives the time difference") {
  auto mesh = make_mesh(1.0, {0.4}, 21);
  KernelGrid one = constant_kernel(mesh, 1.0);
  KernelGrid conv = kernel_convolve(one, one);
  for (int s = 0; s < mesh->size(); ++s)
    for (int t = 0; t < mesh->size(); ++t) {
      const double want =
          (mesh->time(t) < mesh->time(s)) ? mesh->time(s) - mesh->time(t) : 0.0;
      REQUIRE(std::abs(conv.block_matrix(s, t)(0, 0) - want) < 1e-14);
    }
}

TEST_CASE("convolution with the zero kernel annihilates") {
  auto mesh = make_mesh(1.0, {0.4}, 11);
  KernelGrid one = constant_kernel(mesh, 1.0);
  KernelGrid zero(mesh, 1);
  REQUIRE(kernel_convolve(one, zero).sup_norm() == 0.0);
  REQUIRE(kernel_convolve(zero, one).sup_norm() == 0.0);
  REQUIRE_THROWS_AS(kernel_convolve(one, constant_kernel(make_mesh(1.0, {}, 11), 1.0)),
                    std::invalid_argument);
}

TEST_CASE("convolution is associative up to quadrature error") {
  // endpoint corrections leave an O(h^2) mismatch between the groupings,
  // which halves twice when the panel count doubles
  const double coarse = associativity_gap(make_mesh(1.0, {0.4}, 26), 99);
  const double fine = associativity_gap(make_mesh(1.0, {0.4}, 51), 99);
  REQUIRE(coarse < 1e-2);
  REQUIRE(fine < coarse / 3.0);
}

TEST_CASE("resolvent of the zero kernel is zero") {
  auto mesh = make_mesh(1.0, {}, 11);
  ResolventResult rr = resolvent_kernel(KernelGrid(mesh, 1));
  REQUIRE(rr.converged);
  REQUIRE(rr.R.sup_norm() == 0.0);
  REQUIRE(rr.terms == 1);
}

TEST_CASE("resolvent of the unit kernel is the exponential") {
  auto mesh = make_mesh(1.0, {}, 801);
  KernelGrid one = constant_kernel(mesh, 1.0);
  ResolventResult rr = resolvent_kernel(one, 1e-8);
  REQUIRE(rr.converged);

  double worst = 0.0;
  for (int s = 0; s < mesh->size(); s += 7)
    for (int t = 0; t <= s; t += 7)
      worst = std::max(worst, std::abs(rr.R.block_matrix(s, t)(0, 0) -
                                       std::exp(mesh->time(s) - mesh->time(t))));
  REQUIRE(worst < 1e-6);

  ResolventIdentity id = resolvent_identity_residual(rr.R, one);
  REQUIRE(id.right < 1e-6);
  REQUIRE(id.left < 1e-6);
}

TEST_CASE("resolvent identity residual shrinks with the series tolerance") {
  auto mesh = make_mesh(1.0, {0.4}, 51);
  std::mt19937_64 rng(3);
  KernelGrid K = smooth_kernel(mesh, rng);
  ResolventResult loose = resolvent_kernel(K, 1e-4);
  ResolventResult tight = resolvent_kernel(K, 1e-12);
  ResolventIdentity idl = resolvent_identity_residual(loose.R, K);
  ResolventIdentity idt = resolvent_identity_residual(tight.R, K);
  REQUIRE(idt.right < idl.right);
  REQUIRE(idt.right < 1e-10);
  REQUIRE(idt.left < 1e-10);
  REQUIRE(tight.terms > loose.terms);
}

TEST_CASE("series reports failure when capped too early") {
  auto mesh = make_mesh(1.0, {}, 31);
  KernelGrid big = constant_kernel(mesh, 6.0);
  REQUIRE_THROWS_AS(resolvent_kernel(big, 1e-14, 3), std::runtime_error);
}

TEST_CASE("kernel application reproduces hand quadrature") {
  auto mesh = make_mesh(1.0, {0.5}, 21);
  KernelGrid one = constant_kernel(mesh, 1.0);
  Trajectory f(mesh, 1);
  for (int u = 0; u < mesh->size(); ++u) f.values(u, 0) = 1.0;

  // y(s) = 1 + s for a unit kernel over a unit forcing
  Trajectory y = apply_kernel(one, f);
  for (int u = 0; u < mesh->size(); ++u)
    REQUIRE(std::abs(y.at(u)[0] - (1.0 + mesh->time(u))) < 1e-14);

  // dual direction: y(t) = 1 + (T - t)
  RowField eta(mesh, 1);
  for (int u = 0; u < mesh->size(); ++u) eta.values(u, 0) = 1.0;
  RowField yd = apply_kernel_dual(one, eta);
  for (int u = 0; u < mesh->size(); ++u)
    REQUIRE(std::abs(yd.values(u, 0) - (1.0 + 1.0 - mesh->time(u))) < 1e-14);
}
