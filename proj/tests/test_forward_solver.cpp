#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "voltra/voltra.hpp"

using namespace voltra;

TEST_CASE("constant forcing with no dynamics stays constant") {
  BuiltinProblem b = make_builtin("null");
  auto mesh = make_mesh(b.T, b.tau, b.ppi);
  Trajectory x = solve_marching(b.spec, b.policy, mesh);
  for (int u = 0; u < mesh->size(); ++u) REQUIRE(x.at(u)[0] == 1.0);

  PicardResult pr = solve_picard(b.spec, b.policy, mesh);
  REQUIRE(pr.converged);
  REQUIRE(pr.x.sup_distance(x) == 0.0);
  REQUIRE(equation_residual(b.spec, b.policy, x) == 0.0);
}

TEST_CASE("multiplicative jumps compound the boundary values exactly") {
  BuiltinProblem b = make_builtin("pure-jump");
  auto mesh = make_mesh(b.T, b.tau, b.ppi);
  Trajectory x = solve_marching(b.spec, b.policy, mesh);
  REQUIRE(x.left_limit(1)[0] == 1.0);
  REQUIRE(x.left_limit(2)[0] == 2.0);
  REQUIRE(x.left_limit(3)[0] == 4.0);
  REQUIRE(x.right_limit(1)[0] == 2.0);
  REQUIRE(x.right_limit(2)[0] == 4.0);

  // generic jump gain: the cascade 1, 1+c, (1+c)^2
  const double c = 0.37;
  BuiltinProblem bc = make_builtin("pure-jump", {{"c", c}});
  Trajectory xc = solve_marching(bc.spec, bc.policy, mesh);
  REQUIRE(std::abs(xc.left_limit(1)[0] - 1.0) == 0.0);
  REQUIRE(std::abs(xc.left_limit(2)[0] - (1.0 + c)) < 1e-15);
  REQUIRE(std::abs(xc.left_limit(3)[0] - (1.0 + c) * (1.0 + c)) < 1e-15);

  // the control-difference kick enters through d (b - a)
  BuiltinProblem bd = make_builtin("pure-jump");
  bd.policy.a[0][0] = 0.0;
  bd.policy.a[1][0] = 1.0;
  bd.policy.a[2][0] = 1.0;
  Trajectory xd = solve_marching(bd.spec, bd.policy, mesh);
  REQUIRE(std::abs(xd.right_limit(1)[0] - (1.0 + 1.0 + 0.25)) < 1e-15);
}

TEST_CASE("unit growth kernel reproduces the exponential") {
  BuiltinProblem b = make_builtin("exp-kernel");
  auto mesh = make_mesh(b.T, b.tau, b.ppi);
  Trajectory x = solve_marching(b.spec, b.policy, mesh);
  double worst = 0.0;
  for (int u = 0; u < mesh->size(); ++u)
    worst = std::max(worst, std::abs(x.at(u)[0] - std::exp(mesh->time(u))));
  REQUIRE(worst < 1e-5);

  // total cost at zero control is the terminal value
  REQUIRE(std::abs(eval_cost(b.spec, b.policy, x) - std::exp(1.0)) < 1e-4);
}

TEST_CASE("marching and successive substitution agree") {
  for (const char* name : {"pure-jump", "exp-kernel", "memory-decay"}) {
    BuiltinProblem b = make_builtin(name);
    auto mesh = make_mesh(b.T, b.tau, 101);
    SolverConfig cfg;
    cfg.tol = 1e-8;
    Trajectory x = solve_marching(b.spec, b.policy, mesh, cfg);
    PicardResult pr = solve_picard(b.spec, b.policy, mesh, cfg);
    REQUIRE(pr.converged);
    REQUIRE(x.sup_distance(pr.x) < 1e-6);
  }
}

TEST_CASE("iteration steps decay geometrically once past the transient") {
  BuiltinProblem b = make_builtin("memory-decay");
  auto mesh = make_mesh(b.T, b.tau, 101);
  SolverConfig cfg;
  cfg.tol = 1e-10;
  PicardResult pr = solve_picard(b.spec, b.policy, mesh, cfg);
  REQUIRE(pr.converged);
  REQUIRE(pr.step_norms.size() >= 4);
  for (std::size_t k = 1; k + 1 < pr.step_norms.size(); ++k) {
    if (pr.step_norms[k] < 1e-13) break;
    REQUIRE(pr.step_norms[k + 1] < 0.999 * pr.step_norms[k]);
  }
}

TEST_CASE("solution residual sits at the solver tolerance") {
  BuiltinProblem b = make_builtin("memory-decay");
  auto mesh = make_mesh(b.T, b.tau, 101);
  Trajectory x = solve_marching(b.spec, b.policy, mesh);
  REQUIRE(equation_residual(b.spec, b.policy, x) < 1e-9);
}

TEST_CASE("one-sided values straddle each switch by the jump map") {
  BuiltinProblem b = make_builtin("memory-decay");
  auto mesh = make_mesh(b.T, b.tau, 101);
  Trajectory x = solve_marching(b.spec, b.policy, mesh);
  for (int i = 1; i <= mesh->n_switches(); ++i) {
    const double ti = mesh->switch_times()[i - 1];
    const VectorXd gap = x.right_limit(i) - x.left_limit(i) -
                         b.spec.G(ti, ti, x.left_limit(i), b.policy.a[i - 1], b.policy.a[i]);
    REQUIRE(gap.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("weighted-norm certificate matches its closed form") {
  const std::vector<double> tau = {1.0 / 3.0, 2.0 / 3.0};

  for (double mu : {0.1, 50.0}) {
    ContractionCertificate c = contraction_certificate(1.0, 1.0, 1.0, tau, mu);
    const double a11 = (1.0 - std::exp(-mu)) / mu;
    const double a21 = (1.0 - std::exp(-mu * tau[1])) / mu;
    const double a22 = std::exp(-mu / 3.0);
    const double a12 = 1.0 + std::exp(-mu / 3.0);
    REQUIRE(std::abs(c.a11 - a11) < 1e-12);
    REQUIRE(std::abs(c.a21 - a21) < 1e-12);
    REQUIRE(std::abs(c.a22 - a22) < 1e-12);
    REQUIRE(std::abs(c.a12 - a12) < 1e-12);
  }
  REQUIRE(!contraction_certificate(1.0, 1.0, 1.0, tau, 0.1).spectral_ok);
  REQUIRE(contraction_certificate(1.0, 1.0, 1.0, tau, 50.0).spectral_ok);

  // frozen value, independent of the formula's arrangement
  ContractionCertificate f = contraction_certificate(1.0, 0.0, 1.0, {}, 10.0);
  REQUIRE(std::abs(f.a11 - 0.0999954600070238) < 1e-13);
  REQUIRE(f.a12 == 0.0);
  REQUIRE(f.a21 == 0.0);
  REQUIRE(f.a22 == 0.0);

  // one switch: no switch-to-switch coupling remains
  ContractionCertificate one = contraction_certificate(0.5, 0.7, 1.0, {0.4}, 2.0);
  REQUIRE(one.a22 == 0.0);
  REQUIRE(std::abs(one.a12 - 0.7) < 1e-15);

  REQUIRE_THROWS_AS(contraction_certificate(1.0, 1.0, 1.0, tau, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(contraction_certificate(-1.0, 1.0, 1.0, tau, 1.0), std::invalid_argument);
}

TEST_CASE("rate search certifies the dissipative catalog entries") {
  BuiltinProblem b = make_builtin("memory-decay");
  auto cert = find_contractive_rate(b.spec.C_f, b.spec.C_G, b.T, b.tau);
  REQUIRE(cert.has_value());
  REQUIRE(cert->spectral_ok);

  auto certe = find_contractive_rate(1.0, 0.0, 1.0, {});
  REQUIRE(certe.has_value());
  REQUIRE(certe->mu == 1.0);
}

TEST_CASE("supplied partial derivatives match finite differences") {
  for (const std::string& name : builtin_names()) {
    BuiltinProblem b = make_builtin(name);
    DerivativeReport rep = validate_derivatives(b.spec, b.T, b.tau, b.box);
    INFO(name << " worst " << rep.worst());
    REQUIRE(rep.pass(2e-5));
  }
}

TEST_CASE("solvers reject a policy sized for a different mesh") {
  BuiltinProblem b = make_builtin("pure-jump");
  auto mesh = make_mesh(b.T, b.tau, 11);
  ControlPolicy wrong(2, 1);
  REQUIRE_THROWS_AS(solve_marching(b.spec, wrong, mesh), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_picard(b.spec, wrong, mesh), std::invalid_argument);
}

TEST_CASE("catalog rejects unknown names and parameters") {
  REQUIRE_THROWS_AS(make_builtin("does-not-exist"), std::invalid_argument);
  REQUIRE_THROWS_AS(make_builtin("pure-jump", {{"bogus", 1.0}}), std::invalid_argument);
  REQUIRE_NOTHROW(make_builtin("pure-jump", {{"c", 0.5}}));
}
