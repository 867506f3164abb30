#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <random>

#include "voltra/voltra.hpp"

using namespace voltra;

namespace {

/// Random factor table over index pairs 1 <= from < to <= i_max.
std::map<std::pair<int, int>, MatrixXd> random_factors(int i_max, int n,
                                                       std::mt19937_64& rng,
                                                       bool dyadic) {
  std::map<std::pair<int, int>, MatrixXd> fs;
  std::uniform_int_distribution<int> quarters(-2, 2);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (int to = 2; to <= i_max; ++to)
    for (int from = 1; from < to; ++from) {
      MatrixXd L(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          L(r, c) = dyadic ? quarters(rng) * 0.25 : sym(rng);
      fs[{to, from}] = L;
    }
  return fs;
}

ChainFactor lookup(const std::map<std::pair<int, int>, MatrixXd>& fs) {
  return [&fs](int to, int from) { return fs.at({to, from}); };
}

}  // namespace

TEST_CASE("chain enumeration counts and shape") {
  REQUIRE(enumerate_paths(3, 3).size() == 1);
  REQUIRE(enumerate_paths(3, 3)[0] == IndexPath{3});
  REQUIRE(enumerate_paths(1, 4).size() == 4);
  REQUIRE(enumerate_paths(4, 1).empty());
  REQUIRE(enumerate_paths(0, 3).empty());

  for (int j = 1; j <= 6; ++j)
    for (int i = j + 1; i <= 8; ++i) {
      const auto paths = enumerate_paths(j, i);
      REQUIRE(paths.size() == (1u << (i - j - 1)));
      for (const IndexPath& p : paths) {
        REQUIRE(p.front() == j);
        REQUIRE(p.back() == i);
        for (std::size_t k = 1; k < p.size(); ++k) REQUIRE(p[k] > p[k - 1]);
      }
    }

  REQUIRE_THROWS_AS(enumerate_paths(1, 30), std::invalid_argument);
}

TEST_CASE("scalar chain sums have closed forms") {
  const double c = 0.5;
  ChainFactor constant = [c](int, int) { return (MatrixXd(1, 1) << c).finished(); };
  PathSumTable table(constant, 6, 1);
  REQUIRE(table.at(1, 3)(0, 0) == c * c + c);
  REQUIRE(table.at(2, 2)(0, 0) == 1.0);

  ChainFactor ones = [](int, int) { return (MatrixXd(1, 1) << 1.0).finished(); };
  PathSumTable to2(ones, 9, 1);
  for (int j = 1; j <= 9; ++j)
    for (int i = j; i <= 9; ++i) {
      const double want = (i == j) ? 1.0 : std::pow(2.0, i - j - 1);
      REQUIRE(to2.at(j, i)(0, 0) == want);
    }
}

TEST_CASE("recursion reproduces brute-force enumeration") {
  std::mt19937_64 rng(42);

  // dyadic factors keep every product and sum exact, so the two routes
  // must agree bit for bit
  for (int rep = 0; rep < 3; ++rep) {
    const auto fs = random_factors(8, 2, rng, true);
    ChainFactor factor = lookup(fs);
    PathSumTable table(factor, 8, 2);
    for (int j = 1; j <= 8; ++j)
      for (int i = j; i <= 8; ++i) {
        const MatrixXd want = path_sum_direct(j, i, factor, 2);
        REQUIRE((table.at(j, i) - want).cwiseAbs().maxCoeff() == 0.0);
      }
  }

  // generic real factors agree to rounding noise
  for (int rep = 0; rep < 3; ++rep) {
    const auto fs = random_factors(8, 2, rng, false);
    ChainFactor factor = lookup(fs);
    PathSumTable table(factor, 8, 2);
    for (int j = 1; j <= 8; ++j)
      for (int i = j; i <= 8; ++i) {
        const MatrixXd want = path_sum_direct(j, i, factor, 2);
        const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
        REQUIRE((table.at(j, i) - want).cwiseAbs().maxCoeff() / scale < 1e-13);
      }
  }
}

TEST_CASE("path weights multiply later factors from the left") {
  MatrixXd A(2, 2), B(2, 2);
  A << 1, 2, 3, 4;
  B << 0, 1, -1, 0;
  std::map<std::pair<int, int>, MatrixXd> fs;
  fs[{2, 1}] = A;
  fs[{3, 2}] = B;
  fs[{3, 1}] = MatrixXd::Zero(2, 2);
  const MatrixXd W = path_weight({1, 2, 3}, lookup(fs), 2);
  REQUIRE((W - B * A).cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd I = path_weight({2}, lookup(fs), 2);
  REQUIRE((I - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("table rejects out-of-range index pairs") {
  ChainFactor ones = [](int, int) { return (MatrixXd(1, 1) << 1.0).finished(); };
  PathSumTable table(ones, 4, 1);
  REQUIRE_THROWS_AS(table.at(0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(table.at(3, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(table.at(1, 5), std::invalid_argument);
}
