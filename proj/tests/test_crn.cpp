#include <doctest.h>

#include <random>

#include "kacrice/crn.hpp"

using namespace kacrice;

namespace {

std::string data(const std::string& name) { return std::string(KACRICE_DATA_DIR) + "/" + name; }

const std::vector<std::string> kNetworks = {"hk.net", "joshi.net", "ext_hk.net", "dualphos.net"};

Eigen::VectorXd random_point(std::size_t dim, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::VectorXd p(static_cast<Eigen::Index>(dim));
  for (auto& v : p) v = u(gen);
  return p;
}

}  // namespace

TEST_CASE("network parsing") {
  const auto net = parse_network("2 X1 + X2 -> 3 X1 ; k1\nX1 -> 0 ; k2 # decay\n");
  CHECK(net.species == std::vector<std::string>{"X1", "X2"});
  REQUIRE(net.n_reactions() == 2);
  CHECK(net.reactions[0].reactant == std::vector<int>{2, 1});
  CHECK(net.reactions[0].product == std::vector<int>{3, 0});
  CHECK(net.reactions[1].product == std::vector<int>{0, 0});

  const auto fixed = parse_network("species: B A\nA -> B ; k\n");
  CHECK(fixed.species == std::vector<std::string>{"B", "A"});

  auto fails_at = [](const char* text, std::size_t line, std::size_t column) {
    try {
      parse_network(text);
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      if (column != 0) CHECK(e.column() == column);
      return;
    }
    FAIL("no ParseError for: " << text);
  };
  fails_at("X1 -> X2 ; k1\n2 -> X1 ; k2\n", 2, 3);
  fails_at("X1 -> X2 ; k1\nX2 -> X1 ; k1\n", 2, 0);
  fails_at("X1 + X2 -> X2 + X1 ; k1\n", 1, 0);
  fails_at("X1 -> X2 k1\n", 1, 0);
  fails_at("X1 X2 -> X3 ; k1\n", 1, 4);
  CHECK_THROWS_AS(parse_network("# nothing\n"), ParseError);
}

TEST_CASE("stoichiometric matrix of the bistable two-species network") {
  const auto net = read_network_file(data("joshi.net"));
  const IntMatrix N = stoichiometric_matrix(net);
  IntMatrix expected(2, 4);
  expected << 1, -2, -1, 2, -1, 2, 1, -2;
  CHECK(N == expected);
  const RatMatrix W = conservation_basis(N);
  REQUIRE(W.rows() == 1);
  CHECK(W(0, 0) == 1);
  CHECK(W(0, 1) == 1);
}

TEST_CASE("exact linear algebra") {
  RatMatrix a(2, 2);
  a << Rat(2), Rat(1), Rat(1), Rat(1);
  const RatMatrix inv = inverse(a);
  CHECK(inv(0, 0) == 1);
  CHECK(inv(0, 1) == -1);
  CHECK(inv(1, 0) == -1);
  CHECK(inv(1, 1) == 2);
  const RatMatrix id = multiply(a, inv);
  CHECK(id(0, 0) == 1);
  CHECK(id(0, 1) == 0);
  RatMatrix s(2, 2);
  s << Rat(1), Rat(2), Rat(2), Rat(4);
  CHECK(rank(s) == 1);
  CHECK_THROWS_AS(inverse(s), Error);
}

TEST_CASE("conservation laws annihilate N on every corpus network") {
  for (const auto& name : kNetworks) {
    CAPTURE(name);
    const IntMatrix N = stoichiometric_matrix(read_network_file(data(name)));
    const RatMatrix W = conservation_basis(N);
    const RatMatrix WN = multiply(W, to_rational(N));
    for (Eigen::Index i = 0; i < WN.rows(); ++i)
      for (Eigen::Index j = 0; j < WN.cols(); ++j) CHECK(WN(i, j) == 0);
    CHECK(W.rows() + rank(to_rational(N)) == N.rows());
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      Eigen::Index first = 0;
      while (W(i, first) == 0) ++first;
      CHECK(W(i, first) > 0);
      for (Eigen::Index j = 0; j < W.cols(); ++j) CHECK(denominator(W(i, j)) == 1);
    }
  }
}

TEST_CASE("mass-action right-hand side") {
  const auto net = read_network_file(data("hk.net"));
  const auto F = mass_action_rhs(net);
  const VarSpace space = network_space(net, 2);
  REQUIRE(F.size() == 6);
  CHECK(F[0] == parse_polynomial("k4*x3*x5 - k1*x1", space));
  CHECK(F[5] == parse_polynomial("k4*x3*x5 + k5*x4*x5 - k6*x6", space));
}

TEST_CASE("reduced system of the hybrid histidine kinase network") {
  const auto net = read_network_file(data("hk.net"));
  const auto red = reduced_system(net);
  CHECK(red.sys.equations.size() == 6);
  CHECK(red.sys.space.n() == 6);
  CHECK(red.sys.space.m() == 8);
  CHECK(red.linear_params.size() == 6);
  CHECK(red.linear_params[4] == "T1");
  CHECK(red.linear_params[5] == "T2");
  for (std::size_t j = 0; j < 4; ++j) CHECK(red.linear_params[j].front() == 'k');
  REQUIRE(red.sys.bounds.size() == 6);
  CHECK(red.sys.bounds[0].kind == BoundHint::Kind::ParamUpper);
  CHECK(red.sys.bounds[4].kind == BoundHint::Kind::ParamUpper);
  CHECK_NOTHROW(decompose_linear(red.sys, red.linear_params));
}

TEST_CASE("reduced system of the bistable two-species network") {
  const auto net = read_network_file(data("joshi.net"));
  const auto red = reduced_system(net);
  const VarSpace& space = red.sys.space;
  REQUIRE(red.sys.equations.size() == 2);
  CHECK(red.sys.equations[0] == parse_polynomial("k1*x1^2*x2 - 2*k2*x1^3 - k3*x1*x2^2 + 2*k4*x2^3", space));
  CHECK(red.sys.equations[1] == parse_polynomial("x1 + x2 - T1", space));
  CHECK(red.linear_params == std::vector<std::string>{"k1", "T1"});
}

TEST_CASE("single reaction network") {
  const auto red = reduced_system(parse_network("X1 -> X2 ; k1\n"));
  const VarSpace& space = red.sys.space;
  REQUIRE(red.sys.equations.size() == 2);
  CHECK(red.sys.equations[0] == parse_polynomial("k1*x1", space));
  CHECK(red.sys.equations[1] == parse_polynomial("x1 + x2 - T1", space));
}

TEST_CASE("explicit reaction columns") {
  const auto net = read_network_file(data("hk.net"));
  const auto red = reduced_system(net, std::vector<std::size_t>{0, 1, 2, 5});
  CHECK(red.columns == std::vector<std::size_t>{0, 1, 2, 5});
  CHECK_THROWS_AS(reduced_system(net, std::vector<std::size_t>{0, 1, 2}), NoFullRankColumnSet);
  // A repeated column gives a singular submatrix.
  CHECK_THROWS_AS(reduced_system(net, std::vector<std::size_t>{0, 0, 1, 2}), NoFullRankColumnSet);
}

TEST_CASE("reduced equations are the inverse-scaled kept rows of the rhs") {
  std::mt19937_64 gen(7);
  for (const auto& name : kNetworks) {
    CAPTURE(name);
    const auto net = read_network_file(data(name));
    const auto red = reduced_system(net);
    const auto F = mass_action_rhs(net);
    const IntMatrix N = stoichiometric_matrix(net);
    RatMatrix sub(static_cast<Eigen::Index>(red.rows.size()), static_cast<Eigen::Index>(red.columns.size()));
    for (std::size_t i = 0; i < red.rows.size(); ++i)
      for (std::size_t j = 0; j < red.columns.size(); ++j)
        sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            Rat(N(static_cast<Eigen::Index>(red.rows[i]), static_cast<Eigen::Index>(red.columns[j])));
    // sub * G = F restricted to the kept rows, so both vanish together.
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd p = random_point(red.sys.space.dim(), gen);
      for (std::size_t i = 0; i < red.rows.size(); ++i) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < red.columns.size(); ++j)
          lhs += static_cast<double>(sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) *
                 red.sys.equations[j].evaluate(p);
        const double rhs = F[red.rows[i]].evaluate(p);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      }
    }
    CHECK_NOTHROW(decompose_linear(red.sys, red.linear_params));
  }
}
