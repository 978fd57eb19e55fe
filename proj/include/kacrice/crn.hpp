#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kacrice/system.hpp"

namespace kacrice {

using Rat = boost::multiprecision::cpp_rational;
using RatMatrix = Eigen::Matrix<Rat, Eigen::Dynamic, Eigen::Dynamic>;
using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

struct Reaction {
  std::vector<int> reactant;  // stoichiometric coefficients, one per species
  std::vector<int> product;
  std::string rate;
};

struct ReactionNetwork {
  std::vector<std::string> species;
  std::vector<Reaction> reactions;

  std::size_t n_species() const { return species.size(); }
  std::size_t n_reactions() const { return reactions.size(); }
};

/// Reads lines `2 X1 + X2 -> 3 X1 ; k1`. Species are numbered in order of
/// first appearance unless a `species: A B C` line fixes the order. `0`
/// denotes the empty complex; `#` starts a comment.
ReactionNetwork parse_network(std::string_view text);
ReactionNetwork read_network_file(const std::string& path);

/// N[i][j] = product_ij - reactant_ij.
IntMatrix stoichiometric_matrix(const ReactionNetwork& net);

/// Exact row reduction to reduced row echelon form; returns the pivot columns.
std::vector<Eigen::Index> rref(RatMatrix& m);
Eigen::Index rank(RatMatrix m);
/// Throws Error if m is singular.
RatMatrix inverse(const RatMatrix& m);
RatMatrix to_rational(const IntMatrix& m);
RatMatrix multiply(const RatMatrix& a, const RatMatrix& b);

/// Rows form a basis of the left kernel of N with coprime integer entries.
/// Nonnegative minimal conservation laws are used when they span the
/// kernel, ordered by first species involved; otherwise the basis comes
/// from the echelon form and each row has a positive leading entry.
RatMatrix conservation_basis(const IntMatrix& N);

/// Variable space shared by the network polynomials: lower-cased species
/// names as variables, then the rate labels and T1..Td as parameters.
VarSpace network_space(const ReactionNetwork& net, std::size_t n_conservation);

/// Mass-action right-hand side, one polynomial per species, over
/// network_space(net, d) with d the number of conservation laws.
std::vector<Poly> mass_action_rhs(const ReactionNetwork& net);

struct ReducedSystem {
  ParametrizedSystem sys;
  std::vector<std::string> linear_params;  // chosen rate constants, then T1..Td
  std::vector<std::size_t> rows;           // species rows of N kept
  std::vector<std::size_t> columns;        // reactions whose constants are linear
  RatMatrix W;                             // conservation laws
};

class NoFullRankColumnSet : public Error {
 public:
  using Error::Error;
};

/// Square steady-state system: the kept rows of N, left-multiplied by the
/// inverse of their restriction to the chosen columns, followed by the
/// conservation laws W x - T. Rows and columns are chosen greedily (first
/// valid) unless `columns` is given. The domain is the positive orthant and
/// every parameter interval is [0,1] unless `param_box` is supplied.
ReducedSystem reduced_system(const ReactionNetwork& net, std::optional<std::vector<std::size_t>> columns = std::nullopt,
                             std::optional<Box> param_box = std::nullopt);

}  // namespace kacrice
