#ifndef SPARSESTRUCT_FORM_IDENTIFIER_HPP_
#define SPARSESTRUCT_FORM_IDENTIFIER_HPP_

#include <bitset>
#include <optional>
#include <string>
#include <vector>

#include "sparsestruct/structure.hpp"

namespace sparsestruct {

using BoolAdjacency = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Reachability over the nodes other than `excluded`; reflexive on included
/// nodes, rows and columns of the excluded node are all false.
BoolAdjacency transitive_closure(const BoolAdjacency& r,
                                 std::optional<int> excluded = std::nullopt);

struct ClusterRelation {
  BoolAdjacency r;
  BoolAdjacency t;

  explicit ClusterRelation(BoolAdjacency adjacency);
  static ClusterRelation of(const Structure& s);

  int size() const { return static_cast<int>(r.rows()); }
  int degree(int x) const;
  BoolAdjacency t_minus(int x) const { return transitive_closure(r, x); }
};

enum class Form { kClusters, kChain, kRing, kTree };

std::string form_name(Form f);

// Bit i holds law i+1:
//   1 no edges              4 every edge endpoint has degree 1 or 2
//   2 some node of degree 1 5 connected
//   3 every edge endpoint   6 no cycles
//     has degree 2
using LawSet = std::bitset<6>;

struct FormLabel {
  Form form;
  LawSet laws;
};

LawSet evaluate_laws(const ClusterRelation& rel);

/// Every form whose law conjunction holds; may be empty or have several.
std::vector<FormLabel> check_laws(const ClusterRelation& rel);
std::vector<FormLabel> check_laws(const Structure& s);

/// The quantified formulas evaluated literally with nested loops over nodes.
/// Slow; kept as a reference for tests.
LawSet brute_force_laws(const BoolAdjacency& r);

std::vector<Form> forms_from_laws(const LawSet& laws);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_FORM_IDENTIFIER_HPP_
