#include "sparsestruct/form_identifier.hpp"

#include <deque>

namespace sparsestruct {

namespace {

void check_relation(const BoolAdjacency& r) {
  if (r.rows() != r.cols()) throw InvariantError("cluster relation: not square");
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (r(i, i)) throw InvariantError("cluster relation: self edge");
    for (Eigen::Index j = i + 1; j < r.rows(); ++j)
      if (r(i, j) != r(j, i)) throw InvariantError("cluster relation: not symmetric");
  }
}

// Closure by repeated boolean squaring of (I + R).
BoolAdjacency closure_by_squaring(const BoolAdjacency& r, int excluded) {
  const int n = static_cast<int>(r.rows());
  BoolAdjacency c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      c(i, j) = i != excluded && j != excluded && (i == j || r(i, j));
  for (int len = 1; len < n; len *= 2) {
    BoolAdjacency next = BoolAdjacency::Constant(n, n, false);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (c(i, k))
          for (int j = 0; j < n; ++j) next(i, j) = next(i, j) || c(k, j);
    c = next;
  }
  return c;
}

}  // namespace

BoolAdjacency transitive_closure(const BoolAdjacency& r, std::optional<int> excluded) {
  check_relation(r);
  const int n = static_cast<int>(r.rows());
  const int skip = excluded.value_or(-1);
  BoolAdjacency t = BoolAdjacency::Constant(n, n, false);
  std::vector<int> comp(n, -1);
  for (int s = 0; s < n; ++s) {
    if (s == skip || comp[s] >= 0) continue;
    std::vector<int> members{s};
    comp[s] = s;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v = 0; v < n; ++v)
        if (v != skip && r(u, v) && comp[v] < 0) {
          comp[v] = s;
          members.push_back(v);
          queue.push_back(v);
        }
    }
    for (int a : members)
      for (int b : members) t(a, b) = true;
  }
  return t;
}

ClusterRelation::ClusterRelation(BoolAdjacency adjacency)
    : r(std::move(adjacency)), t(transitive_closure(r)) {}

ClusterRelation ClusterRelation::of(const Structure& s) {
  return ClusterRelation(cluster_adjacency(s));
}

int ClusterRelation::degree(int x) const { return static_cast<int>(r.row(x).count()); }

std::string form_name(Form f) {
  switch (f) {
    case Form::kClusters: return "Clusters";
    case Form::kChain: return "Chain";
    case Form::kRing: return "Ring";
    case Form::kTree: return "Tree";
  }
  return "?";
}

LawSet evaluate_laws(const ClusterRelation& rel) {
  const int n = rel.size();
  LawSet laws;
  bool no_edges = true;
  bool has_leaf = false;
  bool ring_degrees = true;
  bool chain_degrees = true;
  for (int x = 0; x < n; ++x) {
    const int d = rel.degree(x);
    no_edges = no_edges && d == 0;
    has_leaf = has_leaf || d == 1;
    ring_degrees = ring_degrees && (d == 0 || d == 2);
    chain_degrees = chain_degrees && d <= 2;
  }
  laws[0] = no_edges;
  laws[1] = has_leaf;
  laws[2] = ring_degrees;
  laws[3] = chain_degrees;
  laws[4] = rel.t.all();

  // Acyclic iff no node has two neighbours still joined once it is removed.
  bool acyclic = true;
  for (int x = 0; x < n && acyclic; ++x) {
    if (rel.degree(x) < 2) continue;
    const BoolAdjacency tm = rel.t_minus(x);
    for (int y = 0; y < n && acyclic; ++y) {
      if (!rel.r(x, y)) continue;
      for (int z = y + 1; z < n; ++z)
        if (rel.r(x, z) && tm(y, z)) {
          acyclic = false;
          break;
        }
    }
  }
  laws[5] = acyclic;
  return laws;
}

std::vector<Form> forms_from_laws(const LawSet& laws) {
  std::vector<Form> out;
  if (laws[0]) out.push_back(Form::kClusters);
  if (laws[1] && laws[3] && laws[4]) out.push_back(Form::kChain);
  if (laws[2] && laws[4]) out.push_back(Form::kRing);
  if (laws[4] && laws[5]) out.push_back(Form::kTree);
  return out;
}

std::vector<FormLabel> check_laws(const ClusterRelation& rel) {
  const LawSet laws = evaluate_laws(rel);
  std::vector<FormLabel> out;
  for (Form f : forms_from_laws(laws)) out.push_back({f, laws});
  return out;
}

std::vector<FormLabel> check_laws(const Structure& s) {
  validate(s);
  return check_laws(ClusterRelation::of(s));
}

LawSet brute_force_laws(const BoolAdjacency& r) {
  check_relation(r);
  const int n = static_cast<int>(r.rows());
  const BoolAdjacency t = closure_by_squaring(r, -1);
  auto R = [&](int a, int b) { return static_cast<bool>(r(a, b)); };

  // #{z : z != y and R(x, z)}
  auto others = [&](int x, int y) {
    int c = 0;
    for (int z = 0; z < n; ++z)
      if (z != y && R(x, z)) ++c;
    return c;
  };

  LawSet laws;

  bool l1 = true;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (R(x, y)) l1 = false;
  laws[0] = l1;

  bool l2 = false;
  for (int x = 0; x < n; ++x) {
    int count = 0;
    for (int y = 0; y < n; ++y)
      if (R(x, y)) ++count;
    if (count == 1) l2 = true;
  }
  laws[1] = l2;

  bool l3 = true;
  bool l4 = true;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (!R(x, y)) continue;
      const int c = others(x, y);
      if (c != 1) l3 = false;
      if (!(c == 1 || c == 0)) l4 = false;
    }
  laws[2] = l3;
  laws[3] = l4;

  bool l5 = true;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (!t(x, y)) l5 = false;
  laws[4] = l5;

  bool l6 = true;
  for (int x = 0; x < n; ++x) {
    const BoolAdjacency tx = closure_by_squaring(r, x);
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z)
        if (R(x, y) && R(x, z) && y != z && tx(y, z)) l6 = false;
  }
  laws[5] = l6;
  return laws;
}

}  // namespace sparsestruct
