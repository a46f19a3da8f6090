#include "sparsestruct/structure.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace sparsestruct {

DataMatrix DataMatrix::from_values(MatrixX<double> values) {
  DataMatrix d;
  d.mask = MaskMatrix::Constant(values.rows(), values.cols(), true);
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    d.object_names.push_back("o" + std::to_string(i));
  for (Eigen::Index k = 0; k < values.cols(); ++k)
    d.feature_names.push_back("f" + std::to_string(k));
  d.values = std::move(values);
  return d;
}

void DataMatrix::validate() const {
  if (mask.rows() != values.rows() || mask.cols() != values.cols())
    throw InvariantError("data: mask and values dimensions differ");
  if (!object_names.empty() &&
      static_cast<Eigen::Index>(object_names.size()) != values.rows())
    throw InvariantError("data: object name count differs from row count");
  if (!feature_names.empty() &&
      static_cast<Eigen::Index>(feature_names.size()) != values.cols())
    throw InvariantError("data: feature name count differs from column count");
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    if (!mask.row(i).any())
      throw DegenerateDataError("data: object " + std::to_string(i) +
                                " has no observed entries");
}

std::vector<MaskGroup> mask_groups(const DataMatrix& data) {
  std::map<std::vector<bool>, std::size_t> index;
  std::vector<MaskGroup> groups;
  const int n = data.n_objects();
  for (int k = 0; k < data.n_features(); ++k) {
    std::vector<bool> pattern(n);
    for (int i = 0; i < n; ++i) pattern[i] = data.mask(i, k);
    auto it = index.find(pattern);
    if (it == index.end()) {
      MaskGroup g;
      for (int i = 0; i < n; ++i)
        if (pattern[i]) g.observed.push_back(i);
      it = index.emplace(pattern, groups.size()).first;
      groups.push_back(std::move(g));
    }
    groups[it->second].columns.push_back(k);
  }
  return groups;
}

void validate(const Structure& s) {
  const int nx = s.n_objects();
  const int nz = s.n_clusters();
  if (s.cluster_edges.cols() != nz)
    throw InvariantError("structure: cluster_edges not square");
  if (s.attach_weights.size() != nx)
    throw InvariantError("structure: attach_weights length differs from n_x");
  if (!(s.sigma2 > 0.0)) throw InvariantError("structure: sigma2 must be > 0");
  std::vector<int> members(nz, 0);
  for (int x = 0; x < nx; ++x) {
    const int z = s.assignment[x];
    if (z < 0 || z >= nz)
      throw InvariantError("structure: object " + std::to_string(x) +
                           " assigned outside [0, n_z)");
    ++members[z];
    if (!(s.attach_weights[x] > 0.0))
      throw InvariantError("structure: attach weight of object " +
                           std::to_string(x) + " not positive");
  }
  for (int z = 0; z < nz; ++z) {
    if (members[z] == 0)
      throw InvariantError("structure: cluster " + std::to_string(z) +
                           " is empty");
    if (s.cluster_edges(z, z) != 0.0)
      throw InvariantError("structure: nonzero cluster_edges diagonal");
    for (int w = z + 1; w < nz; ++w) {
      if (s.cluster_edges(z, w) != s.cluster_edges(w, z))
        throw InvariantError("structure: cluster_edges not symmetric");
      if (s.cluster_edges(z, w) < 0.0)
        throw InvariantError("structure: negative cluster edge");
    }
  }
}

int cluster_edge_count(const Structure& s) {
  int count = 0;
  for (int i = 0; i < s.n_clusters(); ++i)
    for (int j = i + 1; j < s.n_clusters(); ++j)
      if (s.cluster_edges(i, j) > kEdgeFloor) ++count;
  return count;
}

int edge_count(const Structure& s, bool include_attachments) {
  return cluster_edge_count(s) + (include_attachments ? s.n_objects() : 0);
}

std::vector<std::vector<int>> clusters_of(const std::vector<int>& assignment) {
  int nz = 0;
  for (int z : assignment) nz = std::max(nz, z + 1);
  std::vector<std::vector<int>> out(nz);
  for (int x = 0; x < static_cast<int>(assignment.size()); ++x)
    out[assignment[x]].push_back(x);
  return out;
}

std::vector<int> canonical_partition(const std::vector<int>& assignment) {
  std::map<int, int> relabel;
  std::vector<int> out(assignment.size());
  for (std::size_t x = 0; x < assignment.size(); ++x) {
    auto it = relabel.find(assignment[x]);
    if (it == relabel.end())
      it = relabel.emplace(assignment[x], static_cast<int>(relabel.size())).first;
    out[x] = it->second;
  }
  return out;
}

std::uint64_t partition_hash(const std::vector<int>& assignment) {
  std::ostringstream os;
  for (int z : canonical_partition(assignment)) os << z << ',';
  return fnv1a64(os.str());
}

std::string partition_hash_hex(const std::vector<int>& assignment) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(partition_hash(assignment)));
  return buf;
}

Structure canonicalize(const Structure& s) {
  const std::vector<int> canon = canonical_partition(s.assignment);
  const int nz = s.n_clusters();
  std::vector<int> old_of_new(nz, -1);
  for (std::size_t x = 0; x < canon.size(); ++x)
    old_of_new[canon[x]] = s.assignment[x];
  Structure out;
  out.assignment = canon;
  out.attach_weights = s.attach_weights;
  out.sigma2 = s.sigma2;
  out.cluster_edges = MatrixX<double>::Zero(nz, nz);
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j)
      out.cluster_edges(i, j) = s.cluster_edges(old_of_new[i], old_of_new[j]);
  return out;
}

void apply_edge_floor(Structure& s) {
  const int nz = s.n_clusters();
  for (int i = 0; i < nz; ++i) {
    s.cluster_edges(i, i) = 0.0;
    for (int j = i + 1; j < nz; ++j) {
      double v = 0.5 * (s.cluster_edges(i, j) + s.cluster_edges(j, i));
      if (v < kEdgeFloor) v = 0.0;
      s.cluster_edges(i, j) = s.cluster_edges(j, i) = v;
    }
  }
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> cluster_adjacency(
    const Structure& s) {
  return s.cluster_edges.array() > kEdgeFloor;
}

}  // namespace sparsestruct
