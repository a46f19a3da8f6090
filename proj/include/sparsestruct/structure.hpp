#ifndef SPARSESTRUCT_STRUCTURE_HPP_
#define SPARSESTRUCT_STRUCTURE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sparsestruct/common.hpp"

namespace sparsestruct {

// Edge strengths below this are solver round-off and count as absent.
inline constexpr double kEdgeFloor = 1e-12;

/// A graph hypothesis over n_x objects and n_z cluster nodes.
///
/// Node order in every n_t x n_t matrix is objects first (0..n_x-1), then
/// cluster nodes (n_x..n_t-1). Each object has exactly one edge, to its
/// assigned cluster, with strength attach_weights[x] > 0.
template <typename Scalar>
struct BasicStructure {
  std::vector<int> assignment;
  MatrixX<Scalar> cluster_edges;   // symmetric n_z x n_z, zero diagonal
  VectorX<Scalar> attach_weights;  // n_x
  Scalar sigma2 = Scalar(1);

  int n_objects() const { return static_cast<int>(assignment.size()); }
  int n_clusters() const { return static_cast<int>(cluster_edges.rows()); }
  int n_nodes() const { return n_objects() + n_clusters(); }

  template <typename Other>
  BasicStructure<Other> cast() const {
    BasicStructure<Other> out;
    out.assignment = assignment;
    out.cluster_edges = cluster_edges.template cast<Other>();
    out.attach_weights = attach_weights.template cast<Other>();
    out.sigma2 = static_cast<Other>(sigma2);
    return out;
  }
};

using Structure = BasicStructure<double>;

struct StructureScore {
  double loglik = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// Observed data: n_x objects by m features, mask(i, k) true when observed.
struct DataMatrix {
  MatrixX<double> values;
  MaskMatrix mask;
  std::vector<std::string> object_names;
  std::vector<std::string> feature_names;

  int n_objects() const { return static_cast<int>(values.rows()); }
  int n_features() const { return static_cast<int>(values.cols()); }
  bool complete() const { return mask.all(); }

  /// Fully observed matrix with generated names.
  static DataMatrix from_values(MatrixX<double> values);

  /// Dimensions agree and every object has at least one observation.
  void validate() const;
};

/// Columns sharing one missingness pattern.
struct MaskGroup {
  std::vector<int> observed;  // object indices observed in these columns
  std::vector<int> columns;
};

/// Groups columns by mask pattern, ordered by first column index so the
/// summation order is fixed.
std::vector<MaskGroup> mask_groups(const DataMatrix& data);

/// Throws InvariantError naming the violated condition.
void validate(const Structure& s);

int cluster_edge_count(const Structure& s);

/// #S; attachments add exactly n_x when included.
int edge_count(const Structure& s, bool include_attachments = true);

std::vector<std::vector<int>> clusters_of(const std::vector<int>& assignment);

/// Relabels clusters in order of their smallest member object.
std::vector<int> canonical_partition(const std::vector<int>& assignment);

/// Hash of the canonical partition; invariant under cluster relabeling.
std::uint64_t partition_hash(const std::vector<int>& assignment);
std::string partition_hash_hex(const std::vector<int>& assignment);

/// Structure with canonical cluster order and cluster_edges permuted to match.
Structure canonicalize(const Structure& s);

/// Zeroes cluster edges below kEdgeFloor and re-symmetrizes.
void apply_edge_floor(Structure& s);

/// Boolean cluster adjacency (s_ij > kEdgeFloor).
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> cluster_adjacency(
    const Structure& s);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_STRUCTURE_HPP_
