#pragma once

#include <cstdint>
#include <vector>

#include "cdecf/dataset.hpp"
#include "cdecf/matrix.hpp"

namespace cdecf {

/// Symmetric-normalized bipartite adjacency over U+I nodes in CSR form.
/// Users occupy rows [0, U), items rows [U, U+I). Edge (u, i) carries
/// 1/sqrt(deg(u) * deg(i)); the diagonal is zero. Built from TRAIN edges
/// only, so items seen only in validation/test have empty rows.
struct NormalizedAdjacency {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::size_t node_count() const { return num_users + num_items; }

  static NormalizedAdjacency build(const InteractionDataset& dataset);

  /// out = A * X. Rows traversed in index order, nonzeros in CSR order
  /// (bit-deterministic).
  void multiply(const Matrix& x, Matrix& out) const;
};

/// The linear part of the ODE right-hand side: apply(X) = A^n X - X,
/// computed as n successive sparse-dense products (A^n never materialized).
struct PropagationOperator {
  const NormalizedAdjacency* adjacency = nullptr;
  int order = 2;

  PropagationOperator() = default;
  PropagationOperator(const NormalizedAdjacency& adj, int n);

  /// out = A^n x - x. scratch is resized as needed and may be reused across
  /// calls to avoid reallocation.
  void apply(const Matrix& x, Matrix& out, Matrix& scratch) const;

  /// Allocating convenience wrapper.
  Matrix apply(const Matrix& x) const;
};

}  // namespace cdecf
