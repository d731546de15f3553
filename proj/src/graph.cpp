#include "cdecf/graph.hpp"

#include <algorithm>
#include <cmath>

#include "cdecf/errors.hpp"
#include "cdecf/kernels.hpp"

namespace cdecf {

NormalizedAdjacency NormalizedAdjacency::build(
    const InteractionDataset& dataset) {
  if (dataset.train.empty())
    throw DataError("cannot build adjacency: train split is empty");

  const std::size_t users = dataset.num_users;
  const std::size_t items = dataset.num_items;
  const std::size_t nodes = users + items;

  std::vector<std::size_t> degree(nodes, 0);
  for (const auto& [u, i] : dataset.train) {
    ++degree[u];
    ++degree[users + i];
  }

  NormalizedAdjacency adj;
  adj.num_users = users;
  adj.num_items = items;
  adj.row_ptr.assign(nodes + 1, 0);
  for (std::size_t n = 0; n < nodes; ++n)
    adj.row_ptr[n + 1] = adj.row_ptr[n] + degree[n];

  const std::size_t nnz = adj.row_ptr[nodes];
  adj.col_idx.resize(nnz);
  adj.values.resize(nnz);

  std::vector<std::size_t> cursor(adj.row_ptr.begin(), adj.row_ptr.end() - 1);
  for (const auto& [u, i] : dataset.train) {
    const std::size_t item_node = users + i;
    const double v =
        1.0 / std::sqrt(static_cast<double>(degree[u]) *
                        static_cast<double>(degree[item_node]));
    adj.col_idx[cursor[u]] = static_cast<std::uint32_t>(item_node);
    adj.values[cursor[u]++] = v;
    adj.col_idx[cursor[item_node]] = u;
    adj.values[cursor[item_node]++] = v;
  }

  // Sorted columns within each row give a canonical layout.
  for (std::size_t n = 0; n < nodes; ++n) {
    const std::size_t lo = adj.row_ptr[n], hi = adj.row_ptr[n + 1];
    std::vector<std::pair<std::uint32_t, double>> row;
    row.reserve(hi - lo);
    for (std::size_t k = lo; k < hi; ++k)
      row.emplace_back(adj.col_idx[k], adj.values[k]);
    std::sort(row.begin(), row.end());
    for (std::size_t k = lo; k < hi; ++k) {
      adj.col_idx[k] = row[k - lo].first;
      adj.values[k] = row[k - lo].second;
    }
  }
  return adj;
}

void NormalizedAdjacency::multiply(const Matrix& x, Matrix& out) const {
  const std::size_t nodes = node_count();
  if (x.rows != nodes)
    throw NumericError("adjacency multiply: state has " +
                       std::to_string(x.rows) + " rows, expected " +
                       std::to_string(nodes));
  out.resize(nodes, x.cols);
  const std::size_t d = x.cols;
  for (std::size_t r = 0; r < nodes; ++r) {
    double* dst = out.row(r);
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      kernels::axpy(values[k], x.row(col_idx[k]), dst, d);
  }
}

PropagationOperator::PropagationOperator(const NormalizedAdjacency& adj, int n)
    : adjacency(&adj), order(n) {
  if (n < 1) throw ConfigError("propagation order must be >= 1");
}

void PropagationOperator::apply(const Matrix& x, Matrix& out,
                                Matrix& scratch) const {
  adjacency->multiply(x, out);
  for (int hop = 1; hop < order; ++hop) {
    std::swap(out, scratch);
    adjacency->multiply(scratch, out);
  }
  // out = A^n x - x
  kernels::add_scaled(out.data.data(), -1.0, x.data.data(), out.data.data(),
                      out.size());
}

Matrix PropagationOperator::apply(const Matrix& x) const {
  Matrix out, scratch;
  apply(x, out, scratch);
  return out;
}

}  // namespace cdecf
