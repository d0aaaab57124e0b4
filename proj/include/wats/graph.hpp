#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wats/common.hpp"

namespace wats {

using Edge = std::pair<std::size_t, std::size_t>;

// Immutable undirected simple graph in compressed-row form.
class Graph {
 public:
  Graph() = default;

  // Symmetrizes, drops self-loops and duplicates. Throws InputError if an
  // endpoint is >= num_nodes.
  static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges);

  std::size_t num_nodes() const { return degrees_.size(); }
  // Undirected edge count (each stored pair counted once).
  std::size_t num_edges() const { return col_indices_.size() / 2; }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<std::size_t>& degrees() const { return degrees_; }

  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {col_indices_.data() + row_offsets_[i], degrees_[i]};
  }

  bool has_edge(std::size_t i, std::size_t j) const;

 private:
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<std::size_t> degrees_;
};

// Parses "src<TAB>dst" lines (any whitespace accepted). '#' lines and blank
// lines are skipped. Node count is 1 + max id unless num_nodes is given, in
// which case ids >= num_nodes are rejected.
Graph load_edge_list(std::istream& in, std::optional<std::size_t> num_nodes = std::nullopt);

enum class OperatorKind { Generic, SymNormalizedLaplacian, RescaledLaplacian };

// Sparse symmetric matrix in CSR form.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t dim, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values,
                 OperatorKind kind = OperatorKind::Generic);

  static SparseOperator identity(std::size_t dim);
  static SparseOperator from_dense(const Matrix& m, double drop_below = 0.0);

  std::size_t dim() const { return dim_; }
  OperatorKind kind() const { return kind_; }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  // y = A x. Rows are split across WATS_THREADS workers; each row is
  // accumulated in stored order, so the result does not depend on threading.
  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;

  double at(std::size_t i, std::size_t j) const;
  Matrix to_dense() const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
  OperatorKind kind_ = OperatorKind::Generic;
};

// L_sym = I - D^{-1/2} A D^{-1/2}. Isolated nodes keep diagonal 1 and have
// no off-diagonal entries.
SparseOperator sym_normalized_laplacian(const Graph& g);

// (2 / lambda_max) L - I, same sparsity pattern as L plus the diagonal.
SparseOperator rescale_laplacian(const SparseOperator& l, double lambda_max = 2.0);

struct SpectralBound {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Upper bound on the largest eigenvalue: power-iteration Rayleigh quotient
// times 1.01, capped by the Gershgorin row bound. If power iteration does not
// settle within 1000 steps the result falls back to 2.0 for L_sym and to the
// Gershgorin bound otherwise, with converged = false.
SpectralBound spectral_radius_upper_bound(const SparseOperator& l);

}  // namespace wats
