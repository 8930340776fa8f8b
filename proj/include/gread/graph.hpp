#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

namespace gread {

// Dense row-major N x d matrix of doubles. Plays the role of feature matrix,
// hidden state and logits; row i always belongs to node i of the owning graph.
class NodeMatrix {
 public:
  NodeMatrix() = default;
  NodeMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static NodeMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  void fill(double v) { data_.assign(data_.size(), v); }
  bool all_finite() const;
  bool same_shape(const NodeMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dense products used by the encoder/output layers and the attention head.
NodeMatrix matmul(const NodeMatrix& a, const NodeMatrix& b);         // a * b
NodeMatrix matmul_at_b(const NodeMatrix& a, const NodeMatrix& b);    // a^T * b
NodeMatrix matmul_a_bt(const NodeMatrix& a, const NodeMatrix& b);    // a * b^T

enum class GraphKind { Raw, SymNormalized, Laplacian, RowStochastic };

// Compressed sparse row storage of a square operator over the node set.
// Column indices are stored in ascending order inside each row, which pins the
// summation order of every sparse product.
class SparseGraph {
 public:
  SparseGraph() = default;

  // Raw undirected graph from an edge list: edges are symmetrized, duplicates
  // collapse to weight 1 and self-loops are dropped.
  static SparseGraph raw_from_edges(
      std::size_t n_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges);

  // General CSR construction; entries with equal (row, col) must not repeat.
  static SparseGraph from_triplets(
      std::size_t n_nodes, GraphKind kind,
      std::vector<std::tuple<std::size_t, std::size_t, double>> entries);

  GraphKind kind() const { return kind_; }
  std::size_t n_nodes() const { return n_; }
  std::size_t nnz() const { return col_.size(); }

  std::size_t row_begin(std::size_t i) const { return row_ptr_[i]; }
  std::size_t row_end(std::size_t i) const { return row_ptr_[i + 1]; }
  std::uint32_t col(std::size_t k) const { return col_[k]; }
  double weight(std::size_t k) const { return w_[k]; }
  std::size_t degree(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  const std::vector<double>& weights() const { return w_; }

  // Entry (i, j), zero when absent.
  double at(std::size_t i, std::size_t j) const;

  bool is_symmetric(double tol = 0.0) const;
  bool has_zero_diagonal() const;

 private:
  GraphKind kind_ = GraphKind::Raw;
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_;
  std::vector<double> w_;
};

// A := D^{-1/2} A_raw D^{-1/2}. Rows and columns of isolated nodes stay zero.
SparseGraph symmetric_normalize(const SparseGraph& raw);

// L := I - A with an explicit diagonal, for A symmetric-normalized or
// row-stochastic.
SparseGraph laplacian(const SparseGraph& adjacency);

// Sparse-dense product m * h with deterministic per-row summation order.
NodeMatrix spmm(const SparseGraph& m, const NodeMatrix& h);
void spmm_into(const SparseGraph& m, const NodeMatrix& h, NodeMatrix& out);

// A * A with structural zeros below 1e-15 dropped.
SparseGraph sparse_square(const SparseGraph& a);

SparseGraph transpose(const SparseGraph& a);

// Four-neighbor lattice.
SparseGraph grid_graph(std::size_t width, std::size_t height);

struct LabeledGraph {
  SparseGraph graph;  // Raw
  NodeMatrix features;
  std::vector<int> labels;  // class index per node, in [0, n_classes)
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;

  std::size_t n_classes() const;
  void validate() const;  // throws DataError on broken invariants
};

// Mean over non-isolated nodes of the fraction of neighbors sharing the
// node's label.
double homophily_ratio(const LabeledGraph& data);

// Induced subgraph on the largest connected component, nodes reindexed in
// ascending original order. Ties go to the component holding the smallest
// original node index.
LabeledGraph largest_connected_component(const LabeledGraph& data);

}  // namespace gread
