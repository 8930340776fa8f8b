#pragma once

#include <cstddef>

#include "gread/graph.hpp"

namespace gread {

// Key/query projections for the edge-restricted scaled-dot-product head.
struct AttentionParams {
  NodeMatrix w_key;    // d x d_k
  NodeMatrix w_query;  // d x d_k
  std::size_t key_dim() const { return w_key.cols(); }
};

enum class AttentionScale { SqrtKeyDim, KeyDim };

double attention_scale_divisor(AttentionScale scale, std::size_t key_dim);

// Soft adjacency over the support of the raw graph plus one self-loop per
// node: score(i, j) = (H W_K)_i . (H W_Q)_j / divisor, softmax per row.
// Rows sum to one; the result is RowStochastic.
SparseGraph soft_adjacency(const AttentionParams& params, const SparseGraph& raw,
                           const NodeMatrix& h,
                           AttentionScale scale = AttentionScale::SqrtKeyDim);

// Same, with key/query rows already projected (K = H W_K, Q = H W_Q). The
// forward cache keeps K and Q so the backward pass can reuse them.
SparseGraph soft_adjacency_from_projections(const SparseGraph& raw, const NodeMatrix& key_rows,
                                            const NodeMatrix& query_rows, double divisor);

}  // namespace gread
