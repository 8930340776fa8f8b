#include "gread/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "gread/errors.hpp"

namespace gread {

double attention_scale_divisor(AttentionScale scale, std::size_t key_dim) {
  const auto dk = static_cast<double>(key_dim);
  return scale == AttentionScale::SqrtKeyDim ? std::sqrt(dk) : dk;
}

SparseGraph soft_adjacency_from_projections(const SparseGraph& raw, const NodeMatrix& key_rows,
                                            const NodeMatrix& query_rows, double divisor) {
  if (raw.kind() != GraphKind::Raw)
    throw DataError("soft_adjacency: support must come from a raw graph");
  if (!raw.has_zero_diagonal())
    throw DataError("soft_adjacency: raw graph has diagonal entries");
  const std::size_t n = raw.n_nodes();
  if (key_rows.rows() != n || query_rows.rows() != n)
    throw DataError("soft_adjacency: projection rows != node count");
  const std::size_t dk = key_rows.cols();

  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(raw.nnz() + n);
  std::vector<std::size_t> support;
  std::vector<double> scores;
  for (std::size_t i = 0; i < n; ++i) {
    support.clear();
    scores.clear();
    bool loop_added = false;
    for (std::size_t k = raw.row_begin(i); k < raw.row_end(i); ++k) {
      const std::size_t j = raw.col(k);
      if (!loop_added && j > i) {
        support.push_back(i);
        loop_added = true;
      }
      support.push_back(j);
    }
    if (!loop_added) support.push_back(i);

    const auto ki = key_rows.row(i);
    double hi = -1e300;
    for (std::size_t j : support) {
      const auto qj = query_rows.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < dk; ++c) s += ki[c] * qj[c];
      s /= divisor;
      if (!std::isfinite(s))
        throw DivergenceError("soft_adjacency: non-finite attention score at row " +
                              std::to_string(i));
      scores.push_back(s);
      hi = std::max(hi, s);
    }
    double total = 0.0;
    for (double& s : scores) {
      s = std::exp(s - hi);
      total += s;
    }
    for (std::size_t k = 0; k < support.size(); ++k)
      entries.emplace_back(i, support[k], scores[k] / total);
  }
  return SparseGraph::from_triplets(n, GraphKind::RowStochastic, std::move(entries));
}

SparseGraph soft_adjacency(const AttentionParams& params, const SparseGraph& raw,
                           const NodeMatrix& h, AttentionScale scale) {
  if (h.rows() != raw.n_nodes()) throw DataError("soft_adjacency: state rows != node count");
  const NodeMatrix key_rows = matmul(h, params.w_key);
  const NodeMatrix query_rows = matmul(h, params.w_query);
  return soft_adjacency_from_projections(raw, key_rows, query_rows,
                                         attention_scale_divisor(scale, params.key_dim()));
}

}  // namespace gread
