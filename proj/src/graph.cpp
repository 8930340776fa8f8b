#include "gread/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "gread/errors.hpp"

namespace gread {

NodeMatrix NodeMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  NodeMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw DataError("from_rows: ragged row lengths");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

bool NodeMatrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

NodeMatrix matmul(const NodeMatrix& a, const NodeMatrix& b) {
  if (a.cols() != b.rows()) throw DataError("matmul: inner dimension mismatch");
  NodeMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

NodeMatrix matmul_at_b(const NodeMatrix& a, const NodeMatrix& b) {
  if (a.rows() != b.rows()) throw DataError("matmul_at_b: dimension mismatch");
  NodeMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

NodeMatrix matmul_a_bt(const NodeMatrix& a, const NodeMatrix& b) {
  if (a.cols() != b.cols()) throw DataError("matmul_a_bt: dimension mismatch");
  NodeMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

SparseGraph SparseGraph::from_triplets(
    std::size_t n_nodes, GraphKind kind,
    std::vector<std::tuple<std::size_t, std::size_t, double>> entries) {
  for (const auto& [r, c, w] : entries) {
    (void)w;
    if (r >= n_nodes || c >= n_nodes)
      throw DataError("from_triplets: index out of range: (" + std::to_string(r) + ", " +
                      std::to_string(c) + ")");
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  for (std::size_t k = 1; k < entries.size(); ++k)
    if (std::get<0>(entries[k]) == std::get<0>(entries[k - 1]) &&
        std::get<1>(entries[k]) == std::get<1>(entries[k - 1]))
      throw DataError("from_triplets: duplicate entry");

  SparseGraph g;
  g.kind_ = kind;
  g.n_ = n_nodes;
  g.row_ptr_.assign(n_nodes + 1, 0);
  g.col_.reserve(entries.size());
  g.w_.reserve(entries.size());
  for (const auto& [r, c, w] : entries) {
    ++g.row_ptr_[r + 1];
    g.col_.push_back(static_cast<std::uint32_t>(c));
    g.w_.push_back(w);
  }
  for (std::size_t i = 0; i < n_nodes; ++i) g.row_ptr_[i + 1] += g.row_ptr_[i];
  return g;
}

SparseGraph SparseGraph::raw_from_edges(
    std::size_t n_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::pair<std::size_t, std::size_t>> dir;
  dir.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes)
      throw DataError("raw_from_edges: node id out of range: " + std::to_string(std::max(u, v)));
    if (u == v) continue;  // raw graphs keep a zero diagonal
    dir.emplace_back(u, v);
    dir.emplace_back(v, u);
  }
  std::sort(dir.begin(), dir.end());
  dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(dir.size());
  for (const auto& [u, v] : dir) entries.emplace_back(u, v, 1.0);
  return from_triplets(n_nodes, GraphKind::Raw, std::move(entries));
}

double SparseGraph::at(std::size_t i, std::size_t j) const {
  const auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
  if (it == end || *it != j) return 0.0;
  return w_[static_cast<std::size_t>(it - col_.begin())];
}

bool SparseGraph::is_symmetric(double tol) const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (std::abs(at(col_[k], i) - w_[k]) > tol) return false;
  return true;
}

bool SparseGraph::has_zero_diagonal() const {
  for (std::size_t i = 0; i < n_; ++i)
    if (at(i, i) != 0.0) return false;
  return true;
}

SparseGraph symmetric_normalize(const SparseGraph& raw) {
  if (raw.kind() != GraphKind::Raw)
    throw DataError("symmetric_normalize: input must be a raw graph");
  if (!raw.has_zero_diagonal())
    throw DataError("symmetric_normalize: raw graph has diagonal entries");
  for (double w : raw.weights())
    if (w < 0.0) throw DataError("symmetric_normalize: negative edge weight");
  if (!raw.is_symmetric(0.0))
    throw DataError("symmetric_normalize: raw graph is not symmetric");

  const std::size_t n = raw.n_nodes();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = raw.row_begin(i); k < raw.row_end(i); ++k) deg[i] += raw.weight(k);

  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (deg[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);

  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(raw.nnz());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = raw.row_begin(i); k < raw.row_end(i); ++k) {
      const std::size_t j = raw.col(k);
      entries.emplace_back(i, j, raw.weight(k) * inv_sqrt[i] * inv_sqrt[j]);
    }
  return SparseGraph::from_triplets(n, GraphKind::SymNormalized, std::move(entries));
}

SparseGraph laplacian(const SparseGraph& adjacency) {
  if (adjacency.kind() != GraphKind::SymNormalized &&
      adjacency.kind() != GraphKind::RowStochastic)
    throw DataError("laplacian: input must be a normalized adjacency");

  const std::size_t n = adjacency.n_nodes();
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diagonal_seen = false;
    for (std::size_t k = adjacency.row_begin(i); k < adjacency.row_end(i); ++k) {
      const std::size_t j = adjacency.col(k);
      if (j == i) {
        entries.emplace_back(i, i, 1.0 - adjacency.weight(k));
        diagonal_seen = true;
      } else {
        entries.emplace_back(i, j, -adjacency.weight(k));
      }
    }
    if (!diagonal_seen) entries.emplace_back(i, i, 1.0);
  }
  return SparseGraph::from_triplets(n, GraphKind::Laplacian, std::move(entries));
}

void spmm_into(const SparseGraph& m, const NodeMatrix& h, NodeMatrix& out) {
  if (m.n_nodes() != h.rows()) throw DataError("spmm: dimension mismatch");
  if (out.rows() != m.n_nodes() || out.cols() != h.cols())
    out = NodeMatrix(m.n_nodes(), h.cols());
  const std::size_t d = h.cols();
  for (std::size_t i = 0; i < m.n_nodes(); ++i) {
    auto out_row = out.row(i);
    std::fill(out_row.begin(), out_row.end(), 0.0);
    for (std::size_t k = m.row_begin(i); k < m.row_end(i); ++k) {
      const double w = m.weight(k);
      const auto h_row = h.row(m.col(k));
      for (std::size_t c = 0; c < d; ++c) out_row[c] += w * h_row[c];
    }
  }
}

NodeMatrix spmm(const SparseGraph& m, const NodeMatrix& h) {
  NodeMatrix out(m.n_nodes(), h.cols());
  spmm_into(m, h, out);
  return out;
}

SparseGraph sparse_square(const SparseGraph& a) {
  constexpr double kStructuralZero = 1e-15;
  const std::size_t n = a.n_nodes();
  std::vector<double> acc(n, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    touched.clear();
    for (std::size_t k = a.row_begin(i); k < a.row_end(i); ++k) {
      const std::size_t mid = a.col(k);
      const double w = a.weight(k);
      for (std::size_t k2 = a.row_begin(mid); k2 < a.row_end(mid); ++k2) {
        const std::uint32_t j = a.col(k2);
        if (acc[j] == 0.0 && std::find(touched.begin(), touched.end(), j) == touched.end())
          touched.push_back(j);
        acc[j] += w * a.weight(k2);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t j : touched) {
      if (std::abs(acc[j]) >= kStructuralZero) entries.emplace_back(i, j, acc[j]);
      acc[j] = 0.0;
    }
  }
  return SparseGraph::from_triplets(n, a.kind(), std::move(entries));
}

SparseGraph transpose(const SparseGraph& a) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(a.nnz());
  for (std::size_t i = 0; i < a.n_nodes(); ++i)
    for (std::size_t k = a.row_begin(i); k < a.row_end(i); ++k)
      entries.emplace_back(a.col(k), i, a.weight(k));
  return SparseGraph::from_triplets(a.n_nodes(), a.kind(), std::move(entries));
}

SparseGraph grid_graph(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ConfigError("grid_graph: zero dimension");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(2 * width * height);
  const auto id = [width](std::size_t r, std::size_t c) { return r * width + c; };
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      if (c + 1 < width) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < height) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return SparseGraph::raw_from_edges(width * height, edges);
}

std::size_t LabeledGraph::n_classes() const {
  int hi = -1;
  for (int l : labels) hi = std::max(hi, l);
  return static_cast<std::size_t>(hi + 1);
}

void LabeledGraph::validate() const {
  const std::size_t n = graph.n_nodes();
  if (graph.kind() != GraphKind::Raw) throw DataError("LabeledGraph: graph must be raw");
  if (features.rows() != n) throw DataError("LabeledGraph: feature rows != node count");
  if (labels.size() != n) throw DataError("LabeledGraph: label count != node count");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0) throw DataError("LabeledGraph: node " + std::to_string(i) + " unlabeled");
  if (train_mask.size() != n || val_mask.size() != n || test_mask.size() != n)
    throw DataError("LabeledGraph: mask length != node count");
  for (std::size_t i = 0; i < n; ++i)
    if (train_mask[i] + val_mask[i] + test_mask[i] > 1)
      throw DataError("LabeledGraph: node " + std::to_string(i) + " is in multiple splits");
}

double homophily_ratio(const LabeledGraph& data) {
  const std::size_t n = data.graph.n_nodes();
  if (n == 0) throw DataError("homophily_ratio: empty graph");
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = data.graph.degree(i);
    if (deg == 0) continue;  // isolated nodes are excluded from the average
    std::size_t same = 0;
    for (std::size_t k = data.graph.row_begin(i); k < data.graph.row_end(i); ++k)
      if (data.labels[data.graph.col(k)] == data.labels[i]) ++same;
    sum += static_cast<double>(same) / static_cast<double>(deg);
    ++counted;
  }
  if (counted == 0) throw DataError("homophily_ratio: graph has no edges");
  return sum / static_cast<double>(counted);
}

LabeledGraph largest_connected_component(const LabeledGraph& data) {
  const std::size_t n = data.graph.n_nodes();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> comp_size;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_size.size());
    std::size_t size = 0;
    std::queue<std::size_t> frontier;
    frontier.push(start);
    comp[start] = id;
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      ++size;
      for (std::size_t k = data.graph.row_begin(u); k < data.graph.row_end(u); ++k) {
        const std::size_t v = data.graph.col(k);
        if (comp[v] < 0) {
          comp[v] = id;
          frontier.push(v);
        }
      }
    }
    comp_size.push_back(size);
  }

  // Scanning start nodes in ascending order means the first component of any
  // given size contains the smallest original index, so strict > implements
  // the tie rule.
  int best = 0;
  for (int id = 1; id < static_cast<int>(comp_size.size()); ++id)
    if (comp_size[id] > comp_size[best]) best = id;

  std::vector<std::size_t> keep;
  std::vector<std::size_t> new_id(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (comp[i] == best) {
      new_id[i] = keep.size();
      keep.push_back(i);
    }

  LabeledGraph out;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t old_u : keep)
    for (std::size_t k = data.graph.row_begin(old_u); k < data.graph.row_end(old_u); ++k) {
      const std::size_t old_v = data.graph.col(k);
      if (old_u < old_v) edges.emplace_back(new_id[old_u], new_id[old_v]);
    }
  out.graph = SparseGraph::raw_from_edges(keep.size(), edges);
  out.features = NodeMatrix(keep.size(), data.features.cols());
  out.labels.resize(keep.size());
  out.train_mask.resize(keep.size());
  out.val_mask.resize(keep.size());
  out.test_mask.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const std::size_t old = keep[i];
    std::copy(data.features.row(old).begin(), data.features.row(old).end(),
              out.features.row(i).begin());
    out.labels[i] = data.labels[old];
    out.train_mask[i] = data.train_mask[old];
    out.val_mask[i] = data.val_mask[old];
    out.test_mask[i] = data.test_mask[old];
  }
  return out;
}

}  // namespace gread
