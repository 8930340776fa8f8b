#pragma once

#include <utility>
#include <vector>

#include "gread/graph.hpp"
#include "gread/rng.hpp"

namespace fixtures {

inline gread::SparseGraph random_raw_graph(std::size_t n, double p, gread::Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return gread::SparseGraph::raw_from_edges(n, edges);
}

// Raw graph that is connected for any n >= 1: a path plus random chords.
inline gread::SparseGraph random_connected_graph(std::size_t n, double p, gread::Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return gread::SparseGraph::raw_from_edges(n, edges);
}

inline gread::NodeMatrix random_matrix(std::size_t rows, std::size_t cols, gread::Rng& rng,
                                       double lo = -1.0, double hi = 1.0) {
  gread::NodeMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline gread::SparseGraph path3() {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}};
  return gread::SparseGraph::raw_from_edges(3, edges);
}

inline gread::SparseGraph k2() {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  return gread::SparseGraph::raw_from_edges(2, edges);
}

}  // namespace fixtures
