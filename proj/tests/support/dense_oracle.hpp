// Test-only dense linear algebra used as an independent oracle for the sparse
// implementation: brute-force products and a cyclic Jacobi eigensolver for
// symmetric matrices (fine for the N <= 50 graphs the properties run on).
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gread/graph.hpp"

namespace oracle {

struct Dense {
  std::size_t n = 0, m = 0;
  std::vector<double> a;

  Dense() = default;
  Dense(std::size_t rows, std::size_t cols) : n(rows), m(cols), a(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * m + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * m + j]; }
};

inline Dense from_sparse(const gread::SparseGraph& g) {
  Dense d(g.n_nodes(), g.n_nodes());
  for (std::size_t i = 0; i < g.n_nodes(); ++i)
    for (std::size_t k = g.row_begin(i); k < g.row_end(i); ++k) d(i, g.col(k)) = g.weight(k);
  return d;
}

inline Dense from_matrix(const gread::NodeMatrix& m) {
  Dense d(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d(i, j) = m(i, j);
  return d;
}

inline Dense multiply(const Dense& x, const Dense& y) {
  Dense out(x.n, y.m);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.m; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < y.m; ++j) out(i, j) += v * y(k, j);
    }
  return out;
}

inline double max_abs_diff(const Dense& x, const Dense& y) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.a.size(); ++k) worst = std::max(worst, std::abs(x.a[k] - y.a[k]));
  return worst;
}

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  Dense vectors;               // column k pairs with values[k]
};

// Cyclic Jacobi rotations for symmetric input.
inline EigenDecomposition jacobi_eigen(Dense s) {
  const std::size_t n = s.n;
  Dense v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off < 1e-24) break;

    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(s(p, q)) < 1e-18) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
  }

  EigenDecomposition out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = s(i, i);
  out.vectors = Dense(n, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (out.values[order[j]] < out.values[order[i]]) std::swap(order[i], order[j]);
  std::vector<double> sorted(n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted[k] = out.values[order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  out.values = sorted;
  return out;
}

}  // namespace oracle
