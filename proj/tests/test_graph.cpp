#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gread/errors.hpp"
#include "gread/graph.hpp"
#include "gread/rng.hpp"
#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

using namespace gread;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

LabeledGraph make_labeled(SparseGraph g, std::vector<int> labels) {
  LabeledGraph d;
  const std::size_t n = g.n_nodes();
  d.graph = std::move(g);
  d.features = NodeMatrix(n, 1);
  d.labels = std::move(labels);
  d.train_mask.assign(n, 0);
  d.val_mask.assign(n, 0);
  d.test_mask.assign(n, 0);
  return d;
}

}  // namespace

TEST_CASE("symmetric_normalize on K2 keeps unit weights") {
  const SparseGraph a = symmetric_normalize(fixtures::k2());
  CHECK(a.at(0, 1) == doctest::Approx(1.0));
  CHECK(a.at(1, 0) == doctest::Approx(1.0));
  CHECK(a.at(0, 0) == 0.0);
}

TEST_CASE("symmetric_normalize on the path needs 1/sqrt(2)") {
  const SparseGraph a = symmetric_normalize(fixtures::path3());
  CHECK(a.at(0, 1) == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(a.at(1, 0) == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(a.at(1, 2) == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(a.at(2, 1) == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(a.at(0, 2) == 0.0);
}

TEST_CASE("symmetric_normalize zeroes isolated rows") {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  const SparseGraph raw = SparseGraph::raw_from_edges(3, edges);
  const SparseGraph a = symmetric_normalize(raw);
  CHECK(a.degree(2) == 0);
  CHECK(a.at(0, 2) == 0.0);
  CHECK(a.at(2, 0) == 0.0);
}

TEST_CASE("symmetric_normalize rejects broken structure") {
  const SparseGraph asym = SparseGraph::from_triplets(2, GraphKind::Raw, {{0, 1, 1.0}});
  CHECK_THROWS_AS(symmetric_normalize(asym), DataError);
  const SparseGraph negative =
      SparseGraph::from_triplets(2, GraphKind::Raw, {{0, 1, -1.0}, {1, 0, -1.0}});
  CHECK_THROWS_AS(symmetric_normalize(negative), DataError);
  CHECK_THROWS_AS(symmetric_normalize(symmetric_normalize(fixtures::k2())), DataError);
}

TEST_CASE("laplacian of K2") {
  const SparseGraph l = laplacian(symmetric_normalize(fixtures::k2()));
  CHECK(l.at(0, 0) == doctest::Approx(1.0));
  CHECK(l.at(0, 1) == doctest::Approx(-1.0));
  CHECK(l.at(1, 0) == doctest::Approx(-1.0));
  CHECK(l.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("laplacian keeps identity rows for isolated nodes") {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  const SparseGraph l = laplacian(symmetric_normalize(SparseGraph::raw_from_edges(3, edges)));
  CHECK(l.at(2, 2) == 1.0);
  CHECK(l.degree(2) == 1);
}

TEST_CASE("laplacian of the path") {
  const SparseGraph l = laplacian(symmetric_normalize(fixtures::path3()));
  CHECK(l.at(1, 1) == doctest::Approx(1.0));
  CHECK(l.at(0, 1) == doctest::Approx(-kInvSqrt2).epsilon(1e-12));
}

TEST_CASE("A + L = I within 1e-12 on random graphs") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(48);
    const SparseGraph raw = fixtures::random_raw_graph(n, 0.3, rng);
    const SparseGraph a = symmetric_normalize(raw);
    const SparseGraph l = laplacian(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double expect = i == j ? 1.0 : 0.0;
        CHECK(std::abs(a.at(i, j) + l.at(i, j) - expect) < 1e-12);
      }
  }
}

TEST_CASE("normalized adjacency entries stay in [0,1]") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const SparseGraph a = symmetric_normalize(fixtures::random_raw_graph(30, 0.2, rng));
    for (std::size_t k = 0; k < a.nnz(); ++k) {
      CHECK(a.weights()[k] >= 0.0);
      CHECK(a.weights()[k] <= 1.0);
    }
  }
}

TEST_CASE("normalized rows sum to 1 exactly when all neighbor degrees match") {
  // 6-cycle: 2-regular, every row sums to 1.
  std::vector<std::pair<std::size_t, std::size_t>> cycle;
  for (std::size_t i = 0; i < 6; ++i) cycle.emplace_back(i, (i + 1) % 6);
  const SparseGraph a = symmetric_normalize(SparseGraph::raw_from_edges(6, cycle));
  for (std::size_t i = 0; i < 6; ++i) {
    double row_sum = 0.0;
    for (std::size_t k = a.row_begin(i); k < a.row_end(i); ++k) row_sum += a.weight(k);
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Star: the hub's neighbors are lower-degree, so its row sum exceeds 1.
  const std::vector<std::pair<std::size_t, std::size_t>> star{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const SparseGraph s = symmetric_normalize(SparseGraph::raw_from_edges(5, star));
  double hub_sum = 0.0;
  for (std::size_t k = s.row_begin(0); k < s.row_end(0); ++k) hub_sum += s.weight(k);
  CHECK(hub_sum == doctest::Approx(2.0).epsilon(1e-12));  // 4 / sqrt(4)
}

TEST_CASE("laplacian eigenvalues lie in [0, 2] (dense oracle)") {
  Rng rng(13);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 5 + rng.below(45);
    const SparseGraph l = laplacian(symmetric_normalize(fixtures::random_raw_graph(n, 0.25, rng)));
    const auto eig = oracle::jacobi_eigen(oracle::from_sparse(l));
    CHECK(eig.values.front() >= -1e-9);
    CHECK(eig.values.back() <= 2.0 + 1e-9);
  }
}

TEST_CASE("spmm against identity and K2") {
  const NodeMatrix h = NodeMatrix::from_rows({{1.0}, {0.0}});
  const SparseGraph identity =
      SparseGraph::from_triplets(2, GraphKind::SymNormalized, {{0, 0, 1.0}, {1, 1, 1.0}});
  const NodeMatrix same = spmm(identity, h);
  CHECK(same(0, 0) == 1.0);
  CHECK(same(1, 0) == 0.0);

  const NodeMatrix swapped = spmm(symmetric_normalize(fixtures::k2()), h);
  CHECK(swapped(0, 0) == 0.0);
  CHECK(swapped(1, 0) == 1.0);
}

TEST_CASE("spmm on the path moves mass to the middle") {
  const NodeMatrix h = NodeMatrix::from_rows({{1.0}, {0.0}, {0.0}});
  const NodeMatrix out = spmm(symmetric_normalize(fixtures::path3()), h);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(1, 0) == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(out(2, 0) == 0.0);
}

TEST_CASE("spmm rejects dimension mismatch") {
  CHECK_THROWS_AS(spmm(symmetric_normalize(fixtures::k2()), NodeMatrix(3, 1)), DataError);
}

TEST_CASE("spmm output is independent of edge insertion order, bitwise") {
  Rng rng(14);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = i + 1; j < 20; ++j)
      if (rng.uniform() < 0.3) edges.emplace_back(i, j);
  const NodeMatrix h = fixtures::random_matrix(20, 4, rng);

  const SparseGraph g1 = SparseGraph::raw_from_edges(20, edges);
  for (std::size_t k = edges.size(); k > 1; --k) std::swap(edges[k - 1], edges[rng.below(k)]);
  for (auto& e : edges)
    if (rng.uniform() < 0.5) std::swap(e.first, e.second);
  const SparseGraph g2 = SparseGraph::raw_from_edges(20, edges);

  const NodeMatrix out1 = spmm(symmetric_normalize(g1), h);
  const NodeMatrix out2 = spmm(symmetric_normalize(g2), h);
  for (std::size_t k = 0; k < out1.values().size(); ++k)
    CHECK(out1.values()[k] == out2.values()[k]);
}

TEST_CASE("sparse_square of K2 is the identity") {
  const SparseGraph sq = sparse_square(symmetric_normalize(fixtures::k2()));
  CHECK(sq.at(0, 0) == doctest::Approx(1.0));
  CHECK(sq.at(1, 1) == doctest::Approx(1.0));
  CHECK(sq.at(0, 1) == 0.0);
}

TEST_CASE("sparse_square of a diagonal matrix squares the diagonal") {
  const SparseGraph diag =
      SparseGraph::from_triplets(3, GraphKind::SymNormalized, {{0, 0, 2.0}, {1, 1, 3.0}, {2, 2, -1.0}});
  const SparseGraph sq = sparse_square(diag);
  CHECK(sq.at(0, 0) == doctest::Approx(4.0));
  CHECK(sq.at(1, 1) == doctest::Approx(9.0));
  CHECK(sq.at(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("sparse_square of the path matches the hand value") {
  const SparseGraph sq = sparse_square(symmetric_normalize(fixtures::path3()));
  CHECK(sq.at(0, 0) == doctest::Approx(0.5));
  CHECK(sq.at(0, 2) == doctest::Approx(0.5));
  CHECK(sq.at(1, 1) == doctest::Approx(1.0));
  CHECK(sq.at(2, 0) == doctest::Approx(0.5));
  CHECK(sq.at(2, 2) == doctest::Approx(0.5));
  CHECK(sq.at(0, 1) == 0.0);
}

TEST_CASE("sparse_square equals the dense product within 1e-12") {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.below(47);
    const SparseGraph a = symmetric_normalize(fixtures::random_raw_graph(n, 0.3, rng));
    const oracle::Dense dense_sq = oracle::multiply(oracle::from_sparse(a), oracle::from_sparse(a));
    const oracle::Dense sparse_sq = oracle::from_sparse(sparse_square(a));
    CHECK(oracle::max_abs_diff(dense_sq, sparse_sq) < 1e-12);
  }
}

TEST_CASE("homophily_ratio basics") {
  CHECK(homophily_ratio(make_labeled(fixtures::path3(), {1, 1, 1})) == 1.0);
  CHECK(homophily_ratio(make_labeled(fixtures::k2(), {0, 1})) == 0.0);

  // 4-cycle with labels 0,0,1,1: every node has one matching neighbor of two.
  const std::vector<std::pair<std::size_t, std::size_t>> cycle{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  CHECK(homophily_ratio(make_labeled(SparseGraph::raw_from_edges(4, cycle), {0, 0, 1, 1})) ==
        doctest::Approx(0.5));
}

TEST_CASE("homophily_ratio excludes isolated nodes and rejects empty graphs") {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  const auto d = make_labeled(SparseGraph::raw_from_edges(3, edges), {0, 0, 1});
  CHECK(homophily_ratio(d) == 1.0);
  CHECK_THROWS_AS(homophily_ratio(make_labeled(SparseGraph::raw_from_edges(0, {}), {})), DataError);
}

TEST_CASE("homophily_ratio is invariant under node+label permutation") {
  Rng rng(16);
  const SparseGraph g = fixtures::random_raw_graph(25, 0.25, rng);
  std::vector<int> labels(25);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  const double base = homophily_ratio(make_labeled(g, labels));

  std::vector<std::size_t> perm(25);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t k = g.row_begin(i); k < g.row_end(i); ++k)
      if (i < g.col(k)) edges.emplace_back(perm[i], perm[g.col(k)]);
  std::vector<int> perm_labels(25);
  for (std::size_t i = 0; i < 25; ++i) perm_labels[perm[i]] = labels[i];

  const double permuted =
      homophily_ratio(make_labeled(SparseGraph::raw_from_edges(25, edges), perm_labels));
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("grid_graph sizes") {
  CHECK(grid_graph(1, 1).nnz() == 0);
  CHECK(grid_graph(2, 2).nnz() / 2 == 4);
  CHECK(grid_graph(3, 3).nnz() / 2 == 12);  // 2wh - w - h
  CHECK_THROWS_AS(grid_graph(0, 3), ConfigError);
}

TEST_CASE("largest_connected_component keeps connected graphs") {
  auto d = make_labeled(fixtures::path3(), {0, 1, 2});
  d.features = NodeMatrix::from_rows({{1.0}, {2.0}, {3.0}});
  const LabeledGraph lcc = largest_connected_component(d);
  CHECK(lcc.graph.n_nodes() == 3);
  CHECK(lcc.graph.nnz() == d.graph.nnz());
  CHECK(lcc.features(2, 0) == 3.0);
}

TEST_CASE("largest_connected_component picks the bigger component") {
  // Component {0..4} (path) and component {5..7} (triangle).
  const std::vector<std::pair<std::size_t, std::size_t>> edges{
      {0, 1}, {1, 2}, {2, 3}, {3, 4}, {5, 6}, {6, 7}, {5, 7}};
  auto d = make_labeled(SparseGraph::raw_from_edges(8, edges), {0, 0, 0, 0, 0, 1, 1, 1});
  d.train_mask[5] = 1;
  const LabeledGraph lcc = largest_connected_component(d);
  CHECK(lcc.graph.n_nodes() == 5);
  CHECK(lcc.labels == std::vector<int>{0, 0, 0, 0, 0});
  for (auto m : lcc.train_mask) CHECK(m == 0);
}

TEST_CASE("largest_connected_component tie-break takes the smallest index") {
  // Two 2-node components; {1, 3} would win a size tie only by index order.
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{1, 3}, {0, 2}};
  auto d = make_labeled(SparseGraph::raw_from_edges(4, edges), {7, 8, 7, 8});
  d.features = NodeMatrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  const LabeledGraph lcc = largest_connected_component(d);
  CHECK(lcc.graph.n_nodes() == 2);
  CHECK(lcc.labels == std::vector<int>{7, 7});  // nodes 0 and 2
  CHECK(lcc.features(1, 0) == 2.0);
}

TEST_CASE("raw_from_edges symmetrizes, dedupes and validates ids") {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 0}, {0, 1}, {1, 1}};
  const SparseGraph g = SparseGraph::raw_from_edges(2, edges);
  CHECK(g.nnz() == 2);
  CHECK(g.at(0, 1) == 1.0);
  CHECK(g.at(0, 0) == 0.0);
  CHECK(g.is_symmetric());
  CHECK_THROWS_AS(SparseGraph::raw_from_edges(2, {{std::pair<std::size_t, std::size_t>{0, 2}}}),
                  DataError);
}

TEST_CASE("transpose round-trips and flips asymmetric entries") {
  const SparseGraph g = SparseGraph::from_triplets(
      3, GraphKind::RowStochastic, {{0, 1, 0.25}, {0, 0, 0.75}, {2, 0, 1.0}, {1, 1, 1.0}});
  const SparseGraph t = transpose(g);
  CHECK(t.at(1, 0) == 0.25);
  CHECK(t.at(0, 2) == 1.0);
  CHECK(t.at(0, 1) == 0.0);
  const SparseGraph back = transpose(t);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(back.at(i, j) == g.at(i, j));
}
