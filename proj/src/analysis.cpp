#include "gread/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "gread/errors.hpp"
#include "gread/rng.hpp"

namespace gread {

double dirichlet_energy(const SparseGraph& raw, const NodeMatrix& h) {
  if (raw.n_nodes() != h.rows()) throw DataError("dirichlet_energy: shape mismatch");
  const std::size_t d = h.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < raw.n_nodes(); ++i) {
    const auto hi = h.row(i);
    for (std::size_t k = raw.row_begin(i); k < raw.row_end(i); ++k) {
      const auto hj = h.row(raw.col(k));
      double dist2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = hi[c] - hj[c];
        dist2 += diff * diff;
      }
      total += raw.weight(k) * dist2;
    }
  }
  return total / static_cast<double>(raw.n_nodes());
}

EnergyTrace energy_evolution(const ReactionSpec& dynamics, const OperatorBundle& ops,
                             const Coefficients& coeffs, const SolverConfig& cfg,
                             const NodeMatrix& h0, const SparseGraph& raw,
                             std::uint64_t gcn_seed) {
  EnergyTrace trace;
  trace.dynamics_label = reaction_name(dynamics.kind);

  if (dynamics.kind == ReactionKind::GcnStep) {
    cfg.validate();
    const std::size_t n_layers = cfg.n_steps();
    const std::size_t d = h0.cols();
    Rng rng(gcn_seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * d));
    NodeMatrix state = h0;
    trace.steps.push_back(0);
    trace.energy.push_back(dirichlet_energy(raw, state));
    for (std::size_t layer = 1; layer <= n_layers; ++layer) {
      NodeMatrix w(d, d);
      for (double& v : w.values()) v = rng.uniform(-bound, bound);
      state = gcn_step_baseline(ops, state, w);
      if (!state.all_finite())
        throw DivergenceError("energy_evolution: non-finite state at layer " +
                                  std::to_string(layer),
                              layer);
      trace.steps.push_back(layer);
      trace.energy.push_back(dirichlet_energy(raw, state));
    }
    return trace;
  }

  const IntegrateResult result = integrate(dynamics, ops, coeffs, cfg, h0, /*keep_trace=*/true);
  trace.steps.reserve(result.trace.size());
  trace.energy.reserve(result.trace.size());
  for (std::size_t k = 0; k < result.trace.size(); ++k) {
    trace.steps.push_back(k);
    trace.energy.push_back(dirichlet_energy(raw, result.trace[k]));
  }
  return trace;
}

SweepResult sweep(SweepParam param, const std::vector<double>& grid, const ModelConfig& base_model,
                  const TrainConfig& base_train, const LabeledGraph& data, std::size_t n_seeds,
                  std::size_t n_jobs) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  if (n_seeds == 0) throw ConfigError("sweep: n_seeds must be >= 1");

  SweepResult result;
  result.raw.resize(grid.size() * n_seeds);

  // Cell seeds depend only on the seed index, so duplicated grid values yield
  // identical rows.
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= result.raw.size()) return;
      const std::size_t gi = cell / n_seeds;
      const std::size_t si = cell % n_seeds;

      ModelConfig mcfg = base_model;
      if (param == SweepParam::TerminalTime)
        mcfg.solver.time_horizon = grid[gi];
      else
        mcfg.solver.tau = grid[gi];
      TrainConfig tcfg = base_train;
      tcfg.seed = base_train.seed + si;

      SweepCell out{grid[gi], tcfg.seed, std::numeric_limits<double>::quiet_NaN(), false};
      try {
        const FitResult fit_result = fit(mcfg, tcfg, data);
        double best_test = std::numeric_limits<double>::quiet_NaN();
        for (const auto& row : fit_result.history)
          if (row.epoch == fit_result.best_epoch) best_test = row.test_acc;
        out.test_acc = best_test;
        out.failed = !std::isfinite(best_test);
      } catch (const std::exception&) {
        out.failed = true;
      }
      result.raw[cell] = out;
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(n_jobs, result.raw.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const SweepCell& cell = result.raw[gi * n_seeds + si];
      if (cell.failed) continue;
      sum += cell.test_acc;
      sum_sq += cell.test_acc * cell.test_acc;
      ++count;
    }
    SweepRow row{grid[gi], std::numeric_limits<double>::quiet_NaN(),
                 std::numeric_limits<double>::quiet_NaN()};
    if (count > 0) {
      row.mean_acc = sum / static_cast<double>(count);
      const double var = sum_sq / static_cast<double>(count) - row.mean_acc * row.mean_acc;
      row.std_acc = std::sqrt(std::max(0.0, var));
    }
    result.rows.push_back(row);
  }
  return result;
}

std::vector<EmbeddingSnapshot> export_embeddings(const ModelConfig& cfg,
                                                 const ModelParams& params,
                                                 const LabeledGraph& data,
                                                 const std::vector<double>& times) {
  for (double t : times)
    if (t < 0.0 || t > cfg.solver.time_horizon + 1e-9)
      throw ConfigError("export_embeddings: time " + std::to_string(t) + " outside [0, T]");

  ForwardCache cache;
  forward(cfg, params, data, ForwardMode::Eval, 0, &cache);
  const std::size_t n_steps = cfg.solver.n_steps();

  std::vector<EmbeddingSnapshot> out;
  out.reserve(times.size());
  for (double t : times) {
    auto idx = static_cast<std::size_t>(std::llround(t / cfg.solver.tau));
    idx = std::min(idx, n_steps);
    out.push_back({t, idx, cache.state_trace[idx]});
  }
  return out;
}

namespace {

// Near-regular random graph: union of degree/2 random cycles over the nodes.
SparseGraph random_regular_graph(std::size_t n_nodes, std::size_t degree, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> order(n_nodes);
  for (std::size_t round = 0; round < degree / 2; ++round) {
    for (std::size_t i = 0; i < n_nodes; ++i) order[i] = i;
    for (std::size_t k = n_nodes; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t i = 0; i < n_nodes; ++i)
      edges.emplace_back(order[i], order[(i + 1) % n_nodes]);
  }
  return SparseGraph::raw_from_edges(n_nodes, edges);
}

}  // namespace

std::vector<BenchRow> scaling_bench(const std::vector<std::size_t>& edge_counts,
                                    const ReactionSpec& spec, std::size_t dim,
                                    std::size_t degree, std::uint64_t seed) {
  if (edge_counts.empty()) throw ConfigError("scaling_bench: no sizes given");
  if (degree < 2) throw ConfigError("scaling_bench: degree must be >= 2");

  Rng rng(seed);
  std::vector<BenchRow> rows;
  for (const std::size_t target_edges : edge_counts) {
    const std::size_t n = std::max<std::size_t>(8, 2 * target_edges / degree);
    const SparseGraph raw = random_regular_graph(n, degree, rng);
    const std::size_t actual_edges = raw.nnz() / 2;
    const OperatorBundle ops =
        OperatorBundle::build(symmetric_normalize(raw), spec.needs_square());

    NodeMatrix h(n, dim);
    for (double& v : h.values()) v = rng.uniform(-1.0, 1.0);
    OperatorBundle timed_ops = ops;
    if (spec.kind == ReactionKind::Source) timed_ops.initial_state = h;

    const Coefficients coeffs = Coefficients::scalars(1.0, 1.0);
    NodeMatrix out(n, dim);
    RhsWorkspace ws;
    rhs_into(spec, timed_ops, coeffs, h, out, ws);  // warm-up, sizes buffers

    // Size the inner loop so one sample costs ~10ms regardless of |E|.
    const std::size_t work = std::max<std::size_t>(1, raw.nnz() * dim);
    const std::size_t inner = std::max<std::size_t>(3, (1u << 26) / work);
    std::vector<double> samples;
    for (int rep = 0; rep < 9; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < inner; ++r) rhs_into(spec, timed_ops, coeffs, h, out, ws);
      const auto stop = std::chrono::steady_clock::now();
      const double ns =
          std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
      samples.push_back(ns / static_cast<double>(inner));
    }
    std::sort(samples.begin(), samples.end());
    rows.push_back({actual_edges, samples[samples.size() / 2]});
  }
  return rows;
}

}  // namespace gread
