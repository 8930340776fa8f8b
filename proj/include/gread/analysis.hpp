#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gread/model.hpp"
#include "gread/train.hpp"

namespace gread {

struct EnergyTrace {
  std::vector<std::size_t> steps;  // 0..n_steps
  std::vector<double> energy;
  std::string dynamics_label;
};

// E(H, A_raw) = (1/N) sum_i sum_{j in N_i} A_raw[i,j] ||H_i - H_j||^2.
// Each undirected edge contributes from both endpoints.
double dirichlet_energy(const SparseGraph& raw, const NodeMatrix& h);

// Energy at every intermediate state of the chosen dynamics. GcnStep applies
// n_steps discrete relu((I-L)HW) layers with a fresh seeded W per layer; all
// other kinds integrate the reaction-diffusion ODE.
EnergyTrace energy_evolution(const ReactionSpec& dynamics, const OperatorBundle& ops,
                             const Coefficients& coeffs, const SolverConfig& cfg,
                             const NodeMatrix& h0, const SparseGraph& raw,
                             std::uint64_t gcn_seed = 0);

enum class SweepParam { TerminalTime, StepSize };

struct SweepRow {
  double value;
  double mean_acc;
  double std_acc;  // population std over seeds
};

struct SweepCell {
  double value;
  std::uint64_t seed;
  double test_acc;  // NaN when the fit failed
  bool failed;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> raw;
};

// Trains n_seeds models per grid value; per-cell failures are recorded, not
// fatal. Cells may run on up to n_jobs worker threads.
SweepResult sweep(SweepParam param, const std::vector<double>& grid, const ModelConfig& base_model,
                  const TrainConfig& base_train, const LabeledGraph& data, std::size_t n_seeds,
                  std::size_t n_jobs = 1);

struct EmbeddingSnapshot {
  double time;
  std::size_t step_index;
  NodeMatrix states;
};

// H(t) at the traced step nearest to each requested time; times must lie in
// [0, T].
std::vector<EmbeddingSnapshot> export_embeddings(const ModelConfig& cfg,
                                                 const ModelParams& params,
                                                 const LabeledGraph& data,
                                                 const std::vector<double>& times);

struct BenchRow {
  std::size_t edges;
  double ns_per_step;
};

// Median per-call rhs time on random near-regular graphs of growing size.
std::vector<BenchRow> scaling_bench(const std::vector<std::size_t>& edge_counts,
                                    const ReactionSpec& spec, std::size_t dim = 16,
                                    std::size_t degree = 8, std::uint64_t seed = 0);

}  // namespace gread
