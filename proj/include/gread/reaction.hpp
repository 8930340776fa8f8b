#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gread/graph.hpp"

namespace gread {

enum class ReactionKind {
  Fisher,          // H (1 - H)
  AllenCahn,       // H (1 - H^2)
  Zeldovich,       // H (H - H^2)
  BlurSharpen,     // (A - A^2) H
  Source,          // H(0)
  FilterBank,      // L H
  FilterBankStar,  // L H + H
  DiffusionOnly,   // no reaction term
  GcnStep,         // discrete relu((I - L) H W) baseline, not an ODE term
};

const char* reaction_name(ReactionKind kind);
ReactionKind reaction_from_name(std::string_view name);  // throws ConfigError

struct ReactionSpec {
  ReactionKind kind = ReactionKind::BlurSharpen;
  bool needs_square() const { return kind == ReactionKind::BlurSharpen; }
};

// Fixed operators shared by every right-hand-side evaluation of one forward
// pass: the (soft) adjacency, its Laplacian, optionally its square, and the
// initial state feeding the source reaction.
struct OperatorBundle {
  SparseGraph adjacency;  // SymNormalized (OA) or RowStochastic (SA)
  SparseGraph laplacian;  // I - adjacency
  std::optional<SparseGraph> adjacency_squared;
  std::optional<NodeMatrix> initial_state;

  static OperatorBundle build(SparseGraph adjacency, bool with_square,
                              std::optional<NodeMatrix> initial_state = std::nullopt);
};

enum class CoeffMode { Scalar, Vector };

// alpha scales diffusion, beta scales reaction. Scalar mode broadcasts one
// value; vector mode carries one value per node, broadcast across channels.
struct Coefficients {
  CoeffMode alpha_mode = CoeffMode::Scalar;
  CoeffMode beta_mode = CoeffMode::Scalar;
  std::vector<double> alpha{1.0};
  std::vector<double> beta{1.0};

  static Coefficients scalars(double a, double b) {
    Coefficients c;
    c.alpha = {a};
    c.beta = {b};
    return c;
  }
  double alpha_at(std::size_t i) const {
    return alpha_mode == CoeffMode::Scalar ? alpha[0] : alpha[i];
  }
  double beta_at(std::size_t i) const {
    return beta_mode == CoeffMode::Scalar ? beta[0] : beta[i];
  }
  void validate(std::size_t n_nodes) const;
};

enum class SolverMethod { Euler, Rk4 };

struct SolverConfig {
  SolverMethod method = SolverMethod::Euler;
  double tau = 1.0;           // step size
  double time_horizon = 1.0;  // terminal time T

  std::size_t n_steps() const;  // max(1, round(T / tau))
  void validate() const;
};

// r(H) for the selected reaction. DiffusionOnly yields zero; GcnStep is not a
// valid reaction term.
NodeMatrix reaction(const ReactionSpec& spec, const OperatorBundle& ops, const NodeMatrix& h);

// f(H) = -alpha .* (L H) + beta .* r(H)
NodeMatrix rhs(const ReactionSpec& spec, const OperatorBundle& ops, const Coefficients& coeffs,
               const NodeMatrix& h);

// Scratch buffers so repeated rhs evaluations do not allocate.
struct RhsWorkspace {
  NodeMatrix diffusion, reac, tmp;
};
void rhs_into(const ReactionSpec& spec, const OperatorBundle& ops, const Coefficients& coeffs,
              const NodeMatrix& h, NodeMatrix& out, RhsWorkspace& ws);

struct IntegrateResult {
  NodeMatrix state;               // H(T)
  std::vector<NodeMatrix> trace;  // H(0..n_steps) when requested, else empty
};

// Fixed-step explicit integration of dH/dt = f(H). Throws DivergenceError
// naming the step at which a non-finite state first appears.
IntegrateResult integrate(const ReactionSpec& spec, const OperatorBundle& ops,
                          const Coefficients& coeffs, const SolverConfig& cfg,
                          const NodeMatrix& h0, bool keep_trace);

// relu((I - L) H W); the discrete GCN-style layer used for energy comparisons.
NodeMatrix gcn_step_baseline(const OperatorBundle& ops, const NodeMatrix& h, const NodeMatrix& w);

// B = A H followed by B + L B; one blur step then one sharpen step.
NodeMatrix blur_then_sharpen(const OperatorBundle& ops, const NodeMatrix& h);

const char* solver_name(SolverMethod m);
SolverMethod solver_from_name(std::string_view name);
const char* coeff_mode_name(CoeffMode m);
CoeffMode coeff_mode_from_name(std::string_view name);

}  // namespace gread
