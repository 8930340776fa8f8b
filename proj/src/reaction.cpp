#include "gread/reaction.hpp"

#include <cmath>
#include <string>

#include "gread/errors.hpp"

namespace gread {

const char* reaction_name(ReactionKind kind) {
  switch (kind) {
    case ReactionKind::Fisher: return "f";
    case ReactionKind::AllenCahn: return "ac";
    case ReactionKind::Zeldovich: return "z";
    case ReactionKind::BlurSharpen: return "bs";
    case ReactionKind::Source: return "st";
    case ReactionKind::FilterBank: return "fb";
    case ReactionKind::FilterBankStar: return "fbstar";
    case ReactionKind::DiffusionOnly: return "diffusion";
    case ReactionKind::GcnStep: return "gcnstep";
  }
  return "?";
}

ReactionKind reaction_from_name(std::string_view name) {
  if (name == "f") return ReactionKind::Fisher;
  if (name == "ac") return ReactionKind::AllenCahn;
  if (name == "z") return ReactionKind::Zeldovich;
  if (name == "bs") return ReactionKind::BlurSharpen;
  if (name == "st") return ReactionKind::Source;
  if (name == "fb") return ReactionKind::FilterBank;
  if (name == "fbstar") return ReactionKind::FilterBankStar;
  if (name == "diffusion") return ReactionKind::DiffusionOnly;
  if (name == "gcnstep") return ReactionKind::GcnStep;
  throw ConfigError("unknown reaction: " + std::string(name));
}

const char* solver_name(SolverMethod m) {
  return m == SolverMethod::Euler ? "euler" : "rk4";
}

SolverMethod solver_from_name(std::string_view name) {
  if (name == "euler") return SolverMethod::Euler;
  if (name == "rk4") return SolverMethod::Rk4;
  throw ConfigError("unknown solver: " + std::string(name));
}

const char* coeff_mode_name(CoeffMode m) { return m == CoeffMode::Scalar ? "sc" : "vc"; }

CoeffMode coeff_mode_from_name(std::string_view name) {
  if (name == "sc") return CoeffMode::Scalar;
  if (name == "vc") return CoeffMode::Vector;
  throw ConfigError("unknown coefficient mode: " + std::string(name));
}

OperatorBundle OperatorBundle::build(SparseGraph adjacency, bool with_square,
                                     std::optional<NodeMatrix> initial_state) {
  if (adjacency.kind() != GraphKind::SymNormalized &&
      adjacency.kind() != GraphKind::RowStochastic)
    throw DataError("OperatorBundle: adjacency must be normalized");
  OperatorBundle ops;
  ops.laplacian = ::gread::laplacian(adjacency);
  if (with_square) ops.adjacency_squared = sparse_square(adjacency);
  ops.adjacency = std::move(adjacency);
  ops.initial_state = std::move(initial_state);
  return ops;
}

void Coefficients::validate(std::size_t n_nodes) const {
  const auto check = [n_nodes](CoeffMode mode, const std::vector<double>& v, const char* name) {
    const std::size_t want = mode == CoeffMode::Scalar ? 1 : n_nodes;
    if (v.size() != want)
      throw ConfigError(std::string("Coefficients: ") + name + " has wrong length");
  };
  check(alpha_mode, alpha, "alpha");
  check(beta_mode, beta, "beta");
}

std::size_t SolverConfig::n_steps() const {
  const double ratio = time_horizon / tau;
  const auto rounded = static_cast<long long>(std::llround(ratio));
  return rounded < 1 ? 1 : static_cast<std::size_t>(rounded);
}

void SolverConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("SolverConfig: tau must be positive");
  if (!(time_horizon > 0.0)) throw ConfigError("SolverConfig: T must be positive");
}

namespace {

void reaction_into(const ReactionSpec& spec, const OperatorBundle& ops, const NodeMatrix& h,
                   NodeMatrix& out, NodeMatrix& tmp) {
  const std::size_t n = h.rows(), d = h.cols();
  if (out.rows() != n || out.cols() != d) out = NodeMatrix(n, d);
  switch (spec.kind) {
    case ReactionKind::Fisher: {
      auto o = out.values();
      auto x = h.values();
      for (std::size_t k = 0; k < x.size(); ++k) o[k] = x[k] * (1.0 - x[k]);
      return;
    }
    case ReactionKind::AllenCahn: {
      auto o = out.values();
      auto x = h.values();
      for (std::size_t k = 0; k < x.size(); ++k) o[k] = x[k] * (1.0 - x[k] * x[k]);
      return;
    }
    case ReactionKind::Zeldovich: {
      auto o = out.values();
      auto x = h.values();
      for (std::size_t k = 0; k < x.size(); ++k) o[k] = x[k] * (x[k] - x[k] * x[k]);
      return;
    }
    case ReactionKind::BlurSharpen: {
      if (!ops.adjacency_squared)
        throw DataError("reaction: blur-sharpen requires the squared adjacency");
      spmm_into(ops.adjacency, h, out);
      spmm_into(*ops.adjacency_squared, h, tmp);
      auto o = out.values();
      auto t = tmp.values();
      for (std::size_t k = 0; k < o.size(); ++k) o[k] -= t[k];
      return;
    }
    case ReactionKind::Source: {
      if (!ops.initial_state)
        throw DataError("reaction: source term requires the initial state H(0)");
      if (!ops.initial_state->same_shape(h))
        throw DataError("reaction: H(0) shape mismatch");
      auto o = out.values();
      auto s = ops.initial_state->values();
      std::copy(s.begin(), s.end(), o.begin());
      return;
    }
    case ReactionKind::FilterBank: {
      spmm_into(ops.laplacian, h, out);
      return;
    }
    case ReactionKind::FilterBankStar: {
      spmm_into(ops.laplacian, h, out);
      auto o = out.values();
      auto x = h.values();
      for (std::size_t k = 0; k < o.size(); ++k) o[k] += x[k];
      return;
    }
    case ReactionKind::DiffusionOnly: {
      out.fill(0.0);
      return;
    }
    case ReactionKind::GcnStep:
      throw ConfigError("reaction: gcnstep is a discrete baseline, not a reaction term");
  }
}

}  // namespace

NodeMatrix reaction(const ReactionSpec& spec, const OperatorBundle& ops, const NodeMatrix& h) {
  NodeMatrix out, tmp;
  reaction_into(spec, ops, h, out, tmp);
  return out;
}

void rhs_into(const ReactionSpec& spec, const OperatorBundle& ops, const Coefficients& coeffs,
              const NodeMatrix& h, NodeMatrix& out, RhsWorkspace& ws) {
  if (ops.adjacency.n_nodes() != h.rows()) throw DataError("rhs: state/operator mismatch");
  spmm_into(ops.laplacian, h, ws.diffusion);
  reaction_into(spec, ops, h, ws.reac, ws.tmp);
  const std::size_t n = h.rows(), d = h.cols();
  if (out.rows() != n || out.cols() != d) out = NodeMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = coeffs.alpha_at(i);
    const double b = coeffs.beta_at(i);
    auto o = out.row(i);
    auto diff = ws.diffusion.row(i);
    auto reac = ws.reac.row(i);
    for (std::size_t c = 0; c < d; ++c) o[c] = -a * diff[c] + b * reac[c];
  }
}

NodeMatrix rhs(const ReactionSpec& spec, const OperatorBundle& ops, const Coefficients& coeffs,
               const NodeMatrix& h) {
  NodeMatrix out;
  RhsWorkspace ws;
  rhs_into(spec, ops, coeffs, h, out, ws);
  return out;
}

namespace {

void check_finite(const NodeMatrix& h, std::size_t step) {
  if (!h.all_finite())
    throw DivergenceError("integrate: non-finite state at step " + std::to_string(step), step);
}

}  // namespace

IntegrateResult integrate(const ReactionSpec& spec, const OperatorBundle& ops,
                          const Coefficients& coeffs, const SolverConfig& cfg,
                          const NodeMatrix& h0, bool keep_trace) {
  cfg.validate();
  coeffs.validate(h0.rows());
  check_finite(h0, 0);

  const std::size_t n_steps = cfg.n_steps();
  const double tau = cfg.tau;
  const std::size_t n = h0.rows(), d = h0.cols();

  IntegrateResult result;
  result.state = h0;
  if (keep_trace) {
    result.trace.reserve(n_steps + 1);
    result.trace.push_back(h0);
  }

  RhsWorkspace ws;
  NodeMatrix f(n, d);
  if (cfg.method == SolverMethod::Euler) {
    for (std::size_t step = 1; step <= n_steps; ++step) {
      rhs_into(spec, ops, coeffs, result.state, f, ws);
      auto x = result.state.values();
      auto fv = f.values();
      for (std::size_t k = 0; k < x.size(); ++k) x[k] += tau * fv[k];
      check_finite(result.state, step);
      if (keep_trace) result.trace.push_back(result.state);
    }
  } else {
    NodeMatrix k1(n, d), k2(n, d), k3(n, d), k4(n, d), stage(n, d);
    const auto blend = [&](const NodeMatrix& base, const NodeMatrix& slope, double scale) {
      auto s = stage.values();
      auto b = base.values();
      auto sl = slope.values();
      for (std::size_t k = 0; k < s.size(); ++k) s[k] = b[k] + scale * sl[k];
    };
    for (std::size_t step = 1; step <= n_steps; ++step) {
      rhs_into(spec, ops, coeffs, result.state, k1, ws);
      blend(result.state, k1, tau / 2.0);
      rhs_into(spec, ops, coeffs, stage, k2, ws);
      blend(result.state, k2, tau / 2.0);
      rhs_into(spec, ops, coeffs, stage, k3, ws);
      blend(result.state, k3, tau);
      rhs_into(spec, ops, coeffs, stage, k4, ws);
      auto x = result.state.values();
      for (std::size_t k = 0; k < x.size(); ++k)
        x[k] += tau / 6.0 *
                (k1.values()[k] + 2.0 * k2.values()[k] + 2.0 * k3.values()[k] + k4.values()[k]);
      check_finite(result.state, step);
      if (keep_trace) result.trace.push_back(result.state);
    }
  }
  return result;
}

NodeMatrix gcn_step_baseline(const OperatorBundle& ops, const NodeMatrix& h, const NodeMatrix& w) {
  // (I - L) H = H - L H, then the dense weight and relu.
  NodeMatrix lh = spmm(ops.laplacian, h);
  NodeMatrix prop(h.rows(), h.cols());
  for (std::size_t k = 0; k < prop.values().size(); ++k)
    prop.values()[k] = h.values()[k] - lh.values()[k];
  NodeMatrix out = matmul(prop, w);
  for (double& v : out.values())
    if (v < 0.0) v = 0.0;
  return out;
}

NodeMatrix blur_then_sharpen(const OperatorBundle& ops, const NodeMatrix& h) {
  NodeMatrix blurred = spmm(ops.adjacency, h);
  NodeMatrix sharp = spmm(ops.laplacian, blurred);
  for (std::size_t k = 0; k < blurred.values().size(); ++k)
    blurred.values()[k] += sharp.values()[k];
  return blurred;
}

}  // namespace gread
