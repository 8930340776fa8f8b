#include "gread/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gread/errors.hpp"
#include "gread/rng.hpp"

namespace gread {

GradientBundle GradientBundle::zeros_like(const ModelParams& p) {
  GradientBundle g;
  g.enc_w1 = NodeMatrix(p.enc_w1.rows(), p.enc_w1.cols());
  g.enc_b1.assign(p.enc_b1.size(), 0.0);
  g.enc_w2 = NodeMatrix(p.enc_w2.rows(), p.enc_w2.cols());
  g.enc_b2.assign(p.enc_b2.size(), 0.0);
  g.out_w = NodeMatrix(p.out_w.rows(), p.out_w.cols());
  g.out_b.assign(p.out_b.size(), 0.0);
  if (p.attention) {
    AttentionParams a;
    a.w_key = NodeMatrix(p.attention->w_key.rows(), p.attention->w_key.cols());
    a.w_query = NodeMatrix(p.attention->w_query.rows(), p.attention->w_query.cols());
    g.attention = std::move(a);
  }
  g.alpha.assign(p.coeffs.alpha.size(), 0.0);
  g.beta.assign(p.coeffs.beta.size(), 0.0);
  return g;
}

template <typename Bundle, typename Span>
static std::vector<Span> grad_arrays_impl(Bundle& g) {
  std::vector<Span> out;
  out.push_back(g.enc_w1.values());
  out.push_back(Span(g.enc_b1));
  out.push_back(g.enc_w2.values());
  out.push_back(Span(g.enc_b2));
  out.push_back(g.out_w.values());
  out.push_back(Span(g.out_b));
  if (g.attention) {
    out.push_back(g.attention->w_key.values());
    out.push_back(g.attention->w_query.values());
  }
  out.push_back(Span(g.alpha));
  out.push_back(Span(g.beta));
  return out;
}

std::vector<std::span<double>> param_arrays(GradientBundle& g) {
  return grad_arrays_impl<GradientBundle, std::span<double>>(g);
}

std::vector<std::span<const double>> param_arrays(const GradientBundle& g) {
  return grad_arrays_impl<const GradientBundle, std::span<const double>>(g);
}

bool GradientBundle::all_finite() const {
  for (const auto arr : param_arrays(*this))
    for (double v : arr)
      if (!std::isfinite(v)) return false;
  return true;
}

CrossEntropyResult cross_entropy(const NodeMatrix& logits, const std::vector<int>& labels,
                                 const std::vector<std::uint8_t>& mask) {
  if (labels.size() != logits.rows() || mask.size() != logits.rows())
    throw DataError("cross_entropy: label/mask length mismatch");
  std::size_t n_masked = 0;
  for (auto m : mask) n_masked += m != 0;
  if (n_masked == 0) throw DataError("cross_entropy: empty mask");

  const std::size_t classes = logits.cols();
  CrossEntropyResult res;
  res.dlogits = NodeMatrix(logits.rows(), classes);
  const double inv_n = 1.0 / static_cast<double>(n_masked);
  double loss = 0.0;
  std::vector<double> p(classes);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const auto row = logits.row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      p[j] = std::exp(row[j] - hi);
      total += p[j];
    }
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw DataError("cross_entropy: label out of range at node " + std::to_string(i));
    loss += -(row[y] - hi - std::log(total));
    auto drow = res.dlogits.row(i);
    for (std::size_t j = 0; j < classes; ++j) drow[j] = p[j] / total * inv_n;
    drow[y] -= inv_n;
  }
  res.loss = loss * inv_n;
  return res;
}

namespace {

std::vector<double> column_sums(const NodeMatrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
  return out;
}

NodeMatrix row_scaled(const NodeMatrix& g, const Coefficients& coeffs, bool use_alpha) {
  NodeMatrix out(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double s = use_alpha ? coeffs.alpha_at(i) : coeffs.beta_at(i);
    const auto src = g.row(i);
    auto dst = out.row(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = s * src[c];
  }
  return out;
}

void add_into(NodeMatrix& dst, const NodeMatrix& src, double scale = 1.0) {
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += scale * s[k];
}

NodeMatrix scaled(const NodeMatrix& src, double scale) {
  NodeMatrix out = src;
  for (double& v : out.values()) v *= scale;
  return out;
}

// acc[k] += sign * dot(u_row(i), v_row(col_k)) over the pattern's entries;
// the vector-Jacobian of a sparse-times-dense product w.r.t. the sparse
// weights, restricted to the stored pattern.
void pattern_outer_accumulate(const SparseGraph& pattern, const NodeMatrix& u, const NodeMatrix& v,
                              double sign, std::vector<double>& acc) {
  for (std::size_t i = 0; i < pattern.n_nodes(); ++i) {
    const auto u_row = u.row(i);
    for (std::size_t k = pattern.row_begin(i); k < pattern.row_end(i); ++k) {
      const auto v_row = v.row(pattern.col(k));
      double dot = 0.0;
      for (std::size_t c = 0; c < u_row.size(); ++c) dot += u_row[c] * v_row[c];
      acc[k] += sign * dot;
    }
  }
}

// Reverse pass through one rhs evaluation f(H) = -alpha.*(L H) + beta.*r(H).
// Accumulates coefficient, soft-adjacency and source-state adjoints; returns
// the state adjoint contribution.
struct RhsVjp {
  const ModelConfig& cfg;
  const ModelParams& params;
  const OperatorBundle& ops;
  const SparseGraph lap_t;
  const SparseGraph adj_t;       // empty unless needed
  const SparseGraph square_t;    // empty unless BS
  const bool track_soft;         // SA mode: accumulate d(soft adjacency)
  std::vector<double>& d_alpha;
  std::vector<double>& d_beta;
  std::vector<double>& d_soft;   // aligned with ops.adjacency weights
  NodeMatrix& d_h0_source;       // source-term adjoint

  RhsVjp(const ModelConfig& cfg_, const ModelParams& params_, const OperatorBundle& ops_,
         bool track_soft_, std::vector<double>& d_alpha_, std::vector<double>& d_beta_,
         std::vector<double>& d_soft_, NodeMatrix& d_h0_source_)
      : cfg(cfg_),
        params(params_),
        ops(ops_),
        lap_t(transpose(ops_.laplacian)),
        adj_t(needs_adj_t(cfg_) ? transpose(ops_.adjacency) : SparseGraph{}),
        square_t(cfg_.reaction.kind == ReactionKind::BlurSharpen
                     ? transpose(*ops_.adjacency_squared)
                     : SparseGraph{}),
        track_soft(track_soft_),
        d_alpha(d_alpha_),
        d_beta(d_beta_),
        d_soft(d_soft_),
        d_h0_source(d_h0_source_) {}

  static bool needs_adj_t(const ModelConfig& cfg_) {
    return cfg_.reaction.kind == ReactionKind::BlurSharpen;
  }

  NodeMatrix operator()(const NodeMatrix& h, const NodeMatrix& g) const {
    const Coefficients& coeffs = params.coeffs;
    const std::size_t n = h.rows(), d = h.cols();

    const NodeMatrix diffusion = spmm(ops.laplacian, h);
    const NodeMatrix reac = reaction(cfg.reaction, ops, h);

    // Coefficient adjoints; scalar mode collapses the per-node sums.
    for (std::size_t i = 0; i < n; ++i) {
      double acc_a = 0.0, acc_b = 0.0;
      const auto g_row = g.row(i);
      const auto diff_row = diffusion.row(i);
      const auto reac_row = reac.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        acc_a -= g_row[c] * diff_row[c];
        acc_b += g_row[c] * reac_row[c];
      }
      d_alpha[coeffs.alpha_mode == CoeffMode::Scalar ? 0 : i] += acc_a;
      d_beta[coeffs.beta_mode == CoeffMode::Scalar ? 0 : i] += acc_b;
    }

    const NodeMatrix ag = row_scaled(g, coeffs, /*use_alpha=*/true);
    const NodeMatrix bg = row_scaled(g, coeffs, /*use_alpha=*/false);

    // Diffusion: dH -= L^T (alpha .* G); soft mode also gets
    // d(A)_ij += sum_c (alpha .* G)(i,c) H(j,c) since L = I - A.
    NodeMatrix dh = scaled(spmm(lap_t, ag), -1.0);
    if (track_soft) pattern_outer_accumulate(ops.adjacency, ag, h, +1.0, d_soft);

    switch (cfg.reaction.kind) {
      case ReactionKind::Fisher: {
        for (std::size_t k = 0; k < dh.values().size(); ++k) {
          const double x = h.values()[k];
          dh.values()[k] += bg.values()[k] * (1.0 - 2.0 * x);
        }
        break;
      }
      case ReactionKind::AllenCahn: {
        for (std::size_t k = 0; k < dh.values().size(); ++k) {
          const double x = h.values()[k];
          dh.values()[k] += bg.values()[k] * (1.0 - 3.0 * x * x);
        }
        break;
      }
      case ReactionKind::Zeldovich: {
        for (std::size_t k = 0; k < dh.values().size(); ++k) {
          const double x = h.values()[k];
          dh.values()[k] += bg.values()[k] * (2.0 * x - 3.0 * x * x);
        }
        break;
      }
      case ReactionKind::BlurSharpen: {
        add_into(dh, spmm(adj_t, bg));
        add_into(dh, spmm(square_t, bg), -1.0);
        if (track_soft) {
          // r = A H - A (A H): product rule over both factors of A^2.
          pattern_outer_accumulate(ops.adjacency, bg, h, +1.0, d_soft);
          const NodeMatrix mid = spmm(ops.adjacency, h);
          pattern_outer_accumulate(ops.adjacency, bg, mid, -1.0, d_soft);
          const NodeMatrix at_bg = spmm(adj_t, bg);
          pattern_outer_accumulate(ops.adjacency, at_bg, h, -1.0, d_soft);
        }
        break;
      }
      case ReactionKind::Source: {
        add_into(d_h0_source, bg);
        break;
      }
      case ReactionKind::FilterBank: {
        add_into(dh, spmm(lap_t, bg));
        if (track_soft) pattern_outer_accumulate(ops.adjacency, bg, h, -1.0, d_soft);
        break;
      }
      case ReactionKind::FilterBankStar: {
        add_into(dh, spmm(lap_t, bg));
        add_into(dh, bg);
        if (track_soft) pattern_outer_accumulate(ops.adjacency, bg, h, -1.0, d_soft);
        break;
      }
      case ReactionKind::DiffusionOnly:
        break;
      case ReactionKind::GcnStep:
        throw ConfigError("backward: gcnstep has no reaction adjoint");
    }
    return dh;
  }
};

NodeMatrix relu_backward(const NodeMatrix& pre_activation, const NodeMatrix& g) {
  NodeMatrix out = g;
  for (std::size_t k = 0; k < out.values().size(); ++k)
    if (pre_activation.values()[k] <= 0.0) out.values()[k] = 0.0;
  return out;
}

}  // namespace

GradientBundle backward(const ModelConfig& cfg, const ModelParams& params,
                        const ForwardCache& cache, const NodeMatrix& dlogits) {
  if (cache.state_trace.empty())
    throw DataError("backward: forward cache holds no state trace");

  GradientBundle g = GradientBundle::zeros_like(params);
  const bool soft = cfg.adjacency_mode == AdjacencyMode::Soft;

  // Output affine.
  g.out_w = matmul_at_b(cache.ht_dropped, dlogits);
  g.out_b = column_sums(dlogits);
  NodeMatrix d_ht = matmul_a_bt(dlogits, params.out_w);

  // Output-site dropout mask replay.
  if (cache.out_mask_active) {
    auto v = d_ht.values();
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = cache.out_mask[k] ? v[k] * cache.out_keep_scale : 0.0;
  }

  // Reverse the unrolled integrator.
  const SolverConfig& solver = cfg.solver;
  const std::size_t n_steps = solver.n_steps();
  if (cache.state_trace.size() != n_steps + 1)
    throw DataError("backward: trace length does not match the solver config");
  const double tau = solver.tau;
  const std::size_t n = cache.h0.rows(), dim = cache.h0.cols();

  std::vector<double> d_soft(soft ? cache.ops.adjacency.nnz() : 0, 0.0);
  NodeMatrix d_h0_source(n, dim);
  const RhsVjp vjp(cfg, params, cache.ops, soft, g.alpha, g.beta, d_soft, d_h0_source);

  NodeMatrix adjoint = std::move(d_ht);
  if (solver.method == SolverMethod::Euler) {
    for (std::size_t step = n_steps; step >= 1; --step) {
      const NodeMatrix& h = cache.state_trace[step - 1];
      const NodeMatrix dh = vjp(h, scaled(adjoint, tau));
      add_into(adjoint, dh);
    }
  } else {
    RhsWorkspace ws;
    NodeMatrix k1(n, dim), k2(n, dim), k3(n, dim);
    NodeMatrix y2(n, dim), y3(n, dim), y4(n, dim);
    for (std::size_t step = n_steps; step >= 1; --step) {
      const NodeMatrix& h = cache.state_trace[step - 1];
      // Recompute the stage states instead of storing them.
      rhs_into(cfg.reaction, cache.ops, params.coeffs, h, k1, ws);
      y2 = h;
      add_into(y2, k1, tau / 2.0);
      rhs_into(cfg.reaction, cache.ops, params.coeffs, y2, k2, ws);
      y3 = h;
      add_into(y3, k2, tau / 2.0);
      rhs_into(cfg.reaction, cache.ops, params.coeffs, y3, k3, ws);
      y4 = h;
      add_into(y4, k3, tau);

      NodeMatrix a_k4 = scaled(adjoint, tau / 6.0);
      const NodeMatrix dy4 = vjp(y4, a_k4);

      NodeMatrix a_k3 = scaled(adjoint, tau / 3.0);
      add_into(a_k3, dy4, tau);
      const NodeMatrix dy3 = vjp(y3, a_k3);

      NodeMatrix a_k2 = scaled(adjoint, tau / 3.0);
      add_into(a_k2, dy3, tau / 2.0);
      const NodeMatrix dy2 = vjp(y2, a_k2);

      NodeMatrix a_k1 = scaled(adjoint, tau / 6.0);
      add_into(a_k1, dy2, tau / 2.0);
      const NodeMatrix dy1 = vjp(h, a_k1);

      add_into(adjoint, dy4);
      add_into(adjoint, dy3);
      add_into(adjoint, dy2);
      add_into(adjoint, dy1);
    }
  }

  NodeMatrix d_h0 = std::move(adjoint);
  add_into(d_h0, d_h0_source);

  // Soft adjacency: softmax rows, then the scaled dot-product scores.
  if (soft) {
    const SparseGraph& atilde = cache.ops.adjacency;
    std::vector<double> d_score(atilde.nnz());
    for (std::size_t i = 0; i < atilde.n_nodes(); ++i) {
      double inner = 0.0;
      for (std::size_t k = atilde.row_begin(i); k < atilde.row_end(i); ++k)
        inner += atilde.weight(k) * d_soft[k];
      for (std::size_t k = atilde.row_begin(i); k < atilde.row_end(i); ++k)
        d_score[k] = atilde.weight(k) * (d_soft[k] - inner);
    }

    const NodeMatrix& key_rows = *cache.attn_key;
    const NodeMatrix& query_rows = *cache.attn_query;
    const double inv_div = 1.0 / cache.attn_divisor;
    NodeMatrix d_key(key_rows.rows(), key_rows.cols());
    NodeMatrix d_query(query_rows.rows(), query_rows.cols());
    for (std::size_t i = 0; i < atilde.n_nodes(); ++i) {
      auto dk_row = d_key.row(i);
      for (std::size_t k = atilde.row_begin(i); k < atilde.row_end(i); ++k) {
        const std::size_t j = atilde.col(k);
        const double s = d_score[k] * inv_div;
        const auto q_row = query_rows.row(j);
        const auto k_row = key_rows.row(i);
        auto dq_row = d_query.row(j);
        for (std::size_t c = 0; c < dk_row.size(); ++c) {
          dk_row[c] += s * q_row[c];
          dq_row[c] += s * k_row[c];
        }
      }
    }

    g.attention->w_key = matmul_at_b(cache.h0, d_key);
    g.attention->w_query = matmul_at_b(cache.h0, d_query);
    add_into(d_h0, matmul_a_bt(d_key, params.attention->w_key));
    add_into(d_h0, matmul_a_bt(d_query, params.attention->w_query));
  }

  // Encoder.
  const NodeMatrix d_z2 = relu_backward(cache.z2, d_h0);
  g.enc_w2 = matmul_at_b(cache.a1, d_z2);
  g.enc_b2 = column_sums(d_z2);
  const NodeMatrix d_a1 = matmul_a_bt(d_z2, params.enc_w2);
  const NodeMatrix d_z1 = relu_backward(cache.z1, d_a1);
  g.enc_w1 = matmul_at_b(cache.x_dropped, d_z1);
  g.enc_b1 = column_sums(d_z1);

  if (!g.all_finite()) throw DivergenceError("backward: non-finite gradients");
  return g;
}

AdamState AdamState::init(const ModelParams& p) {
  AdamState s;
  for (const auto arr : param_arrays(p)) {
    s.m.emplace_back(arr.size(), 0.0);
    s.v.emplace_back(arr.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, ModelParams& params, const GradientBundle& grads,
               const TrainConfig& cfg) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto theta = param_arrays(params);
  const auto grad = param_arrays(grads);
  const auto names = param_names(params);
  if (theta.size() != grad.size() || theta.size() != state.m.size())
    throw DataError("adam_step: parameter/gradient layout mismatch");

  ++state.t;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (std::size_t a = 0; a < theta.size(); ++a) {
    if (cfg.freeze_coefficients && (names[a] == "alpha" || names[a] == "beta")) continue;
    auto& m = state.m[a];
    auto& v = state.v[a];
    for (std::size_t k = 0; k < theta[a].size(); ++k) {
      const double gk = grad[a][k];
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * gk;
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * gk * gk;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[a][k] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + kEps) + cfg.weight_decay * theta[a][k]);
    }
  }
}

double accuracy(const NodeMatrix& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask) {
  std::size_t n_masked = 0, correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    ++n_masked;
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    correct += static_cast<int>(best) == labels[i];
  }
  if (n_masked == 0) throw DataError("accuracy: empty mask");
  return static_cast<double>(correct) / static_cast<double>(n_masked);
}

FitResult fit(const ModelConfig& mcfg, const TrainConfig& tcfg, const LabeledGraph& data) {
  mcfg.validate();
  return fit(mcfg, tcfg, data,
             ModelParams::init(mcfg, data.features.cols(), data.graph.n_nodes(), tcfg.seed));
}

FitResult fit(const ModelConfig& mcfg, const TrainConfig& tcfg, const LabeledGraph& data,
              ModelParams initial_params) {
  mcfg.validate();
  data.validate();
  if (!(tcfg.lr > 0.0)) throw ConfigError("fit: lr must be positive");
  bool has_train = false, has_val = false, has_test = false;
  for (auto m : data.train_mask) has_train |= m != 0;
  for (auto m : data.val_mask) has_val |= m != 0;
  for (auto m : data.test_mask) has_test |= m != 0;
  if (!has_train || !has_val) throw DataError("fit: train and val masks must be nonempty");

  ModelParams params = std::move(initial_params);
  AdamState adam = AdamState::init(params);

  FitResult result;
  result.best_params = params;
  double best_val = -1.0;

  Rng epoch_seeds = Rng(tcfg.seed).fork(0x65706f63);
  std::size_t consecutive_bad = 0;
  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const std::uint64_t seed = epoch_seeds.next_u64();
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    try {
      ForwardCache cache;
      const NodeMatrix logits = forward(mcfg, params, data, ForwardMode::Train, seed, &cache);
      auto ce = cross_entropy(logits, data.labels, data.train_mask);
      if (!std::isfinite(ce.loss))
        throw DivergenceError("fit: non-finite training loss at epoch " + std::to_string(epoch));
      train_loss = ce.loss;
      const GradientBundle grads = backward(mcfg, params, cache, ce.dlogits);
      adam_step(adam, params, grads, tcfg);
      consecutive_bad = 0;
    } catch (const DivergenceError& e) {
      ++consecutive_bad;
      if (consecutive_bad >= 3)
        throw DivergenceError("fit: aborted after 3 consecutive diverged epochs (" +
                                  std::string(e.what()) + ")",
                              e.step_index);
    }

    const NodeMatrix eval_logits = forward(mcfg, params, data, ForwardMode::Eval);
    const double val_acc = accuracy(eval_logits, data.labels, data.val_mask);
    const double test_acc = has_test ? accuracy(eval_logits, data.labels, data.test_mask)
                                     : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back({epoch, train_loss, val_acc, test_acc});

    if (val_acc > best_val) {
      best_val = val_acc;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (tcfg.patience && epoch >= result.best_epoch + *tcfg.patience) break;
  }
  return result;
}

}  // namespace gread
