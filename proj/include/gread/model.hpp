#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gread/attention.hpp"
#include "gread/graph.hpp"
#include "gread/reaction.hpp"

namespace gread {

enum class AdjacencyMode { Original, Soft };  // OA / SA

const char* adjacency_mode_name(AdjacencyMode m);
AdjacencyMode adjacency_mode_from_name(std::string_view name);
const char* attention_scale_name(AttentionScale s);
AttentionScale attention_scale_from_name(std::string_view name);

struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t n_classes = 2;
  ReactionSpec reaction;
  AdjacencyMode adjacency_mode = AdjacencyMode::Soft;
  CoeffMode alpha_mode = CoeffMode::Scalar;
  CoeffMode beta_mode = CoeffMode::Vector;
  SolverConfig solver;
  double input_dropout = 0.0;
  double dropout = 0.0;
  std::size_t attention_dim = 0;  // 0 means hidden_dim
  AttentionScale attention_scale = AttentionScale::SqrtKeyDim;

  std::size_t key_dim() const { return attention_dim == 0 ? hidden_dim : attention_dim; }
  void validate() const;
};

struct ModelParams {
  NodeMatrix enc_w1;  // in_dim x hidden
  std::vector<double> enc_b1;
  NodeMatrix enc_w2;  // hidden x hidden
  std::vector<double> enc_b2;
  NodeMatrix out_w;  // hidden x classes
  std::vector<double> out_b;
  std::optional<AttentionParams> attention;  // present iff SA
  Coefficients coeffs;

  // Glorot-uniform weights, zero biases, alpha = beta = 1.
  static ModelParams init(const ModelConfig& cfg, std::size_t in_dim, std::size_t n_nodes,
                          std::uint64_t seed);
};

// Flat views over every trainable array, in declared order:
// enc_w1, enc_b1, enc_w2, enc_b2, out_w, out_b, [w_key, w_query,] alpha, beta.
// Gradients, optimizer moments and checkpoints all follow this order.
std::vector<std::span<double>> param_arrays(ModelParams& p);
std::vector<std::span<const double>> param_arrays(const ModelParams& p);
std::vector<std::string> param_names(const ModelParams& p);

enum class ForwardMode { Train, Eval };

// Everything the backward pass replays: dropout masks, encoder
// pre-activations, attention projections, operators and the state trace.
struct ForwardCache {
  NodeMatrix x_dropped;  // input after (possible) input dropout
  NodeMatrix z1, a1, z2, h0;
  std::optional<NodeMatrix> attn_key, attn_query;
  double attn_divisor = 1.0;
  OperatorBundle ops;
  std::vector<NodeMatrix> state_trace;  // H(0..n_steps)
  std::vector<std::uint8_t> out_mask;   // per-entry keep mask at the output site
  double out_keep_scale = 1.0;          // 1/(1-p); 1 when dropout inactive
  bool out_mask_active = false;
  NodeMatrix ht_dropped;  // state fed into the output affine
};

// Returns logits (N x classes). Train mode applies seeded inverted dropout at
// the two configured sites; Eval disables both. When `cache` is non-null the
// full trace is recorded for backward() or embedding export.
NodeMatrix forward(const ModelConfig& cfg, const ModelParams& params, const LabeledGraph& data,
                   ForwardMode mode, std::uint64_t seed = 0, ForwardCache* cache = nullptr);

// Argmax per row; ties resolve to the lowest class index.
std::vector<int> predict(const ModelConfig& cfg, const ModelParams& params,
                         const LabeledGraph& data);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::size_t in_dim = 0;
  std::size_t n_nodes = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gread
