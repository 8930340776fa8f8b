#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gread/model.hpp"

namespace gread {

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 0.0;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  std::optional<std::size_t> patience;     // off by default
  bool freeze_coefficients = false;        // pins alpha/beta (ablation baselines)
};

// Gradient arrays, shape-congruent with ModelParams.
struct GradientBundle {
  NodeMatrix enc_w1;
  std::vector<double> enc_b1;
  NodeMatrix enc_w2;
  std::vector<double> enc_b2;
  NodeMatrix out_w;
  std::vector<double> out_b;
  std::optional<AttentionParams> attention;  // gradient arrays, same shapes
  std::vector<double> alpha, beta;

  static GradientBundle zeros_like(const ModelParams& p);
  bool all_finite() const;
};

std::vector<std::span<double>> param_arrays(GradientBundle& g);
std::vector<std::span<const double>> param_arrays(const GradientBundle& g);

struct CrossEntropyResult {
  double loss = 0.0;
  NodeMatrix dlogits;
};

// Mean over masked nodes of -log softmax(logits)[label], with its gradient.
CrossEntropyResult cross_entropy(const NodeMatrix& logits, const std::vector<int>& labels,
                                 const std::vector<std::uint8_t>& mask);

// Exact reverse-mode gradients through the cached forward pass: output affine,
// dropout mask replay, the unrolled Euler/RK4 recurrence, the reaction and
// diffusion terms, edge-softmax attention and the encoder.
GradientBundle backward(const ModelConfig& cfg, const ModelParams& params,
                        const ForwardCache& cache, const NodeMatrix& dlogits);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
  static AdamState init(const ModelParams& p);
};

// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with decoupled weight decay
// subtracted as lr * wd * theta alongside the update.
void adam_step(AdamState& state, ModelParams& params, const GradientBundle& grads,
               const TrainConfig& cfg);

// Fraction of masked nodes whose argmax logit matches the label.
double accuracy(const NodeMatrix& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct FitResult {
  ModelParams best_params;
  std::size_t best_epoch = 0;  // 0 when no epoch ran or none was finite
  std::vector<EpochStats> history;
};

// Full-batch training with validation-based model selection. Keeps the params
// of the best validation accuracy seen so far; ties keep the earlier epoch.
// Aborts after three consecutive non-finite losses.
FitResult fit(const ModelConfig& mcfg, const TrainConfig& tcfg, const LabeledGraph& data);

// Same loop from explicit initial parameters (warm starts, pinned baselines).
FitResult fit(const ModelConfig& mcfg, const TrainConfig& tcfg, const LabeledGraph& data,
              ModelParams initial_params);

}  // namespace gread
