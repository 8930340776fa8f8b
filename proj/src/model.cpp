#include "gread/model.hpp"

#include <cmath>
#include <fstream>

#include "gread/errors.hpp"
#include "gread/rng.hpp"
#include "json.hpp"

namespace gread {

const char* adjacency_mode_name(AdjacencyMode m) {
  return m == AdjacencyMode::Original ? "oa" : "sa";
}

AdjacencyMode adjacency_mode_from_name(std::string_view name) {
  if (name == "oa") return AdjacencyMode::Original;
  if (name == "sa") return AdjacencyMode::Soft;
  throw ConfigError("unknown adjacency mode: " + std::string(name));
}

const char* attention_scale_name(AttentionScale s) {
  return s == AttentionScale::SqrtKeyDim ? "sqrt" : "linear";
}

AttentionScale attention_scale_from_name(std::string_view name) {
  if (name == "sqrt") return AttentionScale::SqrtKeyDim;
  if (name == "linear") return AttentionScale::KeyDim;
  throw ConfigError("unknown attention scale: " + std::string(name));
}

void ModelConfig::validate() const {
  if (hidden_dim < 1) throw ConfigError("ModelConfig: hidden_dim must be >= 1");
  if (n_classes < 1) throw ConfigError("ModelConfig: n_classes must be >= 1");
  if (input_dropout < 0.0 || input_dropout >= 1.0)
    throw ConfigError("ModelConfig: input_dropout must lie in [0, 1)");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("ModelConfig: dropout must lie in [0, 1)");
  if (reaction.kind == ReactionKind::GcnStep)
    throw ConfigError("ModelConfig: gcnstep is an analysis baseline, not a model reaction");
  solver.validate();
}

namespace {

NodeMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  NodeMatrix w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t in_dim, std::size_t n_nodes,
                              std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  p.enc_w1 = glorot(in_dim, cfg.hidden_dim, rng);
  p.enc_b1.assign(cfg.hidden_dim, 0.0);
  p.enc_w2 = glorot(cfg.hidden_dim, cfg.hidden_dim, rng);
  p.enc_b2.assign(cfg.hidden_dim, 0.0);
  p.out_w = glorot(cfg.hidden_dim, cfg.n_classes, rng);
  p.out_b.assign(cfg.n_classes, 0.0);
  if (cfg.adjacency_mode == AdjacencyMode::Soft) {
    AttentionParams attn;
    attn.w_key = glorot(cfg.hidden_dim, cfg.key_dim(), rng);
    attn.w_query = glorot(cfg.hidden_dim, cfg.key_dim(), rng);
    p.attention = std::move(attn);
  }
  p.coeffs.alpha_mode = cfg.alpha_mode;
  p.coeffs.beta_mode = cfg.beta_mode;
  // The reaction branch starts switched off: training must opt in. Starting
  // beta at 1 makes blur-sharpen an aggressive low-pass on sparse graphs and
  // measurably stalls optimization there.
  p.coeffs.alpha.assign(cfg.alpha_mode == CoeffMode::Scalar ? 1 : n_nodes, 1.0);
  p.coeffs.beta.assign(cfg.beta_mode == CoeffMode::Scalar ? 1 : n_nodes, 0.0);
  return p;
}

template <typename Params, typename Span>
static std::vector<Span> arrays_impl(Params& p) {
  std::vector<Span> out;
  out.push_back(p.enc_w1.values());
  out.push_back(Span(p.enc_b1));
  out.push_back(p.enc_w2.values());
  out.push_back(Span(p.enc_b2));
  out.push_back(p.out_w.values());
  out.push_back(Span(p.out_b));
  if (p.attention) {
    out.push_back(p.attention->w_key.values());
    out.push_back(p.attention->w_query.values());
  }
  out.push_back(Span(p.coeffs.alpha));
  out.push_back(Span(p.coeffs.beta));
  return out;
}

std::vector<std::span<double>> param_arrays(ModelParams& p) {
  return arrays_impl<ModelParams, std::span<double>>(p);
}

std::vector<std::span<const double>> param_arrays(const ModelParams& p) {
  return arrays_impl<const ModelParams, std::span<const double>>(p);
}

std::vector<std::string> param_names(const ModelParams& p) {
  std::vector<std::string> names{"enc_w1", "enc_b1", "enc_w2", "enc_b2", "out_w", "out_b"};
  if (p.attention) {
    names.emplace_back("attn_w_key");
    names.emplace_back("attn_w_query");
  }
  names.emplace_back("alpha");
  names.emplace_back("beta");
  return names;
}

namespace {

// Inverted dropout: surviving entries are scaled by 1/(1-p) so eval needs no
// rescaling. Masks come from the forward's seeded stream in a fixed order.
NodeMatrix dropout(const NodeMatrix& x, double p, Rng& rng, std::vector<std::uint8_t>* mask_out) {
  NodeMatrix out = x;
  if (mask_out) mask_out->assign(x.values().size(), 1);
  if (p <= 0.0) return out;
  const double scale = 1.0 / (1.0 - p);
  auto v = out.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (rng.uniform() < p) {
      v[k] = 0.0;
      if (mask_out) (*mask_out)[k] = 0;
    } else {
      v[k] *= scale;
    }
  }
  return out;
}

NodeMatrix affine(const NodeMatrix& x, const NodeMatrix& w, const std::vector<double>& b) {
  NodeMatrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return out;
}

NodeMatrix relu(const NodeMatrix& x) {
  NodeMatrix out = x;
  for (double& v : out.values())
    if (v < 0.0) v = 0.0;
  return out;
}

}  // namespace

NodeMatrix forward(const ModelConfig& cfg, const ModelParams& params, const LabeledGraph& data,
                   ForwardMode mode, std::uint64_t seed, ForwardCache* cache) {
  cfg.validate();
  if (data.features.cols() != params.enc_w1.rows())
    throw DataError("forward: feature dim does not match the encoder input dim");
  if (cfg.adjacency_mode == AdjacencyMode::Soft && !params.attention)
    throw ConfigError("forward: SA mode requires attention parameters");

  const bool train = mode == ForwardMode::Train;
  Rng rng(seed);

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  c.x_dropped = train ? dropout(data.features, cfg.input_dropout, rng, nullptr) : data.features;
  c.z1 = affine(c.x_dropped, params.enc_w1, params.enc_b1);
  c.a1 = relu(c.z1);
  c.z2 = affine(c.a1, params.enc_w2, params.enc_b2);
  c.h0 = relu(c.z2);

  SparseGraph adj;
  if (cfg.adjacency_mode == AdjacencyMode::Soft) {
    c.attn_divisor = attention_scale_divisor(cfg.attention_scale, params.attention->key_dim());
    c.attn_key = matmul(c.h0, params.attention->w_key);
    c.attn_query = matmul(c.h0, params.attention->w_query);
    adj = soft_adjacency_from_projections(data.graph, *c.attn_key, *c.attn_query, c.attn_divisor);
  } else {
    adj = symmetric_normalize(data.graph);
  }
  c.ops = OperatorBundle::build(std::move(adj), cfg.reaction.needs_square(), c.h0);

  IntegrateResult integ;
  try {
    integ = integrate(cfg.reaction, c.ops, params.coeffs, cfg.solver, c.h0, cache != nullptr);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("forward: ") + e.what(), e.step_index);
  }
  c.state_trace = std::move(integ.trace);

  if (train && cfg.dropout > 0.0) {
    c.ht_dropped = dropout(integ.state, cfg.dropout, rng, &c.out_mask);
    c.out_keep_scale = 1.0 / (1.0 - cfg.dropout);
    c.out_mask_active = true;
  } else {
    c.ht_dropped = std::move(integ.state);
    c.out_keep_scale = 1.0;
    c.out_mask_active = false;
  }
  return affine(c.ht_dropped, params.out_w, params.out_b);
}

std::vector<int> predict(const ModelConfig& cfg, const ModelParams& params,
                         const LabeledGraph& data) {
  const NodeMatrix logits = forward(cfg, params, data, ForwardMode::Eval);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

namespace {

// Insertion-ordered JSON keeps the on-disk parameter layout in declared order.
using json = nlohmann::ordered_json;

json matrix_to_json(const NodeMatrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.values().begin(), m.values().end());
  return j;
}

NodeMatrix matrix_from_json(const json& j) {
  NodeMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.values().size()) throw DataError("checkpoint: matrix size mismatch");
  std::copy(data.begin(), data.end(), m.values().begin());
  return m;
}

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["hidden_dim"] = cfg.hidden_dim;
  j["n_classes"] = cfg.n_classes;
  j["reaction"] = reaction_name(cfg.reaction.kind);
  j["adjacency"] = adjacency_mode_name(cfg.adjacency_mode);
  j["alpha_mode"] = coeff_mode_name(cfg.alpha_mode);
  j["beta_mode"] = coeff_mode_name(cfg.beta_mode);
  j["solver"] = solver_name(cfg.solver.method);
  j["tau"] = cfg.solver.tau;
  j["time"] = cfg.solver.time_horizon;
  j["input_dropout"] = cfg.input_dropout;
  j["dropout"] = cfg.dropout;
  j["attention_dim"] = cfg.attention_dim;
  j["attention_scale"] = attention_scale_name(cfg.attention_scale);
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.n_classes = j.at("n_classes").get<std::size_t>();
  cfg.reaction.kind = reaction_from_name(j.at("reaction").get<std::string>());
  cfg.adjacency_mode = adjacency_mode_from_name(j.at("adjacency").get<std::string>());
  cfg.alpha_mode = coeff_mode_from_name(j.at("alpha_mode").get<std::string>());
  cfg.beta_mode = coeff_mode_from_name(j.at("beta_mode").get<std::string>());
  cfg.solver.method = solver_from_name(j.at("solver").get<std::string>());
  cfg.solver.tau = j.at("tau").get<double>();
  cfg.solver.time_horizon = j.at("time").get<double>();
  cfg.input_dropout = j.at("input_dropout").get<double>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.attention_dim = j.at("attention_dim").get<std::size_t>();
  cfg.attention_scale = attention_scale_from_name(j.at("attention_scale").get<std::string>());
  return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format"] = "gread-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(ckpt.config);
  j["in_dim"] = ckpt.in_dim;
  j["n_nodes"] = ckpt.n_nodes;

  json p;
  p["enc_w1"] = matrix_to_json(ckpt.params.enc_w1);
  p["enc_b1"] = ckpt.params.enc_b1;
  p["enc_w2"] = matrix_to_json(ckpt.params.enc_w2);
  p["enc_b2"] = ckpt.params.enc_b2;
  p["out_w"] = matrix_to_json(ckpt.params.out_w);
  p["out_b"] = ckpt.params.out_b;
  if (ckpt.params.attention) {
    p["attn_w_key"] = matrix_to_json(ckpt.params.attention->w_key);
    p["attn_w_query"] = matrix_to_json(ckpt.params.attention->w_query);
  }
  p["alpha"] = ckpt.params.coeffs.alpha;
  p["beta"] = ckpt.params.coeffs.beta;
  j["params"] = std::move(p);

  std::ofstream out(path);
  if (!out) throw DataError("save_checkpoint: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(std::string("load_checkpoint: parse error: ") + e.what());
  }
  if (j.value("format", "") != "gread-checkpoint" || j.value("version", 0) != 1)
    throw DataError("load_checkpoint: unrecognized checkpoint format");

  Checkpoint ckpt;
  ckpt.config = config_from_json(j.at("config"));
  ckpt.in_dim = j.at("in_dim").get<std::size_t>();
  ckpt.n_nodes = j.at("n_nodes").get<std::size_t>();

  const json& p = j.at("params");
  ckpt.params.enc_w1 = matrix_from_json(p.at("enc_w1"));
  ckpt.params.enc_b1 = p.at("enc_b1").get<std::vector<double>>();
  ckpt.params.enc_w2 = matrix_from_json(p.at("enc_w2"));
  ckpt.params.enc_b2 = p.at("enc_b2").get<std::vector<double>>();
  ckpt.params.out_w = matrix_from_json(p.at("out_w"));
  ckpt.params.out_b = p.at("out_b").get<std::vector<double>>();
  if (ckpt.config.adjacency_mode == AdjacencyMode::Soft) {
    AttentionParams attn;
    attn.w_key = matrix_from_json(p.at("attn_w_key"));
    attn.w_query = matrix_from_json(p.at("attn_w_query"));
    ckpt.params.attention = std::move(attn);
  }
  ckpt.params.coeffs.alpha_mode = ckpt.config.alpha_mode;
  ckpt.params.coeffs.beta_mode = ckpt.config.beta_mode;
  ckpt.params.coeffs.alpha = p.at("alpha").get<std::vector<double>>();
  ckpt.params.coeffs.beta = p.at("beta").get<std::vector<double>>();
  ckpt.params.coeffs.validate(ckpt.n_nodes);
  return ckpt;
}

}  // namespace gread
