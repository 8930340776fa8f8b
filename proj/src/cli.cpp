#include "gread/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gread/analysis.hpp"
#include "gread/errors.hpp"
#include "gread/rng.hpp"

namespace gread::cli {

namespace {

const std::map<std::string, std::string>& schema() {
  static const std::map<std::string, std::string> kSchema = {
      {"seed", "0"},
      {"dataset.kind", "csbm"},  // csbm | homophily | grid | files
      {"dataset.dir", ""},
      {"dataset.lcc", "false"},
      {"csbm.nodes", "100"},
      {"csbm.classes", "2"},
      {"csbm.feat_dim", "2"},
      {"csbm.mu", "-0.5,0.5"},
      {"csbm.sigma", "2"},
      {"csbm.p_intra", "0.9"},
      {"csbm.p_inter", "0.1"},
      {"homophily.nodes", "1480"},
      {"homophily.classes", "5"},
      {"homophily.target_h", "0.5"},
      {"homophily.avg_degree", "3.98"},
      {"homophily.feat_dim", "16"},
      {"homophily.feature_sigma", "1"},
      {"grid.width", "20"},
      {"grid.height", "20"},
      {"grid.noise", "0.05"},
      {"model.reaction", "bs"},
      {"model.adjacency", "sa"},
      {"model.alpha", "sc"},
      {"model.beta", "vc"},
      {"model.hidden_dim", "64"},
      {"model.attention_dim", "0"},
      {"model.attention_scale", "sqrt"},
      {"model.input_dropout", "0.5"},
      {"model.dropout", "0"},
      {"solver.method", "euler"},
      {"solver.tau", "1"},
      {"solver.time", "1"},
      {"train.lr", "0.01"},
      {"train.weight_decay", "0.0005"},
      {"train.epochs", "200"},
      {"train.patience", "0"},
      {"energy.alpha", "1"},
      {"energy.beta", "1"},
      {"sweep.param", "T"},
      {"sweep.grid", "1,2,4"},
      {"sweep.seeds", "3"},
      {"export.times", "0"},
      {"export.checkpoint", ""},
      {"bench.sizes", "4096,8192,16384,32768,65536"},
      {"bench.reaction", "f"},
      {"bench.dim", "16"},
      {"bench.degree", "8"},
  };
  return kSchema;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  cfg.values_ = schema();

  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError(file.string() + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
      cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + kv);
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = raw(key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number '" + s + "'");
  }
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const double v = get_double(key);
  if (v < 0 || v != std::floor(v))
    throw ConfigError("config key '" + key + "': expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& s = raw(key);
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse unsigned integer '" + s + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = raw(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false");
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(raw(key));
  std::string field;
  while (std::getline(ss, field, ',')) {
    field = trim(field);
    if (field.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(field, &pos));
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': cannot parse list entry '" + field + "'");
    }
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (double v : get_double_list(key)) {
    if (v < 0 || v != std::floor(v))
      throw ConfigError("config key '" + key + "': expected nonnegative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void RunConfig::echo(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config echo to " + path.string());
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

ModelConfig RunConfig::model_config(std::size_t n_classes) const {
  ModelConfig m;
  m.hidden_dim = get_size("model.hidden_dim");
  m.n_classes = n_classes;
  m.reaction.kind = reaction_from_name(raw("model.reaction"));
  m.adjacency_mode = adjacency_mode_from_name(raw("model.adjacency"));
  m.alpha_mode = coeff_mode_from_name(raw("model.alpha"));
  m.beta_mode = coeff_mode_from_name(raw("model.beta"));
  m.solver.method = solver_from_name(raw("solver.method"));
  m.solver.tau = get_double("solver.tau");
  m.solver.time_horizon = get_double("solver.time");
  m.input_dropout = get_double("model.input_dropout");
  m.dropout = get_double("model.dropout");
  m.attention_dim = get_size("model.attention_dim");
  m.attention_scale = attention_scale_from_name(raw("model.attention_scale"));
  m.validate();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = get_double("train.lr");
  t.weight_decay = get_double("train.weight_decay");
  t.max_epochs = get_size("train.epochs");
  t.seed = get_u64("seed");
  if (const std::size_t p = get_size("train.patience"); p > 0) t.patience = p;
  if (!(t.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (t.weight_decay < 0.0) throw ConfigError("train.weight_decay must be nonnegative");
  return t;
}

namespace {

LabeledGraph make_grid_dataset(const RunConfig& cfg) {
  const std::size_t width = cfg.get_size("grid.width");
  const std::size_t height = cfg.get_size("grid.height");
  const double noise = cfg.get_double("grid.noise");
  LabeledGraph data;
  data.graph = grid_graph(width, height);
  const std::size_t n = width * height;
  data.features = NodeMatrix(n, 1);
  data.labels.resize(n);
  Rng rng(cfg.get_u64("seed"));
  // Two opposite-corner plateaus on a -1 background; the demo initial
  // condition for blurring vs blurring-sharpening.
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const bool top_left = r < height / 2 && c < width / 2;
      const bool bottom_right = r >= (height + 1) / 2 && c >= (width + 1) / 2;
      const bool high = top_left || bottom_right;
      const std::size_t i = r * width + c;
      data.features(i, 0) = (high ? 1.0 : -1.0) + noise * rng.normal();
      data.labels[i] = high ? 1 : 0;
    }
  stratified_split(data, 0.6, 0.2, cfg.get_u64("seed") + 1);
  return data;
}

}  // namespace

LabeledGraph RunConfig::resolve_dataset() const {
  const std::string& kind = raw("dataset.kind");
  if (kind == "files") {
    const std::string dir = raw("dataset.dir");
    if (dir.empty()) throw ConfigError("dataset.kind = files requires dataset.dir");
    return load_dataset_dir(dir, get_bool("dataset.lcc"));
  }
  if (kind == "csbm") {
    CsbmConfig c;
    c.n_nodes = get_size("csbm.nodes");
    c.n_classes = get_size("csbm.classes");
    c.feat_dim = get_size("csbm.feat_dim");
    c.class_means = get_double_list("csbm.mu");
    c.sigma = get_double("csbm.sigma");
    c.p_intra = get_double("csbm.p_intra");
    c.p_inter = get_double("csbm.p_inter");
    c.seed = get_u64("seed");
    return generate_csbm(c);
  }
  if (kind == "homophily") {
    HomophilyConfig c;
    c.n_nodes = get_size("homophily.nodes");
    c.n_classes = get_size("homophily.classes");
    c.target_h = get_double("homophily.target_h");
    c.avg_degree = get_double("homophily.avg_degree");
    c.feat_dim = get_size("homophily.feat_dim");
    c.feature_sigma = get_double("homophily.feature_sigma");
    c.seed = get_u64("seed");
    return generate_homophily_graph(c);
  }
  if (kind == "grid") return make_grid_dataset(*this);
  throw ConfigError("unknown dataset.kind '" + kind + "'");
}

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const DivergenceError*>(&e)) return 3;
  return 2;  // data errors and anything unexpected
}

template <typename Fn>
int run_guarded(const char* command, Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,train_loss,val_acc,test_acc\n";
  for (const auto& row : history)
    out << row.epoch << ',' << format_double(row.train_loss) << ',' << format_double(row.val_acc)
        << ',' << format_double(row.test_acc) << "\n";
}

}  // namespace

int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  return run_guarded("train", [&] {
    const LabeledGraph data = cfg.resolve_dataset();
    const ModelConfig mcfg = cfg.model_config(data.n_classes());
    const TrainConfig tcfg = cfg.train_config();

    const FitResult result = fit(mcfg, tcfg, data);

    double test_acc = std::numeric_limits<double>::quiet_NaN();
    if (result.history.empty()) {
      bool has_test = false;
      for (auto m : data.test_mask) has_test |= m != 0;
      if (has_test) {
        const NodeMatrix logits = forward(mcfg, result.best_params, data, ForwardMode::Eval);
        test_acc = accuracy(logits, data.labels, data.test_mask);
      }
    } else {
      for (const auto& row : result.history)
        if (row.epoch == result.best_epoch) test_acc = row.test_acc;
    }

    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    write_history_csv(out_dir / "history.csv", result.history);

    Checkpoint ckpt;
    ckpt.config = mcfg;
    ckpt.params = result.best_params;
    ckpt.in_dim = data.features.cols();
    ckpt.n_nodes = data.graph.n_nodes();
    save_checkpoint(out_dir / "checkpoint.json", ckpt);

    const std::string metrics = "test_acc=" + format_double(test_acc) + "\n";
    std::ofstream(out_dir / "metrics.txt") << metrics;
    std::cout << metrics;
  });
}

int cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  return run_guarded("generate", [&] {
    const std::string& kind = cfg.raw("dataset.kind");
    if (kind == "files")
      throw ConfigError("generate needs dataset.kind csbm, homophily or grid");
    const LabeledGraph data = cfg.resolve_dataset();
    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    save_dataset(data, out_dir);
    std::cout << "nodes=" << data.graph.n_nodes() << " edges=" << data.graph.nnz() / 2 << "\n";
    std::cout << "realized_homophily="
              << (data.graph.nnz() > 0 ? format_double(homophily_ratio(data)) : "nan") << "\n";
  });
}

int cmd_energy(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  return run_guarded("energy", [&] {
    if (cfg.raw("model.adjacency") != "oa")
      throw ConfigError("energy supports model.adjacency = oa only");
    const LabeledGraph data = cfg.resolve_dataset();

    ReactionSpec spec;
    spec.kind = reaction_from_name(cfg.raw("model.reaction"));
    SolverConfig solver;
    solver.method = solver_from_name(cfg.raw("solver.method"));
    solver.tau = cfg.get_double("solver.tau");
    solver.time_horizon = cfg.get_double("solver.time");

    const OperatorBundle ops = OperatorBundle::build(symmetric_normalize(data.graph),
                                                     spec.needs_square(), data.features);
    const Coefficients coeffs =
        Coefficients::scalars(cfg.get_double("energy.alpha"), cfg.get_double("energy.beta"));

    const EnergyTrace trace = energy_evolution(spec, ops, coeffs, solver, data.features,
                                               data.graph, cfg.get_u64("seed"));

    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    std::ofstream out(out_dir / "energy.csv");
    if (!out) throw DataError("cannot write energy.csv");
    out << "step,energy,label\n";
    for (std::size_t k = 0; k < trace.energy.size(); ++k)
      out << trace.steps[k] << ',' << format_double(trace.energy[k]) << ','
          << trace.dynamics_label << "\n";
  });
}

int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir, std::size_t jobs) {
  return run_guarded("sweep", [&] {
    const LabeledGraph data = cfg.resolve_dataset();
    const ModelConfig mcfg = cfg.model_config(data.n_classes());
    const TrainConfig tcfg = cfg.train_config();

    const std::string& param_name = cfg.raw("sweep.param");
    SweepParam param;
    if (param_name == "T")
      param = SweepParam::TerminalTime;
    else if (param_name == "tau")
      param = SweepParam::StepSize;
    else
      throw ConfigError("sweep.param must be T or tau");

    const std::vector<double> grid = cfg.get_double_list("sweep.grid");
    const SweepResult result =
        sweep(param, grid, mcfg, tcfg, data, cfg.get_size("sweep.seeds"), jobs);

    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    {
      std::ofstream out(out_dir / "sweep.csv");
      out << "value,mean_acc,std_acc\n";
      for (const auto& row : result.rows)
        out << format_double(row.value) << ',' << format_double(row.mean_acc) << ','
            << format_double(row.std_acc) << "\n";
    }
    {
      std::ofstream out(out_dir / "sweep_raw.csv");
      out << "value,seed,test_acc,failed\n";
      for (const auto& cell : result.raw)
        out << format_double(cell.value) << ',' << cell.seed << ','
            << format_double(cell.test_acc) << ',' << (cell.failed ? 1 : 0) << "\n";
    }
  });
}

int cmd_export(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  return run_guarded("export", [&] {
    const LabeledGraph data = cfg.resolve_dataset();
    const std::vector<double> times = cfg.get_double_list("export.times");
    if (times.empty()) throw ConfigError("export.times must not be empty");

    ModelConfig mcfg;
    ModelParams params;
    const std::string& ckpt_path = cfg.raw("export.checkpoint");
    if (!ckpt_path.empty()) {
      Checkpoint ckpt = load_checkpoint(ckpt_path);
      if (ckpt.in_dim != data.features.cols() || ckpt.n_nodes != data.graph.n_nodes())
        throw DataError("export: checkpoint shape does not match the dataset");
      mcfg = ckpt.config;
      params = std::move(ckpt.params);
    } else {
      mcfg = cfg.model_config(data.n_classes());
      params = ModelParams::init(mcfg, data.features.cols(), data.graph.n_nodes(),
                                 cfg.get_u64("seed"));
    }

    const auto snapshots = export_embeddings(mcfg, params, data, times);
    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    for (std::size_t s = 0; s < snapshots.size(); ++s) {
      std::ofstream out(out_dir / ("embeddings_" + std::to_string(s) + ".csv"));
      out << "node,label";
      for (std::size_t c = 0; c < snapshots[s].states.cols(); ++c) out << ",c" << c;
      out << "\n";
      for (std::size_t i = 0; i < snapshots[s].states.rows(); ++i) {
        out << i << ',' << data.labels[i];
        for (double v : snapshots[s].states.row(i)) out << ',' << format_double(v);
        out << "\n";
      }
    }
  });
}

int cmd_bench(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  return run_guarded("bench", [&] {
    ReactionSpec spec;
    spec.kind = reaction_from_name(cfg.raw("bench.reaction"));
    const auto rows =
        scaling_bench(cfg.get_size_list("bench.sizes"), spec, cfg.get_size("bench.dim"),
                      cfg.get_size("bench.degree"), cfg.get_u64("seed"));
    std::filesystem::create_directories(out_dir);
    cfg.echo(out_dir / "config.cfg");
    std::ofstream out(out_dir / "bench.csv");
    out << "edges,ns_per_step\n";
    for (const auto& row : rows)
      out << row.edges << ',' << format_double(row.ns_per_step) << "\n";
  });
}

}  // namespace gread::cli
