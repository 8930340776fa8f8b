#include "gread/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "gread/errors.hpp"
#include "gread/rng.hpp"

namespace gread {

namespace {

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

long parse_long(const std::string& s, const char* context) {
  long value = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw DataError(std::string(context) + ": cannot parse integer '" + s + "'");
  return value;
}

double parse_double(const std::string& s, const char* context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string(context) + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

void CsbmConfig::validate() const {
  if (n_nodes == 0 || n_classes == 0) throw ConfigError("csbm: node and class counts must be > 0");
  if (n_nodes % n_classes != 0)
    throw ConfigError("csbm: n_nodes must be divisible by n_classes for balanced classes");
  if (class_means.size() != n_classes)
    throw ConfigError("csbm: need one class mean per class");
  if (p_intra < 0.0 || p_intra > 1.0 || p_inter < 0.0 || p_inter > 1.0)
    throw ConfigError("csbm: edge probabilities must lie in [0, 1]");
  if (feat_dim == 0) throw ConfigError("csbm: feat_dim must be > 0");
  if (!(sigma >= 0.0)) throw ConfigError("csbm: sigma must be nonnegative");
}

LabeledGraph generate_csbm(const CsbmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_nodes;
  const std::size_t per_class = n / cfg.n_classes;

  LabeledGraph data;
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = static_cast<int>(i / per_class);

  Rng base(cfg.seed);
  Rng edge_rng = base.fork(1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = data.labels[i] == data.labels[j] ? cfg.p_intra : cfg.p_inter;
      if (edge_rng.uniform() < p) edges.emplace_back(i, j);
    }
  data.graph = SparseGraph::raw_from_edges(n, edges);

  Rng feat_rng = base.fork(2);
  data.features = NodeMatrix(n, cfg.feat_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = cfg.class_means[static_cast<std::size_t>(data.labels[i])];
    for (std::size_t c = 0; c < cfg.feat_dim; ++c)
      data.features(i, c) = mu + cfg.sigma * feat_rng.normal();
  }

  stratified_split(data, 0.6, 0.2, base.fork(3).next_u64());
  return data;
}

void HomophilyConfig::validate() const {
  if (n_nodes < 2 || n_classes < 2)
    throw ConfigError("homophily: need at least 2 nodes and 2 classes");
  if (target_h < 0.0 || target_h > 1.0)
    throw ConfigError("homophily: target_h must lie in [0, 1]");
  if (!(avg_degree > 0.0)) throw ConfigError("homophily: avg_degree must be positive");
  if (avg_degree / 2.0 + 1.0 > static_cast<double>(n_nodes))
    throw ConfigError("homophily: infeasible degree budget for the node count");
  if (feat_dim == 0 && feature_reference == nullptr)
    throw ConfigError("homophily: feat_dim must be > 0");
}

LabeledGraph generate_homophily_graph(const HomophilyConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_nodes;
  const std::size_t classes = cfg.n_classes;

  LabeledGraph data;
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = static_cast<int>(i % classes);

  Rng base(cfg.seed);
  Rng attach_rng = base.fork(1);

  std::vector<std::vector<std::size_t>> members(classes);  // arrived nodes per class
  std::vector<std::size_t> degree(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> adjacent;  // neighbors of the arriving node

  const double per_node = cfg.avg_degree / 2.0;
  double quota = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quota += per_node;
    auto draws = static_cast<std::size_t>(quota);
    quota -= static_cast<double>(draws);
    adjacent.clear();

    const auto own = static_cast<std::size_t>(data.labels[i]);
    for (std::size_t e = 0; e < draws; ++e) {
      std::size_t target = own;
      if (attach_rng.uniform() >= cfg.target_h) {
        std::size_t pick = attach_rng.below(classes - 1);
        target = pick < own ? pick : pick + 1;
      }

      // Degree-proportional choice (degree + 1 so isolated nodes stay
      // reachable) among the drawn class, skipping already-linked nodes.
      double total = 0.0;
      for (std::size_t v : members[target])
        if (std::find(adjacent.begin(), adjacent.end(), v) == adjacent.end())
          total += static_cast<double>(degree[v] + 1);
      if (total <= 0.0) continue;  // nobody of that class yet: drop the draw

      double ticket = attach_rng.uniform() * total;
      std::size_t chosen = members[target].back();
      for (std::size_t v : members[target]) {
        if (std::find(adjacent.begin(), adjacent.end(), v) != adjacent.end()) continue;
        chosen = v;  // stays on the last eligible node if the ticket overshoots
        ticket -= static_cast<double>(degree[v] + 1);
        if (ticket <= 0.0) break;
      }
      edges.emplace_back(i, chosen);
      adjacent.push_back(chosen);
      ++degree[i];
      ++degree[chosen];
    }
    members[own].push_back(i);
  }
  data.graph = SparseGraph::raw_from_edges(n, edges);

  Rng feat_rng = base.fork(2);
  if (cfg.feature_reference) {
    const LabeledGraph& ref = *cfg.feature_reference;
    std::vector<std::vector<std::size_t>> pool(classes);
    for (std::size_t i = 0; i < ref.labels.size(); ++i) {
      const auto l = static_cast<std::size_t>(ref.labels[i]);
      if (l < classes) pool[l].push_back(i);
    }
    for (std::size_t c = 0; c < classes; ++c)
      if (pool[c].empty())
        throw DataError("homophily: feature reference has no nodes of class " + std::to_string(c));
    data.features = NodeMatrix(n, ref.features.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& candidates = pool[static_cast<std::size_t>(data.labels[i])];
      const std::size_t src = candidates[attach_rng.below(candidates.size())];
      std::copy(ref.features.row(src).begin(), ref.features.row(src).end(),
                data.features.row(i).begin());
    }
  } else {
    data.features = NodeMatrix(n, cfg.feat_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t hot = static_cast<std::size_t>(data.labels[i]) % cfg.feat_dim;
      for (std::size_t c = 0; c < cfg.feat_dim; ++c)
        data.features(i, c) = (c == hot ? 1.0 : 0.0) + cfg.feature_sigma * feat_rng.normal();
    }
  }

  stratified_split(data, 0.6, 0.2, base.fork(3).next_u64());
  return data;
}

void stratified_split(LabeledGraph& data, double train_frac, double val_frac, std::uint64_t seed) {
  const std::size_t n = data.labels.size();
  data.train_mask.assign(n, 0);
  data.val_mask.assign(n, 0);
  data.test_mask.assign(n, 0);

  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(data.labels[i]);
    if (l >= by_class.size()) by_class.resize(l + 1);
    by_class[l].push_back(i);
  }

  Rng rng(seed);
  for (auto& nodes : by_class) {
    for (std::size_t k = nodes.size(); k > 1; --k)
      std::swap(nodes[k - 1], nodes[rng.below(k)]);
    const auto count = static_cast<double>(nodes.size());
    auto n_train = static_cast<std::size_t>(std::llround(train_frac * count));
    auto n_val = static_cast<std::size_t>(std::llround(val_frac * count));
    n_train = std::min(n_train, nodes.size());
    n_val = std::min(n_val, nodes.size() - n_train);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (k < n_train)
        data.train_mask[nodes[k]] = 1;
      else if (k < n_train + n_val)
        data.val_mask[nodes[k]] = 1;
      else
        data.test_mask[nodes[k]] = 1;
    }
  }
}

LabeledGraph load_dataset(const std::filesystem::path& edge_path,
                          const std::filesystem::path& feature_path,
                          const std::filesystem::path& label_path,
                          const std::filesystem::path& split_path, bool lcc) {
  // Features first; their row count defines the node set.
  std::ifstream feat_in(feature_path);
  if (!feat_in) throw DataError("load_dataset: cannot open " + feature_path.string());
  std::vector<std::pair<std::size_t, std::vector<double>>> feat_rows;
  std::string line;
  while (std::getline(feat_in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() < 2) throw DataError("feature file: need id plus at least one value");
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k)
      row.push_back(parse_double(fields[k], "feature file"));
    feat_rows.emplace_back(static_cast<std::size_t>(parse_long(fields[0], "feature file")),
                           std::move(row));
  }
  const std::size_t n = feat_rows.size();
  if (n == 0) throw DataError("load_dataset: feature file is empty");
  const std::size_t dim = feat_rows.front().second.size();

  LabeledGraph data;
  data.features = NodeMatrix(n, dim);
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto& [id, row] : feat_rows) {
    if (id >= n) throw DataError("feature file: node id " + std::to_string(id) + " out of range");
    if (seen[id]) throw DataError("feature file: duplicate node id " + std::to_string(id));
    if (row.size() != dim) throw DataError("feature file: inconsistent feature width");
    seen[id] = 1;
    std::copy(row.begin(), row.end(), data.features.row(id).begin());
  }

  std::ifstream edge_in(edge_path);
  if (!edge_in) throw DataError("load_dataset: cannot open " + edge_path.string());
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (std::getline(edge_in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::stringstream ss(line);
    long u = 0, v = 0;
    if (!(ss >> u)) continue;  // blank or comment-only line
    if (!(ss >> v)) throw DataError("edge file: malformed line '" + line + "'");
    std::string extra;
    if (ss >> extra) throw DataError("edge file: trailing tokens on line '" + line + "'");
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
      throw DataError("edge file: dangling node id " + std::to_string(std::max(u, v)));
    edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
  }
  data.graph = SparseGraph::raw_from_edges(n, edges);

  std::ifstream label_in(label_path);
  if (!label_in) throw DataError("load_dataset: cannot open " + label_path.string());
  data.labels.assign(n, -1);
  while (std::getline(label_in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) throw DataError("label file: expected 'id,label'");
    const long id = parse_long(fields[0], "label file");
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      throw DataError("label file: dangling node id " + std::to_string(id));
    if (data.labels[static_cast<std::size_t>(id)] >= 0)
      throw DataError("label file: duplicate label for node " + std::to_string(id));
    data.labels[static_cast<std::size_t>(id)] =
        static_cast<int>(parse_long(fields[1], "label file"));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (data.labels[i] < 0) throw DataError("label file: node " + std::to_string(i) + " unlabeled");

  std::ifstream split_in(split_path);
  if (!split_in) throw DataError("load_dataset: cannot open " + split_path.string());
  data.train_mask.assign(n, 0);
  data.val_mask.assign(n, 0);
  data.test_mask.assign(n, 0);
  while (std::getline(split_in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) throw DataError("split file: expected 'id,split'");
    const long id = parse_long(fields[0], "split file");
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      throw DataError("split file: dangling node id " + std::to_string(id));
    const auto i = static_cast<std::size_t>(id);
    if (data.train_mask[i] || data.val_mask[i] || data.test_mask[i])
      throw DataError("split file: node " + std::to_string(id) + " appears in multiple splits");
    if (fields[1] == "train")
      data.train_mask[i] = 1;
    else if (fields[1] == "val")
      data.val_mask[i] = 1;
    else if (fields[1] == "test")
      data.test_mask[i] = 1;
    else
      throw DataError("split file: unknown split '" + fields[1] + "'");
  }

  data.validate();
  return lcc ? largest_connected_component(data) : data;
}

LabeledGraph load_dataset_dir(const std::filesystem::path& dir, bool lcc) {
  return load_dataset(dir / "edges.tsv", dir / "features.csv", dir / "labels.csv",
                      dir / "splits.csv", lcc);
}

void save_dataset(const LabeledGraph& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = data.graph.n_nodes();

  {
    std::ofstream out(dir / "edges.tsv");
    if (!out) throw DataError("save_dataset: cannot write " + (dir / "edges.tsv").string());
    std::string buf;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = data.graph.row_begin(i); k < data.graph.row_end(i); ++k) {
        const std::size_t j = data.graph.col(k);
        if (i < j) {
          buf += std::to_string(i);
          buf += '\t';
          buf += std::to_string(j);
          buf += '\n';
        }
      }
    out << buf;
  }
  {
    std::ofstream out(dir / "features.csv");
    std::string buf;
    for (std::size_t i = 0; i < n; ++i) {
      buf += std::to_string(i);
      for (double v : data.features.row(i)) {
        buf += ',';
        format_double(buf, v);
      }
      buf += '\n';
    }
    out << buf;
  }
  {
    std::ofstream out(dir / "labels.csv");
    for (std::size_t i = 0; i < n; ++i)
      out << i << ',' << data.labels[i] << '\n';
  }
  {
    std::ofstream out(dir / "splits.csv");
    for (std::size_t i = 0; i < n; ++i) {
      if (data.train_mask[i])
        out << i << ",train\n";
      else if (data.val_mask[i])
        out << i << ",val\n";
      else if (data.test_mask[i])
        out << i << ",test\n";
    }
  }
}

}  // namespace gread
