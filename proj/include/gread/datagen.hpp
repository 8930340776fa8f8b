#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gread/graph.hpp"

namespace gread {

// Contextual stochastic block model: balanced classes, per-pair Bernoulli
// edges, Gaussian features around a per-class mean.
struct CsbmConfig {
  std::size_t n_nodes = 100;
  std::size_t n_classes = 2;
  std::size_t feat_dim = 2;
  std::vector<double> class_means{-0.5, 0.5};  // one scalar mean per class
  double sigma = 2.0;
  double p_intra = 0.9;
  double p_inter = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

LabeledGraph generate_csbm(const CsbmConfig& cfg);

// Homophily-controlled sequential attachment: each arriving node draws a
// target class per edge (its own class with probability target_h, otherwise
// uniform over the others) and attaches degree-proportionally inside it.
struct HomophilyConfig {
  std::size_t n_nodes = 1480;
  std::size_t n_classes = 5;
  double target_h = 0.5;
  double avg_degree = 3.98;
  std::size_t feat_dim = 16;
  double feature_sigma = 1.0;
  const LabeledGraph* feature_reference = nullptr;  // per-class sampling source; Gaussian otherwise
  std::uint64_t seed = 0;

  void validate() const;
};

LabeledGraph generate_homophily_graph(const HomophilyConfig& cfg);

// 60/20/20 split stratified by class, installed into the graph's masks.
void stratified_split(LabeledGraph& data, double train_frac, double val_frac, std::uint64_t seed);

// Text formats: edge list "src<TAB>dst" with '#' comments; features
// "id,v0,v1,..."; labels "id,label"; splits "id,split".
LabeledGraph load_dataset(const std::filesystem::path& edge_path,
                          const std::filesystem::path& feature_path,
                          const std::filesystem::path& label_path,
                          const std::filesystem::path& split_path, bool lcc);

// Convention-over-configuration variant: edges.tsv, features.csv, labels.csv,
// splits.csv inside one directory.
LabeledGraph load_dataset_dir(const std::filesystem::path& dir, bool lcc);

void save_dataset(const LabeledGraph& data, const std::filesystem::path& dir);

}  // namespace gread
