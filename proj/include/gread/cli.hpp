#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gread/datagen.hpp"
#include "gread/model.hpp"
#include "gread/train.hpp"

namespace gread::cli {

// Flat key=value configuration with a fixed schema. Every key has a default,
// unknown keys are rejected, and the fully-resolved map can be echoed back to
// disk; re-running from the echo reproduces the run.
class RunConfig {
 public:
  // Defaults, then the optional file, then overrides ("key=value").
  static RunConfig load(const std::filesystem::path& file,
                        const std::vector<std::string>& overrides);
  static RunConfig defaults() { return load({}, {}); }

  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  void echo(const std::filesystem::path& path) const;

  ModelConfig model_config(std::size_t n_classes) const;
  TrainConfig train_config() const;
  LabeledGraph resolve_dataset() const;

 private:
  std::map<std::string, std::string> values_;
};

int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_energy(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir, std::size_t jobs = 1);
int cmd_export(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_bench(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace gread::cli
