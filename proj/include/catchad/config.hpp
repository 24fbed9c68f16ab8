#pragma once

#include "catchad/model.hpp"
#include "catchad/scoring.hpp"
#include "catchad/trainer.hpp"

#include <filesystem>
#include <set>
#include <string>

namespace catchad {

/// Everything a run needs, addressable as flat `key=value` lines.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ScoreConfig score;
  Eigen::Index train_stride = 1;  // stride of training windows
  std::set<std::string> explicit_keys;  // keys present in the parsed text

  bool has(const std::string& key) const { return explicit_keys.count(key) > 0; }
  void validate() const;
};

/// `#` starts a comment; blank lines are ignored. Unknown keys and malformed
/// values throw with the line number. `tau` sets both the mask temperature
/// and the clustering temperature; `loss_tau` overrides the latter alone.
RunConfig parse_config(const std::string& text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config: every key, in a fixed order.
std::string to_config_text(const RunConfig& config);

const std::vector<std::string>& config_keys();

}  // namespace catchad
