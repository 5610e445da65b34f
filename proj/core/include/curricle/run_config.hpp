#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "curricle/trainer.hpp"

namespace curricle {

// Configuration problem tied to a specific key, for exit-code-2 reporting.
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_, const std::string& message)
      : std::runtime_error(message), key(std::move(key_)) {}
};

// Flat "key = value" run description. Every key doubles as a --key flag on
// the command line; flags override file values, CURRICLE_SEED overrides the
// seed from either.
struct RunConfig {
  std::string train;
  std::string valid;
  std::string test;
  std::string embeddings;
  std::string neighbor_cache;
  std::string out_dir = "run";

  int epochs = 40;
  int batch_size = 30;
  int bptt = 35;
  double lr0 = 20.0;
  double lr_min = 0.0;
  double clip = 0.5;
  std::uint64_t seed = 0;
  std::string replacement = "none";
  int k = 0;
  int hidden = 200;
  int emb_dim = 0;  // 0: same as hidden
  int min_count = 1;
  bool tied = true;

  std::string ss_kind = "linear";
  double ss_start = 0.0;
  double ss_end = 0.0;
  std::string nnrs_kind = "linear";
  double nnrs_start = 0.0;
  double nnrs_end = 0.0;
};

// All recognized keys, in canonical emission order.
const std::vector<std::string>& config_keys();

// Assigns one key; throws ConfigError for unknown keys or unparsable values.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Lines of "key = value" with '#' comments and blank lines allowed. Throws
// ConfigError (malformed line, unknown key, bad value) or std::runtime_error
// (unreadable file).
RunConfig parse_config_file(const std::string& path);

void write_config_file(const std::string& path, const RunConfig& cfg);

// Cross-field validation; `require_corpora` demands train/valid/test paths
// (training) as opposed to schedule-only use. Throws ConfigError naming the
// offending key.
void validate_config(const RunConfig& cfg, bool require_corpora);

TrainConfig to_train_config(const RunConfig& cfg);
DataPaths to_data_paths(const RunConfig& cfg);

}  // namespace curricle
