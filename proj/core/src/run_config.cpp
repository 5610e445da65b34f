#include "curricle/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace curricle {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid integer for " + key + ": '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid seed for " + key + ": '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid number for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "invalid boolean for " + key + ": '" + value + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "train",      "valid",     "test",      "embeddings", "neighbor_cache",
      "out_dir",    "epochs",    "batch_size", "bptt",      "lr0",
      "lr_min",     "clip",      "seed",      "replacement", "k",
      "hidden",     "emb_dim",   "min_count", "tied",       "ss.kind",
      "ss.start",   "ss.end",    "nnrs.kind", "nnrs.start", "nnrs.end"};
  return keys;
}

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "train") cfg.train = value;
  else if (key == "valid") cfg.valid = value;
  else if (key == "test") cfg.test = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "neighbor_cache") cfg.neighbor_cache = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "bptt") cfg.bptt = parse_int(key, value);
  else if (key == "lr0") cfg.lr0 = parse_double(key, value);
  else if (key == "lr_min") cfg.lr_min = parse_double(key, value);
  else if (key == "clip") cfg.clip = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "replacement") cfg.replacement = value;
  else if (key == "k") cfg.k = parse_int(key, value);
  else if (key == "hidden") cfg.hidden = parse_int(key, value);
  else if (key == "emb_dim") cfg.emb_dim = parse_int(key, value);
  else if (key == "min_count") cfg.min_count = parse_int(key, value);
  else if (key == "tied") cfg.tied = parse_bool(key, value);
  else if (key == "ss.kind") cfg.ss_kind = value;
  else if (key == "ss.start") cfg.ss_start = parse_double(key, value);
  else if (key == "ss.end") cfg.ss_end = parse_double(key, value);
  else if (key == "nnrs.kind") cfg.nnrs_kind = value;
  else if (key == "nnrs.start") cfg.nnrs_start = parse_double(key, value);
  else if (key == "nnrs.end") cfg.nnrs_end = parse_double(key, value);
  else throw ConfigError(key, "unknown config key: " + key);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigError(content, "config line " + std::to_string(lineno) +
                                     ": expected 'key = value'");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty())
      throw ConfigError(key, "config line " + std::to_string(lineno) + ": empty key");
    apply_config_value(cfg, key, value);
  }
  return cfg;
}

namespace {

std::string value_of(const RunConfig& cfg, const std::string& key) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  if (key == "train") return cfg.train;
  if (key == "valid") return cfg.valid;
  if (key == "test") return cfg.test;
  if (key == "embeddings") return cfg.embeddings;
  if (key == "neighbor_cache") return cfg.neighbor_cache;
  if (key == "out_dir") return cfg.out_dir;
  if (key == "epochs") return std::to_string(cfg.epochs);
  if (key == "batch_size") return std::to_string(cfg.batch_size);
  if (key == "bptt") return std::to_string(cfg.bptt);
  if (key == "lr0") return num(cfg.lr0);
  if (key == "lr_min") return num(cfg.lr_min);
  if (key == "clip") return num(cfg.clip);
  if (key == "seed") return std::to_string(cfg.seed);
  if (key == "replacement") return cfg.replacement;
  if (key == "k") return std::to_string(cfg.k);
  if (key == "hidden") return std::to_string(cfg.hidden);
  if (key == "emb_dim") return std::to_string(cfg.emb_dim);
  if (key == "min_count") return std::to_string(cfg.min_count);
  if (key == "tied") return cfg.tied ? "true" : "false";
  if (key == "ss.kind") return cfg.ss_kind;
  if (key == "ss.start") return num(cfg.ss_start);
  if (key == "ss.end") return num(cfg.ss_end);
  if (key == "nnrs.kind") return cfg.nnrs_kind;
  if (key == "nnrs.start") return num(cfg.nnrs_start);
  if (key == "nnrs.end") return num(cfg.nnrs_end);
  throw ConfigError(key, "unknown config key: " + key);
}

}  // namespace

void write_config_file(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& key : config_keys()) out << key << " = " << value_of(cfg, key) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

void validate_config(const RunConfig& cfg, bool require_corpora) {
  auto bad = [](const std::string& key, const std::string& why) {
    throw ConfigError(key, key + " " + why);
  };
  if (cfg.epochs < 1) bad("epochs", "must be >= 1");
  if (cfg.batch_size < 1) bad("batch_size", "must be >= 1");
  if (cfg.bptt < 1) bad("bptt", "must be >= 1");
  if (!(cfg.lr0 > 0.0)) bad("lr0", "must be positive");
  if (cfg.lr_min < 0.0) bad("lr_min", "must be >= 0");
  if (cfg.lr_min > cfg.lr0) bad("lr_min", "must not exceed lr0");
  if (!(cfg.clip > 0.0)) bad("clip", "must be positive");
  if (cfg.k < 0) bad("k", "must be >= 0 (0 selects round(log2 |V|))");
  if (cfg.hidden < 1) bad("hidden", "must be >= 1");
  if (cfg.emb_dim < 0) bad("emb_dim", "must be >= 0 (0 matches hidden)");
  if (cfg.min_count < 1) bad("min_count", "must be >= 1");
  const int emb_dim = cfg.emb_dim == 0 ? cfg.hidden : cfg.emb_dim;
  if (cfg.tied && emb_dim != cfg.hidden) bad("emb_dim", "must equal hidden for tied weights");

  ReplacementSource source;
  try {
    source = parse_replacement_source(cfg.replacement);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("replacement", e.what());
  }
  try {
    parse_curve_kind(cfg.ss_kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("ss.kind", e.what());
  }
  try {
    parse_curve_kind(cfg.nnrs_kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("nnrs.kind", e.what());
  }
  if (!(cfg.ss_start >= 0.0 && cfg.ss_start <= 1.0)) bad("ss.start", "must lie in [0, 1]");
  if (!(cfg.ss_end >= 0.0 && cfg.ss_end <= 1.0)) bad("ss.end", "must lie in [0, 1]");
  if (cfg.ss_start > cfg.ss_end) bad("ss.start", "must not exceed ss.end");
  if (!(cfg.nnrs_start >= 0.0 && cfg.nnrs_start <= 1.0)) bad("nnrs.start", "must lie in [0, 1]");
  if (!(cfg.nnrs_end >= 0.0 && cfg.nnrs_end <= 1.0)) bad("nnrs.end", "must lie in [0, 1]");
  if (cfg.nnrs_start > cfg.nnrs_end) bad("nnrs.start", "must not exceed nnrs.end");

  const bool wants_neighbors = cfg.nnrs_start > 0.0 || cfg.nnrs_end > 0.0;
  if (wants_neighbors && source == ReplacementSource::None)
    bad("replacement", "must name a source (nnrs or tprs) when the nnrs schedule is positive");
  if (source == ReplacementSource::Nnrs && cfg.embeddings.empty() && cfg.neighbor_cache.empty())
    bad("embeddings", "or neighbor_cache is required for nnrs replacement");

  if (require_corpora) {
    if (cfg.train.empty()) bad("train", "is required");
    if (cfg.valid.empty()) bad("valid", "is required");
    if (cfg.test.empty()) bad("test", "is required");
  }
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.lr0 = cfg.lr0;
  tc.lr_min = cfg.lr_min;
  tc.total_epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.bptt_len = cfg.bptt;
  tc.clip = cfg.clip;
  tc.ss = {parse_curve_kind(cfg.ss_kind), cfg.ss_start, cfg.ss_end, cfg.epochs};
  tc.nnrs = {parse_curve_kind(cfg.nnrs_kind), cfg.nnrs_start, cfg.nnrs_end, cfg.epochs};
  tc.source = parse_replacement_source(cfg.replacement);
  tc.seed = cfg.seed;
  tc.hidden = cfg.hidden;
  tc.emb_dim = cfg.emb_dim == 0 ? cfg.hidden : cfg.emb_dim;
  tc.tied = cfg.tied;
  tc.min_count = cfg.min_count;
  tc.k = cfg.k;
  return tc;
}

DataPaths to_data_paths(const RunConfig& cfg) {
  return {cfg.train, cfg.valid, cfg.test, cfg.embeddings, cfg.neighbor_cache};
}

}  // namespace curricle
