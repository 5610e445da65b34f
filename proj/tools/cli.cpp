#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "curricle/corpus.hpp"
#include "curricle/neighbors.hpp"
#include "curricle/run_config.hpp"
#include "curricle/schedules.hpp"
#include "curricle/seqmodel.hpp"
#include "curricle/trainer.hpp"

namespace curricle {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kGenerateStream = 0x67656e;

std::string flag_name(const std::string& key) {
  std::string name = "--" + key;
  for (char& c : name)
    if (c == '.') c = '-';
  return name;
}

struct TrainArgs {
  std::string config_path;
  std::string resume;
  std::vector<std::pair<std::string, std::string>> overrides;
};

RunConfig resolve_run_config(const TrainArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config_file(args.config_path);
  bool seed_from_flag = false;
  for (const auto& [key, value] : args.overrides) {
    apply_config_value(cfg, key, value);
    if (key == "seed") seed_from_flag = true;
  }
  if (const char* env = std::getenv("CURRICLE_SEED"); env && !seed_from_flag)
    apply_config_value(cfg, "seed", env);
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = resolve_run_config(args);
  validate_config(cfg, true);
  const TrainResult res = run_training(to_train_config(cfg), to_data_paths(cfg),
                                       cfg.out_dir, args.resume);
  std::printf("vocab_size=%d\n", res.vocab.size());
  std::printf("best_epoch=%d\n", res.best_epoch);
  std::printf("best_valid=%.10g test=%.10g\n", res.best_valid, res.test_ppl);
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string vocab;
  int batch_size = 30;
  int bptt = 35;
};

int cmd_eval(const EvalArgs& args) {
  const Vocabulary vocab = load_vocab(args.vocab);
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  if (ck.params.vocab_size() != vocab.size())
    throw std::runtime_error("checkpoint and vocab file disagree on |V|");
  const TokenStream stream = load_corpus(args.corpus, vocab);
  const BatchSet batches = batchify(stream, args.batch_size, args.bptt);
  std::printf("perplexity=%.10g\n", evaluate(ck.params, batches));
  return 0;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string prefix;
  int max_len = 100;
  double alpha = 1.0;
  std::string mode = "greedy";
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& args) {
  const Vocabulary vocab = load_vocab(args.vocab);
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  if (ck.params.vocab_size() != vocab.size())
    throw std::runtime_error("checkpoint and vocab file disagree on |V|");

  std::vector<std::int32_t> prefix_ids;
  std::istringstream ps(args.prefix);
  std::string tok;
  while (ps >> tok) prefix_ids.push_back(vocab.id_or_unk(tok));
  if (prefix_ids.empty()) throw std::invalid_argument("prefix must contain a token");

  GenerationConfig gc;
  gc.max_len = args.max_len;
  gc.alpha = args.alpha;
  gc.eos_id = vocab.eos_id;
  if (args.mode == "greedy") gc.mode = GenerationConfig::Mode::Greedy;
  else if (args.mode == "sample") gc.mode = GenerationConfig::Mode::Sample;
  else throw std::invalid_argument("unknown generation mode: " + args.mode);

  Rng rng(derive_seed(args.seed, kGenerateStream));
  const Generation gen = generate(ck.params, prefix_ids, gc, rng);

  std::string text;
  for (std::int32_t id : gen.ids) {
    if (!text.empty()) text += ' ';
    text += vocab.token(id);
  }
  std::printf("%s\n", text.c_str());
  std::printf("score=%.10g\n", gen.score);
  return 0;
}

struct BuildNeighborsArgs {
  std::string embeddings;
  std::string vocab;
  std::string out;
  int k = 0;
};

int cmd_build_neighbors(const BuildNeighborsArgs& args) {
  const Vocabulary vocab = load_vocab(args.vocab);
  const EmbeddingMatrix emb = load_embeddings(args.embeddings, vocab);
  std::printf("coverage: %d/%d (%.1f%%)\n", emb.covered, emb.vocab_size(),
              100.0 * emb.coverage());
  const int k = args.k > 0 ? args.k : default_neighbor_k(vocab.size());
  std::printf("k=%d\n", k);
  const NeighborTable table = build_neighbor_table(emb, k);
  save_neighbor_table(args.out, table);
  std::printf("wrote neighbor table for %d words to %s\n", table.vocab_size(),
              args.out.c_str());
  return 0;
}

struct InspectScheduleArgs {
  std::string kind;
  double start = 0.0;
  double end = 0.0;
  int epochs = 0;
};

int cmd_inspect_schedule(const InspectScheduleArgs& args) {
  const ScheduleSpec spec{parse_curve_kind(args.kind), args.start, args.end, args.epochs};
  validate_schedule(spec, "schedule");
  std::printf("epoch,rate\n");
  for (int e = 0; e <= args.epochs; ++e) std::printf("%d,%.10g\n", e, rate(spec, e));
  return 0;
}

struct GridArgs {
  std::string config_path;
  std::string out;
};

struct GridRow {
  const char* name;
  const char* source;
  double ss_start, ss_end, nnrs_start, nnrs_end;
};

int cmd_grid(const GridArgs& args) {
  const RunConfig base = parse_config_file(args.config_path);

  static const GridRow rows[] = {
      {"tprs-1", "tprs", 0.0, 0.0, 0.0, 0.2},    {"tprs-2", "tprs", 0.0, 0.0, 0.0, 0.3},
      {"tprs-3", "tprs", 0.0, 0.0, 0.0, 0.5},    {"nnrs-1", "nnrs", 0.0, 0.0, 0.0, 0.2},
      {"nnrs-2", "nnrs", 0.0, 0.0, 0.0, 0.3},    {"nnrs-3", "nnrs", 0.0, 0.0, 0.0, 0.5},
      {"ss-1", "none", 0.0, 0.2, 0.0, 0.0},      {"ss-2", "none", 0.0, 0.3, 0.0, 0.0},
      {"ss-3", "none", 0.0, 0.5, 0.0, 0.0},      {"ss-4", "none", 0.0, 0.8, 0.0, 0.0},
      {"ss-nnrs-1", "nnrs", 0.0, 0.2, 0.0, 0.2}, {"ss-nnrs-2", "nnrs", 0.0, 0.3, 0.0, 0.3},
      {"ss-nnrs-3", "nnrs", 0.0, 0.5, 0.0, 0.2}, {"ss-nnrs-4", "nnrs", 0.2, 0.5, 0.2, 0.5},
      {"ss-nnrs-5", "nnrs", 0.0, 0.5, 0.0, 0.5}, {"ss-nnrs-6", "nnrs", 0.0, 0.8, 0.0, 0.2},
      {"ss-nnrs-7", "nnrs", 0.2, 0.8, 0.2, 0.5},
  };
  static const CurveKind kinds[] = {CurveKind::Linear, CurveKind::SCurve,
                                    CurveKind::ExpIncrease, CurveKind::Static};

  std::vector<std::pair<std::string, RunConfig>> variants;

  RunConfig baseline = base;
  baseline.replacement = "none";
  baseline.ss_kind = baseline.nnrs_kind = "linear";
  baseline.ss_start = baseline.ss_end = baseline.nnrs_start = baseline.nnrs_end = 0.0;
  baseline.out_dir = (fs::path(base.out_dir) / "baseline").string();
  variants.emplace_back("baseline", baseline);

  for (const GridRow& row : rows) {
    for (CurveKind kind : kinds) {
      RunConfig cfg = base;
      cfg.replacement = row.source;
      cfg.ss_kind = cfg.nnrs_kind = curve_kind_name(kind);
      cfg.ss_start = row.ss_start;
      cfg.ss_end = row.ss_end;
      cfg.nnrs_start = row.nnrs_start;
      cfg.nnrs_end = row.nnrs_end;
      const std::string run_name = std::string(row.name) + "_" + curve_kind_name(kind);
      cfg.out_dir = (fs::path(base.out_dir) / run_name).string();
      variants.emplace_back(run_name, cfg);
    }
  }

  // Validate every variant before writing anything: a bad base config must
  // not leave a half-written grid behind. Corpus paths are checked at train
  // time instead so a grid can be generated ahead of the data.
  for (const auto& [run_name, cfg] : variants) validate_config(cfg, false);

  fs::create_directories(args.out);
  for (const auto& [run_name, cfg] : variants)
    write_config_file((fs::path(args.out) / (run_name + ".cfg")).string(), cfg);
  std::printf("wrote %d configs to %s\n", static_cast<int>(variants.size()), args.out.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"curricle: curriculum replacement sampling for LSTM language models"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model and write run artifacts");
  train->add_option("--config", train_args.config_path, "Flat 'key = value' run description");
  train->add_option("--resume", train_args.resume, "Checkpoint to continue from");
  for (const auto& key : config_keys()) {
    train->add_option_function<std::string>(
        flag_name(key),
        [&train_args, key](const std::string& value) {
          train_args.overrides.emplace_back(key, value);
        },
        "Override config key " + key);
  }

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Perplexity of a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--corpus", eval_args.corpus)->required();
  eval_cmd->add_option("--vocab", eval_args.vocab)->required();
  eval_cmd->add_option("--batch_size", eval_args.batch_size);
  eval_cmd->add_option("--bptt", eval_args.bptt);

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Continue a prefix with a trained model");
  gen_cmd->add_option("--checkpoint", gen_args.checkpoint)->required();
  gen_cmd->add_option("--vocab", gen_args.vocab)->required();
  gen_cmd->add_option("--prefix", gen_args.prefix, "Space-separated prompt tokens")->required();
  gen_cmd->add_option("--max-len", gen_args.max_len);
  gen_cmd->add_option("--alpha", gen_args.alpha, "Length-penalty exponent");
  gen_cmd->add_option("--mode", gen_args.mode, "greedy or sample");
  gen_cmd->add_option("--seed", gen_args.seed);

  BuildNeighborsArgs bn_args;
  auto* bn_cmd = app.add_subcommand("build-neighbors", "Precompute the neighbor table");
  bn_cmd->add_option("--embeddings", bn_args.embeddings)->required();
  bn_cmd->add_option("--vocab", bn_args.vocab)->required();
  bn_cmd->add_option("--out", bn_args.out)->required();
  bn_cmd->add_option("--k", bn_args.k, "Neighbors per word; 0 selects round(log2 |V|)");

  InspectScheduleArgs is_args;
  auto* is_cmd = app.add_subcommand("inspect-schedule", "Print per-epoch schedule rates");
  is_cmd->add_option("--kind", is_args.kind)->required();
  is_cmd->add_option("--start", is_args.start)->required();
  is_cmd->add_option("--end", is_args.end)->required();
  is_cmd->add_option("--epochs", is_args.epochs)->required();

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("grid", "Emit the experiment grid as config files");
  grid_cmd->add_option("--config", grid_args.config_path, "Base run config")->required();
  grid_cmd->add_option("--out", grid_args.out, "Directory for the emitted configs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(train_args);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_args);
    if (app.got_subcommand(gen_cmd)) return cmd_generate(gen_args);
    if (app.got_subcommand(bn_cmd)) return cmd_build_neighbors(bn_args);
    if (app.got_subcommand(is_cmd)) return cmd_inspect_schedule(is_args);
    if (app.got_subcommand(grid_cmd)) return cmd_grid(grid_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace curricle
