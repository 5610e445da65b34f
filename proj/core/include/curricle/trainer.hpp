#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curricle/corpus.hpp"
#include "curricle/neighbors.hpp"
#include "curricle/rng.hpp"
#include "curricle/schedules.hpp"
#include "curricle/seqmodel.hpp"

namespace curricle {

enum class ReplacementSource { None, Nnrs, Tprs };
ReplacementSource parse_replacement_source(const std::string& name);
const char* replacement_source_name(ReplacementSource source);

struct TrainConfig {
  double lr0 = 20.0;
  double lr_min = 0.0;
  int total_epochs = 40;
  int batch_size = 30;
  int bptt_len = 35;
  double clip = 0.5;
  ScheduleSpec ss;    // epsilon: feed back the model's own prediction
  ScheduleSpec nnrs;  // gamma: substitute a sampled neighbor
  ReplacementSource source = ReplacementSource::None;
  std::uint64_t seed = 0;
  int hidden = 200;
  int emb_dim = 200;
  bool tied = true;
  int min_count = 1;
  int k = 0;  // neighbor fanout; 0 selects round(log2 |V|)
};

enum class Choice { Teacher, Prediction, Neighbor, MixedPrediction, MixedNeighbor };

struct Selection {
  std::int32_t id = -1;
  Choice choice = Choice::Teacher;
  bool identity_fallback = false;
};

// Per-timestep input choice. Draws pi1 and pi2 (always, in that order); when
// both epsilon > pi1 and gamma > pi2 fire, a fair coin picks between the
// prediction and a neighbor draw. The prediction branch needs yhat_prev >= 0
// (the first step of a stripe has no prediction yet and falls through to the
// remaining branches). Neighbor draws go through `sampler`; the caller
// guarantees it is non-null whenever gamma > 0.
Selection select_input(std::int32_t y_prev, std::int32_t yhat_prev, double epsilon,
                       double gamma, const ReplacementSampler* sampler, Rng& rng);

struct ReplacementStats {
  std::uint64_t teacher = 0;
  std::uint64_t prediction = 0;
  std::uint64_t neighbor = 0;
  std::uint64_t mixed_prediction = 0;
  std::uint64_t mixed_neighbor = 0;
  std::uint64_t identity_fallbacks = 0;

  std::uint64_t total() const {
    return teacher + prediction + neighbor + mixed_prediction + mixed_neighbor;
  }
  void add(Choice c);
  double frac(std::uint64_t part) const {
    return total() == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(total());
  }
};

struct EpochReport {
  int epoch = 0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  double lr = 0.0;
  double epsilon = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  double frac_teacher = 0.0;
  double frac_pred = 0.0;
  double frac_neigh = 0.0;
  double frac_mixed = 0.0;
};

extern const char* kReportsCsvHeader;
std::string report_csv_row(const EpochReport& report);

// Single-cycle cosine annealing from lr0 down to lr_min across total epochs.
double cosine_lr(double lr0, double lr_min, int epoch, int total_epochs);

// One pass over the batch windows: select inputs, step, backprop, clip, SGD.
// Hidden state starts at zero and carries across windows; the loss always
// scores the true targets. Throws std::runtime_error with the window index
// and learning rate when the loss goes non-finite.
struct EpochOutcome {
  double train_ppl = 0.0;
  ReplacementStats stats;
};
EpochOutcome train_epoch(ModelParams& params, const BatchSet& data, double lr,
                         RatePair rates, const ReplacementSampler* sampler,
                         double clip_threshold, Rng& rng);

// Teacher-forced perplexity over the batch windows; consumes no RNG.
double evaluate(const ModelParams& params, const BatchSet& data);

struct TrainState {
  int epoch = 0;  // completed epochs
  Temperature tau{0.1};
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> valid_ppl_history;
  ReplacementStats stats;  // last completed epoch; not serialized
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainState& state);
struct Checkpoint {
  ModelParams params;
  TrainState state;
};
Checkpoint load_checkpoint(const std::string& path);

struct DataPaths {
  std::string train;
  std::string valid;
  std::string test;
  std::string embeddings;      // NNRS only; ignored when a cache is given
  std::string neighbor_cache;  // optional prebuilt table
};

struct TrainResult {
  Vocabulary vocab;
  ModelParams best_params;
  std::vector<EpochReport> reports;
  double best_valid = 0.0;
  int best_epoch = -1;
  double test_ppl = 0.0;
};

// Full run: builds vocab and batches from the corpora, sets up the
// replacement source, trains cfg.total_epochs epochs and evaluates the best
// checkpoint on the test split. Writes vocab.txt, reports.csv (appended on
// resume), last.ckpt and best.ckpt under out_dir. Per-epoch RNG streams are
// derived from the seed, so resuming from last.ckpt replays the exact run.
TrainResult run_training(const TrainConfig& cfg, const DataPaths& paths,
                         const std::string& out_dir,
                         const std::string& resume_from = "");

}  // namespace curricle
