#include "curricle/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>

namespace curricle {
namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;       // weight init
constexpr std::uint64_t kEpochStreamBase = 0x65706f63;  // + epoch index

constexpr char kCheckpointMagic[5] = {'C', 'U', 'R', 'L', '1'};

template <typename T>
void put_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return v;
}

}  // namespace

ReplacementSource parse_replacement_source(const std::string& name) {
  if (name == "none") return ReplacementSource::None;
  if (name == "nnrs") return ReplacementSource::Nnrs;
  if (name == "tprs") return ReplacementSource::Tprs;
  throw std::invalid_argument("unknown replacement source: " + name);
}

const char* replacement_source_name(ReplacementSource source) {
  switch (source) {
    case ReplacementSource::None: return "none";
    case ReplacementSource::Nnrs: return "nnrs";
    case ReplacementSource::Tprs: return "tprs";
  }
  return "?";
}

void ReplacementStats::add(Choice c) {
  switch (c) {
    case Choice::Teacher: ++teacher; break;
    case Choice::Prediction: ++prediction; break;
    case Choice::Neighbor: ++neighbor; break;
    case Choice::MixedPrediction: ++mixed_prediction; break;
    case Choice::MixedNeighbor: ++mixed_neighbor; break;
  }
}

Selection select_input(std::int32_t y_prev, std::int32_t yhat_prev, double epsilon,
                       double gamma, const ReplacementSampler* sampler, Rng& rng) {
  const double pi1 = uniform01(rng);
  const double pi2 = uniform01(rng);
  const bool eps_hit = epsilon > pi1 && yhat_prev >= 0;
  const bool gam_hit = gamma > pi2;
  if (gam_hit && sampler == nullptr)
    throw std::invalid_argument("gamma > 0 needs a replacement sampler");

  if (eps_hit && gam_hit) {
    if (uniform01(rng) < 0.5) return {yhat_prev, Choice::MixedPrediction, false};
    const auto d = sampler->draw(y_prev, rng);
    return {d.id, Choice::MixedNeighbor, d.identity_fallback};
  }
  if (eps_hit) return {yhat_prev, Choice::Prediction, false};
  if (gam_hit) {
    const auto d = sampler->draw(y_prev, rng);
    return {d.id, Choice::Neighbor, d.identity_fallback};
  }
  return {y_prev, Choice::Teacher, false};
}

const char* kReportsCsvHeader =
    "epoch,train_ppl,valid_ppl,lr,epsilon,gamma,tau,frac_teacher,frac_pred,frac_neigh,frac_mixed";

std::string report_csv_row(const EpochReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                r.epoch, r.train_ppl, r.valid_ppl, r.lr, r.epsilon, r.gamma, r.tau,
                r.frac_teacher, r.frac_pred, r.frac_neigh, r.frac_mixed);
  return buf;
}

double cosine_lr(double lr0, double lr_min, int epoch, int total_epochs) {
  if (!(lr0 >= lr_min)) throw std::invalid_argument("lr0 must be >= lr_min");
  const double x = normalized_progress(epoch, total_epochs);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(M_PI * x));
}

EpochOutcome train_epoch(ModelParams& params, const BatchSet& data, double lr,
                         RatePair rates, const ReplacementSampler* sampler,
                         double clip_threshold, Rng& rng) {
  if (!(rates.epsilon >= 0.0 && rates.epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(rates.gamma >= 0.0 && rates.gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1]");
  if (rates.gamma > 0.0 && sampler == nullptr)
    throw std::invalid_argument("gamma > 0 needs a replacement sampler");

  const int B = data.batch_size();
  HiddenState state = zero_state(B, params.hidden());
  std::vector<std::int32_t> last_pred(B, -1);
  std::vector<std::int32_t> chosen(B);
  WindowTrace trace;
  std::vector<Eigen::MatrixXd> dlogits;
  Eigen::MatrixXd logits;
  ModelParams grads = zeros_like(params);
  ReplacementStats stats;
  double total_nll = 0.0;
  double total_tokens = 0.0;

  for (int w = 0; w < data.window_count(); ++w) {
    const auto [t0, len] = data.window(w);
    trace.reset(state);
    if (static_cast<int>(dlogits.size()) < len) dlogits.resize(len);
    double window_nll_sum = 0.0;

    for (int t = 0; t < len; ++t) {
      const int col = t0 + t;
      for (int b = 0; b < B; ++b) {
        const Selection sel = select_input(data.inputs(b, col), last_pred[b],
                                           rates.epsilon, rates.gamma, sampler, rng);
        chosen[b] = sel.id;
        stats.add(sel.choice);
        if (sel.identity_fallback) ++stats.identity_fallbacks;
      }
      lstm_step(params, chosen.data(), B, state, &trace.next_slot());
      output_logits_into(params, state.h[1], logits);
      window_nll_sum += softmax_nll(logits, &data.targets(0, col), &dlogits[t]);
      for (int b = 0; b < B; ++b) {
        Eigen::Index idx;
        logits.row(b).maxCoeff(&idx);
        last_pred[b] = static_cast<std::int32_t>(idx);
      }
    }
    if (!std::isfinite(window_nll_sum))
      throw std::runtime_error("training loss became non-finite at window " +
                               std::to_string(w) + " (lr=" + std::to_string(lr) + ")");

    const double scale = 1.0 / (static_cast<double>(B) * static_cast<double>(len));
    for (int t = 0; t < len; ++t) dlogits[t] *= scale;
    grads.for_each_tensor([](auto& g) { g.setZero(); });
    backward_window(params, trace, dlogits, grads);
    clip_gradients(grads, clip_threshold);
    sgd_step(params, grads, lr);
    total_nll += window_nll_sum;
    total_tokens += static_cast<double>(B) * static_cast<double>(len);
  }

  EpochOutcome out;
  out.train_ppl = perplexity(total_nll / total_tokens);
  out.stats = stats;
  return out;
}

double evaluate(const ModelParams& params, const BatchSet& data) {
  const int B = data.batch_size();
  HiddenState st = zero_state(B, params.hidden());
  Eigen::MatrixXd logits;
  double nll = 0.0;
  for (int col = 0; col < data.steps(); ++col) {
    lstm_step(params, &data.inputs(0, col), B, st, nullptr);
    output_logits_into(params, st.h[1], logits);
    nll += softmax_nll(logits, &data.targets(0, col), nullptr);
  }
  return perplexity(nll / (static_cast<double>(B) * static_cast<double>(data.steps())));
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_raw<std::uint64_t>(out, params.vocab_size());
  put_raw<std::uint64_t>(out, params.emb_dim());
  put_raw<std::uint64_t>(out, params.hidden());
  put_raw<std::uint8_t>(out, params.tied ? 1 : 0);
  params.for_each_tensor([&out](const auto& t) {
    put_raw<std::uint64_t>(out, t.rows());
    put_raw<std::uint64_t>(out, t.cols());
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  put_raw<std::int64_t>(out, state.epoch);
  put_raw<double>(out, state.tau.value);
  put_raw<double>(out, state.lr);
  put_raw<std::uint64_t>(out, state.seed);
  put_raw<std::uint64_t>(out, state.valid_ppl_history.size());
  for (double p : state.valid_ppl_history) put_raw<double>(out, p);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw std::runtime_error("not a checkpoint (bad magic): " + path);

  const auto V = static_cast<int>(get_raw<std::uint64_t>(in, path));
  const auto d = static_cast<int>(get_raw<std::uint64_t>(in, path));
  const auto h = static_cast<int>(get_raw<std::uint64_t>(in, path));
  const auto tied = get_raw<std::uint8_t>(in, path);
  if (V < 2 || d < 1 || h < 1 || tied > 1)
    throw std::runtime_error("checkpoint header is implausible: " + path);

  Checkpoint ck;
  ck.params.tied = tied == 1;
  ck.params.embedding.resize(V, d);
  for (int l = 0; l < 2; ++l) {
    ck.params.layers[l].w_in.resize(4 * h, l == 0 ? d : h);
    ck.params.layers[l].w_rec.resize(4 * h, h);
    ck.params.layers[l].bias.resize(4 * h);
  }
  ck.params.out_bias.resize(V);
  if (!ck.params.tied) ck.params.out_proj.resize(V, h);

  ck.params.for_each_tensor([&in, &path](auto& t) {
    const auto rows = get_raw<std::uint64_t>(in, path);
    const auto cols = get_raw<std::uint64_t>(in, path);
    if (rows != static_cast<std::uint64_t>(t.rows()) ||
        cols != static_cast<std::uint64_t>(t.cols()))
      throw std::runtime_error("checkpoint tensor shape mismatch: " + path);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  });

  ck.state.epoch = static_cast<int>(get_raw<std::int64_t>(in, path));
  ck.state.tau.value = get_raw<double>(in, path);
  ck.state.lr = get_raw<double>(in, path);
  ck.state.seed = get_raw<std::uint64_t>(in, path);
  const auto n = get_raw<std::uint64_t>(in, path);
  ck.state.valid_ppl_history.resize(n);
  for (auto& p : ck.state.valid_ppl_history) p = get_raw<double>(in, path);
  if (in.peek() != EOF) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return ck;
}

TrainResult run_training(const TrainConfig& cfg, const DataPaths& paths,
                         const std::string& out_dir, const std::string& resume_from) {
  namespace fs = std::filesystem;
  if (cfg.total_epochs < 1) throw std::invalid_argument("total_epochs must be >= 1");
  if (cfg.ss.total_epochs != cfg.total_epochs || cfg.nnrs.total_epochs != cfg.total_epochs)
    throw std::invalid_argument("schedule horizon must match total_epochs");
  validate_schedule(cfg.ss, "ss");
  validate_schedule(cfg.nnrs, "nnrs");
  if (!(cfg.lr0 > 0.0) || cfg.lr_min < 0.0 || cfg.lr_min > cfg.lr0)
    throw std::invalid_argument("need lr0 > 0 and 0 <= lr_min <= lr0");

  const auto raw = load_raw_tokens(paths.train);
  const Vocabulary vocab = build_vocab(raw, cfg.min_count);
  TokenStream train;
  train.ids.reserve(raw.size());
  for (const auto& tok : raw) train.ids.push_back(vocab.id_or_unk(tok));
  const TokenStream valid = load_corpus(paths.valid, vocab);
  const TokenStream test = load_corpus(paths.test, vocab);
  const BatchSet train_b = batchify(train, cfg.batch_size, cfg.bptt_len);
  const BatchSet valid_b = batchify(valid, cfg.batch_size, cfg.bptt_len);
  const BatchSet test_b = batchify(test, cfg.batch_size, cfg.bptt_len);

  std::optional<NeighborTable> ntable;
  std::optional<TransitionTable> ttable;
  std::optional<ReplacementSampler> sampler;
  if (cfg.source == ReplacementSource::Nnrs) {
    if (!paths.neighbor_cache.empty()) {
      ntable = load_neighbor_table(paths.neighbor_cache);
      if (ntable->vocab_size() != vocab.size())
        throw std::runtime_error("neighbor cache was built for a different vocabulary");
    } else {
      if (paths.embeddings.empty())
        throw std::invalid_argument("nnrs replacement needs embeddings or a neighbor cache");
      const EmbeddingMatrix emb = load_embeddings(paths.embeddings, vocab);
      const int k = cfg.k > 0 ? cfg.k : default_neighbor_k(vocab.size());
      ntable = build_neighbor_table(emb, k);
    }
    sampler.emplace(*ntable);
  } else if (cfg.source == ReplacementSource::Tprs) {
    const int k = cfg.k > 0 ? cfg.k : default_neighbor_k(vocab.size());
    ttable = build_transition_table(train, vocab.size(), k);
    sampler.emplace(*ttable);
  }

  ModelParams params;
  TrainState state;
  if (!resume_from.empty()) {
    Checkpoint ck = load_checkpoint(resume_from);
    if (ck.params.vocab_size() != vocab.size())
      throw std::runtime_error("checkpoint was trained on a different vocabulary");
    params = std::move(ck.params);
    state = std::move(ck.state);
  } else {
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    params = init_params(vocab.size(), cfg.emb_dim, cfg.hidden, init_rng, cfg.tied);
    state.seed = cfg.seed;
  }

  fs::create_directories(out_dir);
  const auto artifact = [&out_dir](const char* name) {
    return (fs::path(out_dir) / name).string();
  };
  save_vocab(artifact("vocab.txt"), vocab);
  const bool fresh = resume_from.empty();
  std::ofstream csv(artifact("reports.csv"), fresh ? std::ios::trunc : std::ios::app);
  if (!csv) throw std::runtime_error("cannot write reports.csv under " + out_dir);
  if (fresh) csv << kReportsCsvHeader << '\n' << std::flush;

  TrainResult result;
  result.vocab = vocab;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  for (std::size_t i = 0; i < state.valid_ppl_history.size(); ++i) {
    if (state.valid_ppl_history[i] < best_valid) {
      best_valid = state.valid_ppl_history[i];
      best_epoch = static_cast<int>(i);
    }
  }

  for (int e = state.epoch; e < cfg.total_epochs; ++e) {
    const RatePair rates{rate(cfg.ss, e), rate(cfg.nnrs, e)};
    const double lr = cosine_lr(cfg.lr0, cfg.lr_min, e, cfg.total_epochs);
    if (sampler) sampler->set_temperature(state.tau);
    Rng epoch_rng(derive_seed(state.seed, kEpochStreamBase + static_cast<std::uint64_t>(e)));

    EpochOutcome outcome;
    try {
      outcome = train_epoch(params, train_b, lr, rates, sampler ? &*sampler : nullptr,
                            cfg.clip, epoch_rng);
    } catch (const std::runtime_error& err) {
      throw std::runtime_error("epoch " + std::to_string(e) + ": " + err.what());
    }
    const double valid_ppl = evaluate(params, valid_b);

    EpochReport rep;
    rep.epoch = e;
    rep.train_ppl = outcome.train_ppl;
    rep.valid_ppl = valid_ppl;
    rep.lr = lr;
    rep.epsilon = rates.epsilon;
    rep.gamma = rates.gamma;
    rep.tau = state.tau.value;
    rep.frac_teacher = outcome.stats.frac(outcome.stats.teacher);
    rep.frac_pred = outcome.stats.frac(outcome.stats.prediction);
    rep.frac_neigh = outcome.stats.frac(outcome.stats.neighbor);
    rep.frac_mixed =
        outcome.stats.frac(outcome.stats.mixed_prediction + outcome.stats.mixed_neighbor);
    result.reports.push_back(rep);
    csv << report_csv_row(rep) << '\n' << std::flush;

    if (!state.valid_ppl_history.empty())
      state.tau = update_temperature(state.tau, valid_ppl, state.valid_ppl_history.back());
    state.valid_ppl_history.push_back(valid_ppl);
    state.epoch = e + 1;
    state.lr = lr;
    state.stats = outcome.stats;

    save_checkpoint(artifact("last.ckpt"), params, state);
    if (valid_ppl < best_valid) {
      best_valid = valid_ppl;
      best_epoch = e;
      save_checkpoint(artifact("best.ckpt"), params, state);
    }
  }

  Checkpoint best = load_checkpoint(artifact("best.ckpt"));
  result.best_params = std::move(best.params);
  result.best_valid = best_valid;
  result.best_epoch = best_epoch;
  result.test_ppl = evaluate(result.best_params, test_b);
  return result;
}

}  // namespace curricle
