#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "curricle/corpus.hpp"
#include "curricle/rng.hpp"

namespace curricle {

// Two-layer LSTM language model with tied input/output embeddings, all in
// double precision. Gate blocks within the 4h rows are ordered
// (input, forget, cell, output).
struct LstmLayer {
  Eigen::MatrixXd w_in;   // [4h x in]
  Eigen::MatrixXd w_rec;  // [4h x h]
  Eigen::VectorXd bias;   // [4h]
};

struct ModelParams {
  Eigen::MatrixXd embedding;  // [|V| x d]
  std::array<LstmLayer, 2> layers;
  Eigen::VectorXd out_bias;   // [|V|]
  Eigen::MatrixXd out_proj;   // [|V| x h]; unused (0 x 0) when tied
  bool tied = true;

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int emb_dim() const { return static_cast<int>(embedding.cols()); }
  int hidden() const { return static_cast<int>(layers[0].w_rec.cols()); }
  std::size_t parameter_count() const;
  const Eigen::MatrixXd& decoder() const { return tied ? embedding : out_proj; }

  // Visits tensors in declaration order: embedding, then w_in/w_rec/bias per
  // layer, out_bias, and out_proj last when untied. Serialization, clipping
  // and SGD all walk this order.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(embedding);
    for (auto& layer : layers) {
      f(layer.w_in);
      f(layer.w_rec);
      f(layer.bias);
    }
    f(out_bias);
    if (!tied) f(out_proj);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    f(embedding);
    for (const auto& layer : layers) {
      f(layer.w_in);
      f(layer.w_rec);
      f(layer.bias);
    }
    f(out_bias);
    if (!tied) f(out_proj);
  }
};

template <typename F>
void for_each_tensor_pair(ModelParams& a, const ModelParams& b, F&& f) {
  f(a.embedding, b.embedding);
  for (int l = 0; l < 2; ++l) {
    f(a.layers[l].w_in, b.layers[l].w_in);
    f(a.layers[l].w_rec, b.layers[l].w_rec);
    f(a.layers[l].bias, b.layers[l].bias);
  }
  f(a.out_bias, b.out_bias);
  if (!a.tied) f(a.out_proj, b.out_proj);
}

// Weights uniform in [-0.1, 0.1] drawn in declaration order (column-major
// within each tensor), biases zero.
ModelParams init_params(int vocab_size, int emb_dim, int hidden, Rng& rng, bool tied = true);
ModelParams zeros_like(const ModelParams& params);

struct HiddenState {
  std::array<Eigen::MatrixXd, 2> h;  // [batch x hidden]
  std::array<Eigen::MatrixXd, 2> c;
};
HiddenState zero_state(int batch, int hidden);

// Activations recorded by the forward pass for backpropagation.
struct StepTrace {
  std::vector<std::int32_t> input_ids;
  Eigen::MatrixXd x;                      // [batch x d]
  std::array<Eigen::MatrixXd, 2> gates;   // [batch x 4h], (i, f, g, o) post-activation
  std::array<Eigen::MatrixXd, 2> c;       // [batch x h]
  std::array<Eigen::MatrixXd, 2> tanh_c;  // [batch x h]
  std::array<Eigen::MatrixXd, 2> h;       // [batch x h]
};

// Reusable per-window recording; slots keep their buffers across windows.
struct WindowTrace {
  HiddenState initial;
  std::vector<StepTrace> steps;
  int used = 0;

  void reset(const HiddenState& h0) {
    initial = h0;
    used = 0;
  }
  StepTrace& next_slot() {
    if (used == static_cast<int>(steps.size())) steps.emplace_back();
    return steps[used++];
  }
};

// Advances the recurrence one step for `batch` token ids. Ids are bounds
// checked (std::out_of_range). When `trace` is given the activations needed
// by backward_window are recorded there.
void lstm_step(const ModelParams& params, const std::int32_t* ids, int batch,
               HiddenState& state, StepTrace* trace);

// h2 . E^T + b_out when tied, h2 . W_out^T + b_out otherwise.
void output_logits_into(const ModelParams& params, const Eigen::MatrixXd& h2,
                        Eigen::MatrixXd& logits);
Eigen::MatrixXd output_logits(const ModelParams& params, const Eigen::MatrixXd& h2);

// Summed negative log-likelihood of `targets` under row-wise softmax (natural
// log, max-subtracted). When `dlogits` is given it receives softmax(logits)
// minus the target one-hots, unscaled; callers apply their own loss scaling.
double softmax_nll(const Eigen::MatrixXd& logits, const std::int32_t* targets,
                   Eigen::MatrixXd* dlogits);

struct ForwardResult {
  std::vector<Eigen::MatrixXd> logits;  // per step, [batch x |V|]
  HiddenState state;
  WindowTrace trace;
};
ForwardResult forward(const ModelParams& params, const TokenMatrix& inputs,
                      const HiddenState& h0);

// BPTT over a recorded window; `dlogits[t]` must already carry the loss
// scaling. Gradients accumulate into `grads` (callers zero it first).
void backward_window(const ModelParams& params, const WindowTrace& trace,
                     const std::vector<Eigen::MatrixXd>& dlogits, ModelParams& grads);

struct LossResult {
  double mean_nll = 0.0;
  ModelParams grads;
  HiddenState state;
};

// Teacher-forced forward + backward over one window. The loss is the mean
// NLL over batch x steps; grads are d(mean_nll)/d(theta).
LossResult loss_and_grads(const ModelParams& params, const TokenMatrix& inputs,
                          const TokenMatrix& targets, const HiddenState& h0);

// Teacher-forced mean NLL without gradient bookkeeping. When `out_state` is
// given the final hidden state is written there for window carry.
double window_nll(const ModelParams& params, const TokenMatrix& inputs,
                  const TokenMatrix& targets, const HiddenState& h0,
                  HiddenState* out_state = nullptr);

// Global-norm clipping; returns the pre-clip norm.
double clip_gradients(ModelParams& grads, double threshold);

void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

inline double perplexity(double mean_nll) { return std::exp(mean_nll); }

struct GenerationConfig {
  int max_len = 100;
  double alpha = 1.0;  // length-penalty exponent on the log-prob sum
  enum class Mode { Greedy, Sample } mode = Mode::Greedy;
  std::int32_t eos_id = -1;  // negative: never stop early
};

struct Generation {
  std::vector<std::int32_t> ids;  // emitted continuation, prefix excluded
  double score = 0.0;             // |ids|^-alpha * sum of emitted log-probs
};

// Feeds `prefix` (must be non-empty) and emits until eos or max_len. Greedy
// mode takes the argmax (lowest id on ties) and leaves `rng` untouched;
// sampling mode draws from the full softmax, one uniform per emitted token.
Generation generate(const ModelParams& params, const std::vector<std::int32_t>& prefix,
                    const GenerationConfig& cfg, Rng& rng);

}  // namespace curricle
