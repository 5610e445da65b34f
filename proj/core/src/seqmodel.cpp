#include "curricle/seqmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace curricle {
namespace {

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -0.1, 0.1);
}

}  // namespace

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&n](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

ModelParams init_params(int vocab_size, int emb_dim, int hidden, Rng& rng, bool tied) {
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (emb_dim < 1 || hidden < 1) throw std::invalid_argument("model dims must be >= 1");
  if (tied && emb_dim != hidden)
    throw std::invalid_argument("tied weights require emb_dim == hidden");

  ModelParams p;
  p.tied = tied;
  p.embedding.resize(vocab_size, emb_dim);
  fill_uniform(p.embedding, rng);
  for (int l = 0; l < 2; ++l) {
    const int in_dim = l == 0 ? emb_dim : hidden;
    p.layers[l].w_in.resize(4 * hidden, in_dim);
    fill_uniform(p.layers[l].w_in, rng);
    p.layers[l].w_rec.resize(4 * hidden, hidden);
    fill_uniform(p.layers[l].w_rec, rng);
    p.layers[l].bias = Eigen::VectorXd::Zero(4 * hidden);
  }
  p.out_bias = Eigen::VectorXd::Zero(vocab_size);
  if (!tied) {
    p.out_proj.resize(vocab_size, hidden);
    fill_uniform(p.out_proj, rng);
  }
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z;
  z.tied = params.tied;
  z.embedding = Eigen::MatrixXd::Zero(params.embedding.rows(), params.embedding.cols());
  for (int l = 0; l < 2; ++l) {
    z.layers[l].w_in =
        Eigen::MatrixXd::Zero(params.layers[l].w_in.rows(), params.layers[l].w_in.cols());
    z.layers[l].w_rec =
        Eigen::MatrixXd::Zero(params.layers[l].w_rec.rows(), params.layers[l].w_rec.cols());
    z.layers[l].bias = Eigen::VectorXd::Zero(params.layers[l].bias.size());
  }
  z.out_bias = Eigen::VectorXd::Zero(params.out_bias.size());
  if (!params.tied)
    z.out_proj = Eigen::MatrixXd::Zero(params.out_proj.rows(), params.out_proj.cols());
  return z;
}

HiddenState zero_state(int batch, int hidden) {
  HiddenState s;
  for (int l = 0; l < 2; ++l) {
    s.h[l] = Eigen::MatrixXd::Zero(batch, hidden);
    s.c[l] = Eigen::MatrixXd::Zero(batch, hidden);
  }
  return s;
}

void lstm_step(const ModelParams& params, const std::int32_t* ids, int batch,
               HiddenState& state, StepTrace* trace) {
  const int h = params.hidden();
  const int d = params.emb_dim();
  const int V = params.vocab_size();
  if (batch < 1) throw std::invalid_argument("lstm_step needs batch >= 1");

  Eigen::MatrixXd local_x;
  Eigen::MatrixXd& x = trace ? trace->x : local_x;
  x.resize(batch, d);
  for (int b = 0; b < batch; ++b) {
    if (ids[b] < 0 || ids[b] >= V)
      throw std::out_of_range("token id outside the embedding table");
    x.row(b) = params.embedding.row(ids[b]);
  }
  if (trace) trace->input_ids.assign(ids, ids + batch);

  Eigen::MatrixXd local_a, local_c, local_tc;
  for (int l = 0; l < 2; ++l) {
    const LstmLayer& layer = params.layers[l];
    const Eigen::MatrixXd& in = l == 0 ? x : state.h[0];

    Eigen::MatrixXd& a = trace ? trace->gates[l] : local_a;
    a.resize(batch, 4 * h);
    a.noalias() = in * layer.w_in.transpose();
    a.noalias() += state.h[l] * layer.w_rec.transpose();
    a.rowwise() += layer.bias.transpose();

    a.leftCols(2 * h).array() = 1.0 / (1.0 + (-a.leftCols(2 * h).array()).exp());
    a.middleCols(2 * h, h).array() = a.middleCols(2 * h, h).array().tanh();
    a.rightCols(h).array() = 1.0 / (1.0 + (-a.rightCols(h).array()).exp());

    Eigen::MatrixXd& c = trace ? trace->c[l] : local_c;
    Eigen::MatrixXd& tc = trace ? trace->tanh_c[l] : local_tc;
    c = a.middleCols(h, h).cwiseProduct(state.c[l]) +
        a.leftCols(h).cwiseProduct(a.middleCols(2 * h, h));
    tc = c.array().tanh();
    state.c[l] = c;
    state.h[l] = a.rightCols(h).cwiseProduct(tc);
    if (trace) trace->h[l] = state.h[l];
  }
}

void output_logits_into(const ModelParams& params, const Eigen::MatrixXd& h2,
                        Eigen::MatrixXd& logits) {
  const Eigen::MatrixXd& dec = params.decoder();
  if (h2.cols() != dec.cols())
    throw std::invalid_argument("hidden width does not match the decoder");
  logits.resize(h2.rows(), dec.rows());
  logits.noalias() = h2 * dec.transpose();
  logits.rowwise() += params.out_bias.transpose();
}

Eigen::MatrixXd output_logits(const ModelParams& params, const Eigen::MatrixXd& h2) {
  Eigen::MatrixXd logits;
  output_logits_into(params, h2, logits);
  return logits;
}

double softmax_nll(const Eigen::MatrixXd& logits, const std::int32_t* targets,
                   Eigen::MatrixXd* dlogits) {
  const int B = static_cast<int>(logits.rows());
  const int V = static_cast<int>(logits.cols());
  const Eigen::VectorXd maxv = logits.rowwise().maxCoeff();
  double nll = 0.0;

  if (dlogits) {
    *dlogits = (logits.colwise() - maxv).array().exp();
    const Eigen::VectorXd sums = dlogits->rowwise().sum();
    dlogits->array().colwise() /= sums.array();
    for (int b = 0; b < B; ++b) {
      const std::int32_t t = targets[b];
      if (t < 0 || t >= V) throw std::out_of_range("target id outside the vocabulary");
      nll += maxv(b) + std::log(sums(b)) - logits(b, t);
      (*dlogits)(b, t) -= 1.0;
    }
  } else {
    const Eigen::VectorXd sums = (logits.colwise() - maxv).array().exp().rowwise().sum();
    for (int b = 0; b < B; ++b) {
      const std::int32_t t = targets[b];
      if (t < 0 || t >= V) throw std::out_of_range("target id outside the vocabulary");
      nll += maxv(b) + std::log(sums(b)) - logits(b, t);
    }
  }
  return nll;
}

ForwardResult forward(const ModelParams& params, const TokenMatrix& inputs,
                      const HiddenState& h0) {
  const int B = static_cast<int>(inputs.rows());
  const int T = static_cast<int>(inputs.cols());
  if (T == 0) throw std::invalid_argument("empty window");

  ForwardResult r;
  r.state = h0;
  r.trace.reset(h0);
  r.logits.resize(T);
  for (int t = 0; t < T; ++t) {
    lstm_step(params, &inputs(0, t), B, r.state, &r.trace.next_slot());
    output_logits_into(params, r.state.h[1], r.logits[t]);
  }
  return r;
}

void backward_window(const ModelParams& params, const WindowTrace& trace,
                     const std::vector<Eigen::MatrixXd>& dlogits, ModelParams& grads) {
  const int T = trace.used;
  if (T == 0) return;
  if (static_cast<int>(dlogits.size()) < T)
    throw std::invalid_argument("dlogits shorter than the recorded window");
  const int batch = static_cast<int>(trace.steps[0].h[0].rows());
  const int h = params.hidden();

  std::array<Eigen::MatrixXd, 2> dh{Eigen::MatrixXd::Zero(batch, h),
                                    Eigen::MatrixXd::Zero(batch, h)};
  std::array<Eigen::MatrixXd, 2> dc{Eigen::MatrixXd::Zero(batch, h),
                                    Eigen::MatrixXd::Zero(batch, h)};
  Eigen::MatrixXd& ddecoder = params.tied ? grads.embedding : grads.out_proj;
  Eigen::MatrixXd da(batch, 4 * h), dct(batch, h), dx(batch, params.emb_dim());

  for (int t = T - 1; t >= 0; --t) {
    const StepTrace& s = trace.steps[t];

    dh[1].noalias() += dlogits[t] * params.decoder();
    ddecoder.noalias() += dlogits[t].transpose() * s.h[1];
    grads.out_bias.noalias() += dlogits[t].colwise().sum().transpose();

    for (int l = 1; l >= 0; --l) {
      const auto i = s.gates[l].leftCols(h).array();
      const auto f = s.gates[l].middleCols(h, h).array();
      const auto g = s.gates[l].middleCols(2 * h, h).array();
      const auto o = s.gates[l].rightCols(h).array();
      const Eigen::MatrixXd& c_prev = t > 0 ? trace.steps[t - 1].c[l] : trace.initial.c[l];
      const Eigen::MatrixXd& h_prev = t > 0 ? trace.steps[t - 1].h[l] : trace.initial.h[l];
      const auto tc = s.tanh_c[l].array();

      dct.array() = dh[l].array() * o * (1.0 - tc.square()) + dc[l].array();
      da.leftCols(h).array() = dct.array() * g * i * (1.0 - i);
      da.middleCols(h, h).array() = dct.array() * c_prev.array() * f * (1.0 - f);
      da.middleCols(2 * h, h).array() = dct.array() * i * (1.0 - g.square());
      da.rightCols(h).array() = dh[l].array() * tc * o * (1.0 - o);

      const Eigen::MatrixXd& in = l == 0 ? s.x : s.h[0];
      grads.layers[l].w_in.noalias() += da.transpose() * in;
      grads.layers[l].w_rec.noalias() += da.transpose() * h_prev;
      grads.layers[l].bias.noalias() += da.colwise().sum().transpose();

      dc[l] = dct.cwiseProduct(f.matrix());
      if (l == 1) {
        dh[0].noalias() += da * params.layers[1].w_in;
      } else {
        dx.noalias() = da * params.layers[0].w_in;
        for (int b = 0; b < batch; ++b)
          grads.embedding.row(s.input_ids[b]) += dx.row(b);
      }
      dh[l] = da * params.layers[l].w_rec;
    }
  }
}

LossResult loss_and_grads(const ModelParams& params, const TokenMatrix& inputs,
                          const TokenMatrix& targets, const HiddenState& h0) {
  const int B = static_cast<int>(inputs.rows());
  const int T = static_cast<int>(inputs.cols());
  if (T == 0) throw std::invalid_argument("empty window");
  if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
    throw std::invalid_argument("inputs/targets shape mismatch");

  LossResult res;
  res.state = h0;
  WindowTrace trace;
  trace.reset(h0);
  std::vector<Eigen::MatrixXd> dlogits(T);
  Eigen::MatrixXd logits;
  double nll = 0.0;
  for (int t = 0; t < T; ++t) {
    lstm_step(params, &inputs(0, t), B, res.state, &trace.next_slot());
    output_logits_into(params, res.state.h[1], logits);
    nll += softmax_nll(logits, &targets(0, t), &dlogits[t]);
  }
  const double scale = 1.0 / (static_cast<double>(B) * static_cast<double>(T));
  for (int t = 0; t < T; ++t) dlogits[t] *= scale;
  res.grads = zeros_like(params);
  backward_window(params, trace, dlogits, res.grads);
  res.mean_nll = nll * scale;
  return res;
}

double window_nll(const ModelParams& params, const TokenMatrix& inputs,
                  const TokenMatrix& targets, const HiddenState& h0,
                  HiddenState* out_state) {
  const int B = static_cast<int>(inputs.rows());
  const int T = static_cast<int>(inputs.cols());
  if (T == 0) throw std::invalid_argument("empty window");
  if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
    throw std::invalid_argument("inputs/targets shape mismatch");

  HiddenState st = h0;
  Eigen::MatrixXd logits;
  double nll = 0.0;
  for (int t = 0; t < T; ++t) {
    lstm_step(params, &inputs(0, t), B, st, nullptr);
    output_logits_into(params, st.h[1], logits);
    nll += softmax_nll(logits, &targets(0, t), nullptr);
  }
  if (out_state) *out_state = std::move(st);
  return nll / (static_cast<double>(B) * static_cast<double>(T));
}

double clip_gradients(ModelParams& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
  double sq = 0.0;
  grads.for_each_tensor([&sq](const auto& t) { sq += t.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double s = threshold / norm;
    grads.for_each_tensor([s](auto& t) { t *= s; });
  }
  return norm;
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  for_each_tensor_pair(params, grads, [lr](auto& p, const auto& g) { p -= lr * g; });
}

Generation generate(const ModelParams& params, const std::vector<std::int32_t>& prefix,
                    const GenerationConfig& cfg, Rng& rng) {
  if (prefix.empty()) throw std::invalid_argument("generation needs a non-empty prefix");
  if (cfg.max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");

  const int V = params.vocab_size();
  HiddenState st = zero_state(1, params.hidden());
  for (std::int32_t id : prefix) lstm_step(params, &id, 1, st, nullptr);

  Generation gen;
  Eigen::MatrixXd logits;
  double logprob_sum = 0.0;
  for (int n = 0; n < cfg.max_len; ++n) {
    output_logits_into(params, st.h[1], logits);
    const double m = logits.row(0).maxCoeff();
    const Eigen::RowVectorXd ex = (logits.row(0).array() - m).exp();
    const double z = ex.sum();

    std::int32_t pick;
    if (cfg.mode == GenerationConfig::Mode::Greedy) {
      Eigen::Index idx;
      logits.row(0).maxCoeff(&idx);
      pick = static_cast<std::int32_t>(idx);
    } else {
      const double u = uniform01(rng) * z;
      double acc = 0.0;
      pick = static_cast<std::int32_t>(V - 1);
      for (int v = 0; v < V; ++v) {
        acc += ex(v);
        if (u < acc) {
          pick = static_cast<std::int32_t>(v);
          break;
        }
      }
    }
    logprob_sum += logits(0, pick) - m - std::log(z);
    gen.ids.push_back(pick);
    if (pick == cfg.eos_id) break;
    lstm_step(params, &pick, 1, st, nullptr);
  }
  gen.score = std::pow(static_cast<double>(gen.ids.size()), -cfg.alpha) * logprob_sum;
  return gen;
}

}  // namespace curricle
