#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curricle::test {

NeighborTable brute_force_neighbors(const EmbeddingMatrix& embeddings, int k) {
  const int V = embeddings.vocab_size();
  if (k < 1 || k >= V) throw std::invalid_argument("bad k for brute force");

  NeighborTable table;
  table.k = k;
  table.ids.resize(V, k);
  table.similarities.resize(V, k);

  struct Cand {
    std::int32_t id;
    double sim;
  };
  std::vector<Cand> cands;
  for (int v = 0; v < V; ++v) {
    cands.clear();
    for (int u = 0; u < V; ++u) {
      if (u == v) continue;
      cands.push_back({static_cast<std::int32_t>(u),
                       cosine_similarity(embeddings.vectors.row(u).transpose(),
                                         embeddings.vectors.row(v).transpose())});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return a.id < b.id;
    });
    for (int j = 0; j < k; ++j) {
      table.ids(v, j) = cands[j].id;
      table.similarities(v, j) = cands[j].sim;
    }
  }
  return table;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Span {
  double* data;
  Eigen::Index size;
};

std::vector<Span> flat_view(ModelParams& params) {
  std::vector<Span> spans;
  params.for_each_tensor([&spans](auto& t) { spans.push_back({t.data(), t.size()}); });
  return spans;
}

}  // namespace

ScalarState scalar_zero_state(int hidden) {
  ScalarState s;
  for (int l = 0; l < 2; ++l) {
    s.h[l].assign(hidden, 0.0);
    s.c[l].assign(hidden, 0.0);
  }
  return s;
}

std::vector<double> scalar_step_logits(const ModelParams& params, ScalarState& state,
                                       int input_id) {
  const int h = params.hidden();
  const int V = params.vocab_size();

  std::vector<double> x(params.emb_dim());
  for (int j = 0; j < params.emb_dim(); ++j) x[j] = params.embedding(input_id, j);

  for (int l = 0; l < 2; ++l) {
    const LstmLayer& layer = params.layers[l];
    const std::vector<double>& in = l == 0 ? x : state.h[0];

    std::vector<double> a(4 * h);
    for (int r = 0; r < 4 * h; ++r) {
      double s = layer.bias(r);
      for (std::size_t j = 0; j < in.size(); ++j) s += layer.w_in(r, j) * in[j];
      for (int j = 0; j < h; ++j) s += layer.w_rec(r, j) * state.h[l][j];
      a[r] = s;
    }
    std::vector<double> new_c(h), new_h(h);
    for (int j = 0; j < h; ++j) {
      const double ig = sigmoid(a[j]);
      const double fg = sigmoid(a[h + j]);
      const double gg = std::tanh(a[2 * h + j]);
      const double og = sigmoid(a[3 * h + j]);
      new_c[j] = fg * state.c[l][j] + ig * gg;
      new_h[j] = og * std::tanh(new_c[j]);
    }
    state.c[l] = new_c;
    state.h[l] = new_h;
  }

  std::vector<double> logits(V);
  const Eigen::MatrixXd& dec = params.decoder();
  for (int v = 0; v < V; ++v) {
    double s = params.out_bias(v);
    for (int j = 0; j < h; ++j) s += dec(v, j) * state.h[1][j];
    logits[v] = s;
  }
  return logits;
}

ModelParams fd_gradients(const ModelParams& params, const TokenMatrix& inputs,
                         const TokenMatrix& targets, const HiddenState& h0, double step) {
  ModelParams work = params;
  ModelParams grads = zeros_like(params);
  const auto work_view = flat_view(work);
  const auto grad_view = flat_view(grads);

  for (std::size_t s = 0; s < work_view.size(); ++s) {
    for (Eigen::Index i = 0; i < work_view[s].size; ++i) {
      double& coeff = work_view[s].data[i];
      const double saved = coeff;
      coeff = saved + step;
      const double up = window_nll(work, inputs, targets, h0);
      coeff = saved - step;
      const double down = window_nll(work, inputs, targets, h0);
      coeff = saved;
      grad_view[s].data[i] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

double max_rel_error(const ModelParams& a, const ModelParams& b, double floor) {
  ModelParams ca = a;
  ModelParams cb = b;
  const auto va = flat_view(ca);
  const auto vb = flat_view(cb);
  if (va.size() != vb.size()) throw std::invalid_argument("tensor count mismatch");

  double worst = 0.0;
  for (std::size_t s = 0; s < va.size(); ++s) {
    if (va[s].size != vb[s].size) throw std::invalid_argument("tensor size mismatch");
    for (Eigen::Index i = 0; i < va[s].size; ++i) {
      const double x = va[s].data[i];
      const double y = vb[s].data[i];
      const double rel = std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace curricle::test
