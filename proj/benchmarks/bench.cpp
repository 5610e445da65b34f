#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "curricle/corpus.hpp"
#include "curricle/neighbors.hpp"
#include "curricle/seqmodel.hpp"
#include "curricle/trainer.hpp"

namespace {

using namespace curricle;

TokenStream random_stream(int n, int vocab, std::uint64_t seed) {
  Rng rng(seed);
  TokenStream s;
  s.ids.reserve(n);
  for (int i = 0; i < n; ++i)
    s.ids.push_back(static_cast<std::int32_t>(uniform01(rng) * vocab) % vocab);
  return s;
}

EmbeddingMatrix random_embeddings(int vocab, int dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingMatrix emb;
  emb.dim = dim;
  emb.covered = vocab;
  emb.vectors.resize(vocab, dim);
  for (int v = 0; v < vocab; ++v)
    for (int j = 0; j < dim; ++j) emb.vectors(v, j) = uniform(rng, -1.0, 1.0);
  return emb;
}

void bm_lstm_step(benchmark::State& state) {
  const int V = 1000, h = static_cast<int>(state.range(0)), B = 30;
  Rng init(1);
  const ModelParams params = init_params(V, h, h, init);
  HiddenState hs = zero_state(B, h);
  std::vector<std::int32_t> ids(B);
  for (int b = 0; b < B; ++b) ids[b] = b % V;
  for (auto _ : state) {
    lstm_step(params, ids.data(), B, hs, nullptr);
    benchmark::DoNotOptimize(hs.h[1].data());
  }
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(bm_lstm_step)->Arg(64)->Arg(200);

void bm_window_loss_and_grads(benchmark::State& state) {
  const int V = 1000, h = static_cast<int>(state.range(0)), B = 30, T = 35;
  Rng init(2);
  const ModelParams params = init_params(V, h, h, init);
  const TokenStream stream = random_stream(B * (T + 1), V, 3);
  const BatchSet data = batchify(stream, B, T);
  const HiddenState h0 = zero_state(B, h);
  for (auto _ : state) {
    const LossResult res = loss_and_grads(params, data.inputs.leftCols(T),
                                          data.targets.leftCols(T), h0);
    benchmark::DoNotOptimize(res.mean_nll);
  }
  state.SetItemsProcessed(state.iterations() * B * T);
}
BENCHMARK(bm_window_loss_and_grads)->Arg(64)->Unit(benchmark::kMillisecond);

void bm_build_neighbor_table(benchmark::State& state) {
  const int V = static_cast<int>(state.range(0));
  const EmbeddingMatrix emb = random_embeddings(V, 64, 4);
  const int k = default_neighbor_k(V);
  for (auto _ : state) {
    const NeighborTable t = build_neighbor_table(emb, k);
    benchmark::DoNotOptimize(t.ids.data());
  }
}
BENCHMARK(bm_build_neighbor_table)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void bm_replacement_draw(benchmark::State& state) {
  const int V = 2048;
  const EmbeddingMatrix emb = random_embeddings(V, 64, 5);
  const NeighborTable table = build_neighbor_table(emb, default_neighbor_k(V));
  ReplacementSampler sampler(table);
  sampler.set_temperature(Temperature{0.4});
  Rng rng(6);
  std::int32_t word = 0;
  for (auto _ : state) {
    const auto d = sampler.draw(word, rng);
    word = d.id;
    benchmark::DoNotOptimize(word);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_replacement_draw);

void bm_truncated_softmax(benchmark::State& state) {
  Rng rng(7);
  Eigen::VectorXd scores(static_cast<int>(state.range(0)));
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores(i) = uniform(rng, -1.0, 1.0);
  for (auto _ : state) {
    const Eigen::VectorXd p = truncated_softmax(scores, Temperature{0.3});
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(bm_truncated_softmax)->Arg(10)->Arg(64);

void bm_batchify(benchmark::State& state) {
  const TokenStream stream = random_stream(200000, 5000, 8);
  for (auto _ : state) {
    const BatchSet data = batchify(stream, 30, 35);
    benchmark::DoNotOptimize(data.inputs.data());
  }
  state.SetItemsProcessed(state.iterations() * stream.ids.size());
}
BENCHMARK(bm_batchify)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
