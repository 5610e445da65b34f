#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "curricle/neighbors.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace curricle;
namespace ct = curricle::test;

namespace {

EmbeddingMatrix make_embeddings(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix emb;
  emb.dim = static_cast<int>(rows[0].size());
  emb.covered = static_cast<int>(rows.size());
  emb.vectors.resize(static_cast<int>(rows.size()), emb.dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < emb.dim; ++j) emb.vectors(static_cast<int>(i), j) = rows[i][j];
  return emb;
}

double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  return h;
}

}  // namespace

TEST_CASE("cosine similarity on hand values") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 1.0, 1.0;
  CHECK(std::abs(cosine_similarity(a, b) - 0.7071) < 1e-4);
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd c(2);
  c << 0.0, 1.0;
  CHECK(cosine_similarity(a, c) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(cosine_similarity(a, zero), std::invalid_argument);
  Eigen::VectorXd longer(3);
  longer << 1, 2, 3;
  CHECK_THROWS_AS(cosine_similarity(a, longer), std::invalid_argument);
}

TEST_CASE("three-word table with a tie broken by lower id") {
  const EmbeddingMatrix emb = make_embeddings({{1, 0}, {0, 1}, {1, 1}});
  const NeighborTable t = build_neighbor_table(emb, 1);
  CHECK(t.ids(0, 0) == 2);  // a -> c
  CHECK(t.ids(1, 0) == 2);  // b -> c
  CHECK(t.ids(2, 0) == 0);  // c: a and b tie at 0.7071, lower id wins
  CHECK(std::abs(t.similarities(2, 0) - 0.7071) < 1e-4);
}

TEST_CASE("neighbor tables equal the brute-force oracle on random sets") {
  Rng rng(2024);
  for (int rep = 0; rep < 5; ++rep) {
    const int V = 8 + static_cast<int>(uniform01(rng) * 40);
    const int d = 2 + static_cast<int>(uniform01(rng) * 6);
    EmbeddingMatrix emb;
    emb.dim = d;
    emb.covered = V;
    emb.vectors.resize(V, d);
    for (int v = 0; v < V; ++v)
      for (int j = 0; j < d; ++j) emb.vectors(v, j) = uniform(rng, -1.0, 1.0);
    const int k = 1 + static_cast<int>(uniform01(rng) * (V - 1));

    const NeighborTable got = build_neighbor_table(emb, k);
    const NeighborTable want = ct::brute_force_neighbors(emb, k);
    CHECK((got.ids.array() == want.ids.array()).all());
    CHECK((got.similarities.array() == want.similarities.array()).all());  // bitwise
  }
}

TEST_CASE("neighbor rows exclude the word and sort descending") {
  Rng rng(5);
  EmbeddingMatrix emb;
  emb.dim = 4;
  emb.covered = 30;
  emb.vectors.resize(30, 4);
  for (int v = 0; v < 30; ++v)
    for (int j = 0; j < 4; ++j) emb.vectors(v, j) = uniform(rng, -1.0, 1.0);
  const NeighborTable t = build_neighbor_table(emb, 6);
  for (int v = 0; v < 30; ++v)
    for (int j = 0; j < 6; ++j) {
      CHECK(t.ids(v, j) != v);
      CHECK(t.similarities(v, j) >= -1.0 - 1e-12);
      CHECK(t.similarities(v, j) <= 1.0 + 1e-12);
      if (j) CHECK(t.similarities(v, j) <= t.similarities(v, j - 1));
    }
}

TEST_CASE("default_neighbor_k is round(log2 V) clamped") {
  CHECK(default_neighbor_k(1024) == 10);
  CHECK(default_neighbor_k(1000) == 10);
  CHECK(default_neighbor_k(2) == 1);
  CHECK(default_neighbor_k(3) == 2);  // round(1.58) = 2 = V - 1
  CHECK_THROWS_AS(default_neighbor_k(1), std::invalid_argument);
}

TEST_CASE("build_neighbor_table validates inputs") {
  const EmbeddingMatrix emb = make_embeddings({{1, 0}, {0, 1}, {1, 1}});
  CHECK_THROWS_AS(build_neighbor_table(emb, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_neighbor_table(emb, 3), std::invalid_argument);
  const EmbeddingMatrix withzero = make_embeddings({{1, 0}, {0, 0}, {1, 1}});
  CHECK_THROWS_AS(build_neighbor_table(withzero, 1), std::invalid_argument);
}

TEST_CASE("truncated_softmax matches hand values and normalizes") {
  Eigen::VectorXd s(2);
  s << 0.9, 0.5;
  const Eigen::VectorXd p = truncated_softmax(s, Temperature{0.1});
  CHECK(std::abs(p(0) - 0.98201) < 1e-5);
  CHECK(std::abs(p(1) - 0.01799) < 1e-5);
  CHECK(std::abs(p.sum() - 1.0) <= 1e-12);

  Eigen::VectorXd eq = Eigen::VectorXd::Constant(4, 0.37);
  const Eigen::VectorXd u = truncated_softmax(eq, Temperature{0.42});
  for (int i = 0; i < 4; ++i) CHECK(u(i) == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(truncated_softmax(s, Temperature{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(truncated_softmax(s, Temperature{1.5}), std::invalid_argument);
  CHECK_THROWS_AS(truncated_softmax(Eigen::VectorXd(), Temperature{0.5}),
                  std::invalid_argument);
}

TEST_CASE("neighbor entropy grows with temperature") {
  Eigen::VectorXd s(5);
  s << 0.9, 0.7, 0.4, 0.2, -0.3;
  double prev = -1.0;
  for (double tau : {0.05, 0.1, 0.3, 0.6, 1.0}) {
    const double h = entropy(truncated_softmax(s, Temperature{tau}));
    CHECK(h >= prev - 1e-12);
    prev = h;
  }
}

TEST_CASE("sample_neighbor frequencies follow the distribution") {
  // ln p similarities at tau = 1 give exactly (0.7, 0.3)
  NeighborTable t;
  t.k = 2;
  t.ids.resize(1, 2);
  t.similarities.resize(1, 2);
  t.ids << 1, 2;
  t.similarities << std::log(0.7), std::log(0.3);

  Rng rng(77);
  int first = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (sample_neighbor(0, t, Temperature{1.0}, rng) == 1) ++first;
  CHECK(std::abs(first / static_cast<double>(n) - 0.7) < 0.02);
}

TEST_CASE("tiny temperature is near-greedy and k=1 is degenerate") {
  NeighborTable t;
  t.k = 3;
  t.ids.resize(1, 3);
  t.similarities.resize(1, 3);
  t.ids << 4, 2, 9;
  t.similarities << 0.9, 0.8, 0.1;

  Rng rng(13);
  int top = 0;
  for (int i = 0; i < 10000; ++i)
    if (sample_neighbor(0, t, Temperature{0.01}, rng) == 4) ++top;
  CHECK(top / 10000.0 > 0.999);

  NeighborTable one;
  one.k = 1;
  one.ids.resize(1, 1);
  one.similarities.resize(1, 1);
  one.ids << 7;
  one.similarities << 0.5;
  for (int i = 0; i < 50; ++i) CHECK(sample_neighbor(0, one, Temperature{0.3}, rng) == 7);
}

TEST_CASE("update_temperature fixed point, growth, contraction") {
  CHECK(update_temperature(Temperature{1.0}, 1.0, 2.0).value == 1.0);
  CHECK(update_temperature(Temperature{1.0}, 2.0, 1.0).value == 1.0);
  CHECK(std::abs(update_temperature(Temperature{0.1}, 5.0, 6.0).value - 0.12823) < 1e-5);
  CHECK(std::abs(update_temperature(Temperature{0.5}, 6.0, 5.0).value - 0.41421) < 1e-5);
  CHECK_THROWS_AS(update_temperature(Temperature{0.5}, -1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(update_temperature(Temperature{1.5}, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("transition table from a six-token stream") {
  // tokens: a b a b a c -> ids 0 1 0 1 0 2
  TokenStream s;
  s.ids = {0, 1, 0, 1, 0, 2};
  const TransitionTable t = build_transition_table(s, 3, 2);

  REQUIRE(t.row_size(0) == 2);
  CHECK(t.ids[t.offsets[0]] == 1);
  CHECK(t.probs[t.offsets[0]] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.ids[t.offsets[0] + 1] == 2);
  CHECK(t.probs[t.offsets[0] + 1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  REQUIRE(t.row_size(1) == 1);
  CHECK(t.ids[t.offsets[1]] == 0);
  CHECK(t.probs[t.offsets[1]] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(t.row_size(2) == 0);  // c only appears as the final token
}

TEST_CASE("self-loops count and rows normalize before truncation") {
  TokenStream s;
  s.ids = {0, 0, 0};
  const TransitionTable t = build_transition_table(s, 1, 2);
  REQUIRE(t.row_size(0) == 1);
  CHECK(t.ids[0] == 0);
  CHECK(t.probs[0] == 1.0);

  Rng rng(31);
  TokenStream big;
  for (int i = 0; i < 5000; ++i)
    big.ids.push_back(static_cast<int>(uniform01(rng) * 12) % 12);
  const TransitionTable full = build_transition_table(big, 12, 12);
  for (int w = 0; w < 12; ++w) {
    double sum = 0.0;
    for (int j = full.offsets[w]; j < full.offsets[w + 1]; ++j) sum += full.probs[j];
    if (full.row_size(w) == 12) CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("transition rows order by probability then id") {
  // 0 -> 1 twice, 0 -> 2 twice, 0 -> 3 once: tie between 1 and 2 keeps id order
  TokenStream s;
  s.ids = {0, 1, 0, 2, 0, 1, 0, 2, 0, 3};
  const TransitionTable t = build_transition_table(s, 4, 3);
  REQUIRE(t.row_size(0) == 3);
  CHECK(t.ids[t.offsets[0]] == 1);
  CHECK(t.ids[t.offsets[0] + 1] == 2);
  CHECK(t.ids[t.offsets[0] + 2] == 3);
}

TEST_CASE("embedding file parsing: header, order, duplicates, coverage") {
  const auto dir = ct::fresh_dir("neigh_embed");
  const Vocabulary vocab = build_vocab({"a", "a", "b", "c"});

  ct::write_text(dir / "plain.txt", "a 1.0 0.0\nb 0.0 1.0\n");
  const EmbeddingMatrix plain = load_embeddings((dir / "plain.txt").string(), vocab);
  CHECK(plain.dim == 2);
  CHECK(plain.vectors(0, 0) == 1.0);
  CHECK(plain.vectors(1, 1) == 1.0);

  ct::write_text(dir / "hdr.txt", "2 2\na 1.0 0.0\nb 0.0 1.0\n");
  const EmbeddingMatrix hdr = load_embeddings((dir / "hdr.txt").string(), vocab);
  CHECK(hdr.vectors(0, 0) == plain.vectors(0, 0));
  CHECK(hdr.vectors(1, 1) == plain.vectors(1, 1));

  // duplicate token keeps the first row; unknown tokens are skipped
  ct::write_text(dir / "dup.txt", "a 1.0 0.0\na 9.0 9.0\nzzz 5.0 5.0\nb 0.0 1.0\n");
  const EmbeddingMatrix dup = load_embeddings((dir / "dup.txt").string(), vocab);
  CHECK(dup.vectors(0, 0) == 1.0);
  CHECK(dup.covered == 2);

  ct::write_text(dir / "bad.txt", "a 1.0 0.0\nb 0.0\n");
  CHECK_THROWS_WITH_AS(load_embeddings((dir / "bad.txt").string(), vocab),
                       doctest::Contains("line 2"), std::invalid_argument);
}

TEST_CASE("missing embedding rows get small deterministic fill") {
  const auto dir = ct::fresh_dir("neigh_fill");
  const Vocabulary vocab = build_vocab({"a", "a", "b", "c"});  // + eos/unk = 5 ids
  ct::write_text(dir / "e.txt", "a 1.0 0.0 0.0 0.0\n");

  const EmbeddingMatrix e1 = load_embeddings((dir / "e.txt").string(), vocab);
  CHECK(e1.covered == 1);
  CHECK(e1.coverage() == doctest::Approx(0.2));
  const double bound = 0.5 / 4.0;
  for (int v = 1; v < vocab.size(); ++v)
    for (int j = 0; j < 4; ++j) {
      CHECK(e1.vectors(v, j) >= -bound);
      CHECK(e1.vectors(v, j) < bound);
    }
  // the fill is a fixed stream: reloading gives the identical matrix
  const EmbeddingMatrix e2 = load_embeddings((dir / "e.txt").string(), vocab);
  CHECK((e1.vectors.array() == e2.vectors.array()).all());
}

TEST_CASE("neighbor cache round-trips exactly with a bare magic line") {
  const auto dir = ct::fresh_dir("neigh_cache");
  Rng rng(404);
  EmbeddingMatrix emb;
  emb.dim = 5;
  emb.covered = 17;
  emb.vectors.resize(17, 5);
  for (int v = 0; v < 17; ++v)
    for (int j = 0; j < 5; ++j) emb.vectors(v, j) = uniform(rng, -1.0, 1.0);
  const NeighborTable t = build_neighbor_table(emb, 4);

  const auto path = (dir / "cache.nnrs").string();
  save_neighbor_table(path, t);

  const auto lines = ct::split_lines(ct::read_text(path));
  REQUIRE(lines.size() == 18);  // magic + one row per word
  CHECK(lines[0] == "NNRS1");

  const NeighborTable r = load_neighbor_table(path);
  CHECK(r.k == 4);
  CHECK((r.ids.array() == t.ids.array()).all());
  CHECK((r.similarities.array() == t.similarities.array()).all());
}

TEST_CASE("neighbor cache loader rejects malformed tables") {
  const auto dir = ct::fresh_dir("neigh_cache_bad");
  const auto path = [&dir](const char* name) { return (dir / name).string(); };

  ct::write_text(dir / "magic.nnrs", "NOPE\n0 1 1 0.5\n1 1 0 0.5\n");
  CHECK_THROWS_WITH_AS(load_neighbor_table(path("magic.nnrs")),
                       doctest::Contains("magic"), std::runtime_error);

  ct::write_text(dir / "dupword.nnrs", "NNRS1\n0 1 1 0.5\n0 1 1 0.5\n");
  CHECK_THROWS(load_neighbor_table(path("dupword.nnrs")));

  ct::write_text(dir / "selfref.nnrs", "NNRS1\n0 1 0 0.5\n1 1 0 0.5\n");
  CHECK_THROWS(load_neighbor_table(path("selfref.nnrs")));

  ct::write_text(dir / "mixedk.nnrs", "NNRS1\n0 1 1 0.5\n1 2 0 0.5 0 0.1\n");
  CHECK_THROWS(load_neighbor_table(path("mixedk.nnrs")));

  ct::write_text(dir / "trailing.nnrs", "NNRS1\n0 1 1 0.5 junk\n1 1 0 0.5\n");
  CHECK_THROWS(load_neighbor_table(path("trailing.nnrs")));

  ct::write_text(dir / "short.nnrs", "NNRS1\n0 1 1 0.5\n");
  CHECK_THROWS(load_neighbor_table(path("short.nnrs")));
}

TEST_CASE("replacement sampler draws match sample_neighbor bitwise") {
  Rng setup(777);
  EmbeddingMatrix emb;
  emb.dim = 6;
  emb.covered = 23;
  emb.vectors.resize(23, 6);
  for (int v = 0; v < 23; ++v)
    for (int j = 0; j < 6; ++j) emb.vectors(v, j) = uniform(setup, -1.0, 1.0);
  const NeighborTable t = build_neighbor_table(emb, 5);

  ReplacementSampler sampler(t);
  for (double tau : {0.07, 0.4, 1.0}) {
    sampler.set_temperature(Temperature{tau});
    Rng a(900 + static_cast<int>(tau * 100));
    Rng b = a;
    for (int i = 0; i < 500; ++i) {
      const auto word = static_cast<std::int32_t>(uniform01(a) * 23) % 23;
      uniform01(b);  // keep the two streams aligned
      const auto got = sampler.draw(word, a);
      const auto want = sample_neighbor(word, t, Temperature{tau}, b);
      CHECK(got.id == want);
      CHECK(!got.identity_fallback);
    }
    CHECK(a == b);  // identical stream consumption
  }
}

TEST_CASE("empty transition rows fall back to identity without consuming RNG") {
  TokenStream s;
  s.ids = {0, 1, 0, 1, 0, 2};  // word 2 has no successors
  const TransitionTable t = build_transition_table(s, 3, 2);
  ReplacementSampler sampler(t);
  sampler.set_temperature(Temperature{0.5});

  Rng rng(1);
  const Rng before = rng;
  const auto d = sampler.draw(2, rng);
  CHECK(d.id == 2);
  CHECK(d.identity_fallback);
  CHECK(rng == before);

  const auto ok = sampler.draw(0, rng);
  CHECK(!ok.identity_fallback);
  CHECK(rng != before);
}
