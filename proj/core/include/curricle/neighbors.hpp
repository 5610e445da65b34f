#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "curricle/corpus.hpp"
#include "curricle/rng.hpp"

namespace curricle {

// Pretrained word vectors aligned to vocabulary ids. Rows for tokens missing
// from the embedding file are filled with small fixed-seed uniform noise so
// that similarities stay defined; `covered` counts rows that came from the
// file.
struct EmbeddingMatrix {
  Eigen::MatrixXd vectors;  // [|V| x dim]
  int dim = 0;
  int covered = 0;

  int vocab_size() const { return static_cast<int>(vectors.rows()); }
  double coverage() const {
    return vocab_size() == 0 ? 0.0 : static_cast<double>(covered) / vocab_size();
  }
};

// Text format: optional "<count> <dim>" header, then "<token> <v1> ... <vd>"
// per line. Tokens outside `vocab` are skipped; repeated tokens keep the
// first row. Throws std::invalid_argument on malformed lines (with the line
// number) and std::runtime_error when the file cannot be read.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab);

// Sharpness of the replacement distribution; valid range (0, 1].
struct Temperature {
  double value = 0.1;
};

// Throws std::invalid_argument on a dimension mismatch or a zero vector.
double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& u,
                         const Eigen::Ref<const Eigen::VectorXd>& v);

// Per-word top-k cosine neighbors, similarity-descending (ties by lower id),
// the word itself excluded.
struct NeighborTable {
  TokenMatrix ids;               // [|V| x k]
  Eigen::MatrixXd similarities;  // [|V| x k]
  int k = 0;

  int vocab_size() const { return static_cast<int>(ids.rows()); }
};

// round(log2 |V|), clamped to [1, |V| - 1].
int default_neighbor_k(int vocab_size);

// Requires 1 <= k < |V|.
NeighborTable build_neighbor_table(const EmbeddingMatrix& embeddings, int k);

void save_neighbor_table(const std::string& path, const NeighborTable& table);
NeighborTable load_neighbor_table(const std::string& path);

// Top-k successor probabilities from corpus bigram counts, stored ragged:
// words with fewer than k distinct successors have short rows, words never
// seen in first position have empty ones. Probabilities are row-normalized
// before truncation, ordered descending with ties by lower id.
struct TransitionTable {
  std::vector<std::int32_t> offsets;  // size |V| + 1
  std::vector<std::int32_t> ids;
  std::vector<double> probs;
  int k = 0;

  int vocab_size() const { return static_cast<int>(offsets.size()) - 1; }
  int row_size(std::int32_t word) const { return offsets[word + 1] - offsets[word]; }
};

TransitionTable build_transition_table(const TokenStream& stream, int vocab_size, int k);

// exp(s_j / tau) over the given scores, normalized after subtracting the
// maximum. Throws std::invalid_argument on an empty score set or a
// temperature outside (0, 1].
Eigen::VectorXd truncated_softmax(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  Temperature tau);

// Draws one replacement for `word` from its neighbor row.
std::int32_t sample_neighbor(std::int32_t word, const NeighborTable& table,
                             Temperature tau, Rng& rng);

// One validation step of the temperature curriculum. With c = 2^tau - 1:
// improved validation perplexity and tau < 1 move tau to tau + |tau - c|,
// anything else contracts it to c. The result stays in (0, 1]; 1 is a fixed
// point. Perplexities must be positive and tau valid, else
// std::invalid_argument.
Temperature update_temperature(Temperature tau, double valid_ppl, double prev_valid_ppl);

// Replacement drawing as used by the trainer: precomputes every row's
// sampling distribution for the current temperature so per-token draws cost
// O(k). The referenced table must outlive the sampler. Draws consume RNG
// state exactly like sample_neighbor and match it bitwise; a draw on an
// empty row returns the word itself, consumes nothing, and is flagged.
class ReplacementSampler {
 public:
  explicit ReplacementSampler(const NeighborTable& table);
  explicit ReplacementSampler(const TransitionTable& table);

  void set_temperature(Temperature tau);
  Temperature temperature() const { return tau_; }

  struct Draw {
    std::int32_t id = -1;
    bool identity_fallback = false;
  };
  Draw draw(std::int32_t word, Rng& rng) const;

  int vocab_size() const { return static_cast<int>(offsets_.size()) - 1; }

 private:
  std::vector<std::int32_t> offsets_;
  std::vector<std::int32_t> ids_;
  std::vector<double> scores_;
  std::vector<double> probs_;
  Temperature tau_{0.1};
};

}  // namespace curricle
