#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace curricle {

using TokenMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

// Dense token <-> id mapping. Ids are ordered by descending corpus frequency,
// ties broken by first occurrence; <eos> and <unk> are always present (reused
// when the corpus already contains them, appended at the end otherwise).
struct Vocabulary {
  static constexpr const char* kEosToken = "<eos>";
  static constexpr const char* kUnkToken = "<unk>";

  std::unordered_map<std::string, std::int32_t> token_to_id;
  std::vector<std::string> id_to_token;
  std::int32_t eos_id = -1;
  std::int32_t unk_id = -1;

  std::int32_t size() const { return static_cast<std::int32_t>(id_to_token.size()); }
  bool contains(const std::string& token) const { return token_to_id.count(token) != 0; }
  std::int32_t id_or_unk(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
};

struct TokenStream {
  std::vector<std::int32_t> ids;
  std::size_t size() const { return ids.size(); }
};

// Token-id matrices for truncated BPTT. Each of the batch_size rows (stripes)
// is a contiguous slice of the stream; targets are inputs shifted by one
// position within the stripe. Columns step through time.
struct BatchSet {
  TokenMatrix inputs;   // [batch x steps]
  TokenMatrix targets;  // [batch x steps]
  int bptt_len = 0;

  int batch_size() const { return static_cast<int>(inputs.rows()); }
  int steps() const { return static_cast<int>(inputs.cols()); }
  int window_count() const;
  // Column range of window w as (begin, length); the last window may be short.
  std::pair<int, int> window(int w) const;
};

// Whitespace-tokenized lines with <eos> appended to every line, in file order.
std::vector<std::string> load_raw_tokens(const std::string& path);

Vocabulary build_vocab(const std::vector<std::string>& tokens, int min_count = 1);

// Tokenizes `path` and maps through `vocab`; unseen tokens become <unk>.
TokenStream load_corpus(const std::string& path, const Vocabulary& vocab);

std::vector<std::string> detokenize(const TokenStream& stream, const Vocabulary& vocab);

// Drops the stream remainder past batch_size * floor(n / batch_size) tokens.
// Throws std::invalid_argument on nonsensical sizes and std::runtime_error
// when the stream is too short to give every stripe an input and a target.
BatchSet batchify(const TokenStream& stream, int batch_size, int bptt_len);

// One token per line; the line number (from zero) is the id.
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

}  // namespace curricle
