#include "curricle/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace curricle {

std::int32_t Vocabulary::id_or_unk(const std::string& tok) const {
  auto it = token_to_id.find(tok);
  return it != token_to_id.end() ? it->second : unk_id;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
  return id_to_token[id];
}

std::vector<std::string> load_raw_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<std::string> tokens;
  std::string line, tok;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    while (ls >> tok) tokens.push_back(tok);
    tokens.emplace_back(Vocabulary::kEosToken);
  }
  return tokens;
}

Vocabulary build_vocab(const std::vector<std::string>& tokens, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");

  struct Entry {
    std::int64_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  freq.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    // The special literals take the tail ids no matter how often they occur.
    if (tokens[i] == Vocabulary::kEosToken || tokens[i] == Vocabulary::kUnkToken) continue;
    auto [it, fresh] = freq.try_emplace(tokens[i]);
    if (fresh) it->second.first = i;
    ++it->second.count;
  }

  std::vector<const std::pair<const std::string, Entry>*> kept;
  kept.reserve(freq.size());
  for (const auto& kv : freq)
    if (kv.second.count >= min_count) kept.push_back(&kv);
  std::sort(kept.begin(), kept.end(), [](const auto* a, const auto* b) {
    if (a->second.count != b->second.count) return a->second.count > b->second.count;
    return a->second.first < b->second.first;
  });

  Vocabulary vocab;
  vocab.id_to_token.reserve(kept.size() + 2);
  for (const auto* kv : kept) {
    vocab.token_to_id.emplace(kv->first, vocab.size());
    vocab.id_to_token.push_back(kv->first);
  }
  for (const char* special : {Vocabulary::kEosToken, Vocabulary::kUnkToken}) {
    vocab.token_to_id.emplace(special, vocab.size());
    vocab.id_to_token.emplace_back(special);
  }
  vocab.eos_id = vocab.token_to_id.at(Vocabulary::kEosToken);
  vocab.unk_id = vocab.token_to_id.at(Vocabulary::kUnkToken);
  return vocab;
}

TokenStream load_corpus(const std::string& path, const Vocabulary& vocab) {
  TokenStream stream;
  for (const auto& tok : load_raw_tokens(path)) stream.ids.push_back(vocab.id_or_unk(tok));
  return stream;
}

std::vector<std::string> detokenize(const TokenStream& stream, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(stream.size());
  for (std::int32_t id : stream.ids) out.push_back(vocab.token(id));
  return out;
}

int BatchSet::window_count() const {
  if (steps() == 0) return 0;
  return (steps() + bptt_len - 1) / bptt_len;
}

std::pair<int, int> BatchSet::window(int w) const {
  if (w < 0 || w >= window_count()) throw std::out_of_range("window index out of range");
  const int begin = w * bptt_len;
  return {begin, std::min(bptt_len, steps() - begin)};
}

BatchSet batchify(const TokenStream& stream, int batch_size, int bptt_len) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (bptt_len < 1) throw std::invalid_argument("bptt_len must be >= 1");
  const auto stripe_len = static_cast<std::int64_t>(stream.size() / batch_size);
  if (stripe_len < 2)
    throw std::runtime_error("stream too short: every stripe needs an input and a target");

  BatchSet set;
  set.bptt_len = bptt_len;
  const auto steps = static_cast<int>(stripe_len - 1);
  set.inputs.resize(batch_size, steps);
  set.targets.resize(batch_size, steps);
  for (int b = 0; b < batch_size; ++b) {
    const std::int64_t base = b * stripe_len;
    for (int t = 0; t < steps; ++t) {
      set.inputs(b, t) = stream.ids[base + t];
      set.targets(b, t) = stream.ids[base + t + 1];
    }
  }
  return set;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  for (const auto& tok : vocab.id_to_token) out << tok << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file: " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) throw std::runtime_error("empty line in vocab file: " + path);
    if (vocab.contains(line)) throw std::runtime_error("duplicate vocab token: " + line);
    vocab.token_to_id.emplace(line, vocab.size());
    vocab.id_to_token.push_back(line);
  }
  auto eos = vocab.token_to_id.find(Vocabulary::kEosToken);
  auto unk = vocab.token_to_id.find(Vocabulary::kUnkToken);
  if (eos == vocab.token_to_id.end() || unk == vocab.token_to_id.end())
    throw std::runtime_error("vocab file lacks <eos> or <unk>: " + path);
  vocab.eos_id = eos->second;
  vocab.unk_id = unk->second;
  return vocab;
}

}  // namespace curricle
