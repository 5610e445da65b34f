#include "curricle/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace curricle {
namespace {

constexpr std::uint64_t kFillStream = 0xEEDBED;

bool parse_count_header(const std::string& line, long long& count, long long& dim) {
  std::istringstream ls(line);
  std::string extra;
  if (!(ls >> count >> dim)) return false;
  if (ls >> extra) return false;
  return count >= 0 && dim > 0;
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  const int V = vocab.size();
  std::vector<bool> seen(V, false);
  std::vector<Eigen::VectorXd> rows(V);
  int dim = 0;
  int covered = 0;

  std::string line;
  long long lineno = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (first_content_line) {
      first_content_line = false;
      long long hdr_count = 0, hdr_dim = 0;
      if (parse_count_header(line, hdr_count, hdr_dim)) {
        dim = static_cast<int>(hdr_dim);
        continue;
      }
    }
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof())
      throw std::invalid_argument("embedding file line " + std::to_string(lineno) +
                                  ": malformed value");
    if (values.empty())
      throw std::invalid_argument("embedding file line " + std::to_string(lineno) +
                                  ": no vector components");
    if (dim == 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim)
      throw std::invalid_argument("embedding file line " + std::to_string(lineno) +
                                  ": expected " + std::to_string(dim) + " components, got " +
                                  std::to_string(values.size()));
    auto it = vocab.token_to_id.find(tok);
    if (it == vocab.token_to_id.end()) continue;
    if (seen[it->second]) continue;
    seen[it->second] = true;
    rows[it->second] = Eigen::Map<Eigen::VectorXd>(values.data(), dim);
    ++covered;
  }
  if (dim == 0)
    throw std::invalid_argument("embedding file has no vectors: " + path);

  EmbeddingMatrix emb;
  emb.dim = dim;
  emb.covered = covered;
  emb.vectors.resize(V, dim);
  Rng fill(derive_seed(0, kFillStream));
  for (int id = 0; id < V; ++id) {
    if (seen[id]) {
      emb.vectors.row(id) = rows[id].transpose();
    } else {
      const double bound = 0.5 / static_cast<double>(dim);
      for (int j = 0; j < dim; ++j) emb.vectors(id, j) = uniform(fill, -bound, bound);
    }
  }
  return emb;
}

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& u,
                         const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine similarity of vectors with different sizes");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0))
    throw std::invalid_argument("cosine similarity undefined for a zero vector");
  return u.dot(v) / (nu * nv);
}

int default_neighbor_k(int vocab_size) {
  if (vocab_size < 2) throw std::invalid_argument("vocabulary too small for neighbors");
  const int k = static_cast<int>(std::lround(std::log2(static_cast<double>(vocab_size))));
  return std::clamp(k, 1, vocab_size - 1);
}

NeighborTable build_neighbor_table(const EmbeddingMatrix& embeddings, int k) {
  const int V = embeddings.vocab_size();
  if (V < 2) throw std::invalid_argument("need at least two embedded words");
  if (k < 1 || k >= V)
    throw std::invalid_argument("neighbor k must satisfy 1 <= k < |V|, got k=" +
                                std::to_string(k) + " with |V|=" + std::to_string(V));

  for (int v = 0; v < V; ++v)
    if (!(embeddings.vectors.row(v).norm() > 0.0))
      throw std::invalid_argument("zero embedding vector for word id " + std::to_string(v));

  NeighborTable table;
  table.k = k;
  table.ids.resize(V, k);
  table.similarities.resize(V, k);

  Eigen::VectorXd sims(V);
  std::vector<std::int32_t> order(V - 1);
  for (int v = 0; v < V; ++v) {
    const Eigen::VectorXd query = embeddings.vectors.row(v).transpose();
    for (int u = 0; u < V; ++u)
      if (u != v) sims(u) = cosine_similarity(embeddings.vectors.row(u).transpose(), query);
    int n = 0;
    for (int u = 0; u < V; ++u)
      if (u != v) order[n++] = u;
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&sims](std::int32_t a, std::int32_t b) {
                        if (sims(a) != sims(b)) return sims(a) > sims(b);
                        return a < b;
                      });
    for (int j = 0; j < k; ++j) {
      table.ids(v, j) = order[j];
      table.similarities(v, j) = sims(order[j]);
    }
  }
  return table;
}

void save_neighbor_table(const std::string& path, const NeighborTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write neighbor table: " + path);
  out << "NNRS1\n";
  out << std::setprecision(17);
  for (int v = 0; v < table.vocab_size(); ++v) {
    out << v << ' ' << table.k;
    for (int j = 0; j < table.k; ++j)
      out << ' ' << table.ids(v, j) << ' ' << table.similarities(v, j);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

NeighborTable load_neighbor_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open neighbor table: " + path);
  std::string magic;
  if (!std::getline(in, magic) || magic != "NNRS1")
    throw std::runtime_error("not a neighbor table (bad magic): " + path);

  // No size header: the vocabulary size is the row count and k comes from the
  // first row, so every row must agree.
  struct Row {
    std::int32_t word;
    std::vector<std::int32_t> ids;
    std::vector<double> sims;
  };
  std::vector<Row> rows;
  int k = -1;
  std::string line;
  long long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Row row;
    int rk = -1;
    if (!(ls >> row.word >> rk) || row.word < 0 || rk < 1)
      throw std::runtime_error("neighbor table line " + std::to_string(lineno) +
                               " malformed: " + path);
    if (k < 0) k = rk;
    if (rk != k)
      throw std::runtime_error("neighbor table line " + std::to_string(lineno) +
                               " has k=" + std::to_string(rk) + ", expected " +
                               std::to_string(k) + ": " + path);
    for (int j = 0; j < k; ++j) {
      std::int32_t id;
      double sim;
      if (!(ls >> id >> sim))
        throw std::runtime_error("neighbor table line " + std::to_string(lineno) +
                                 " truncated: " + path);
      row.ids.push_back(id);
      row.sims.push_back(sim);
    }
    std::string extra;
    if (ls >> extra)
      throw std::runtime_error("neighbor table line " + std::to_string(lineno) +
                               " has trailing data: " + path);
    rows.push_back(std::move(row));
  }

  const int V = static_cast<int>(rows.size());
  if (V < 2 || k < 1 || k >= V)
    throw std::runtime_error("neighbor table is empty or inconsistent: " + path);

  NeighborTable table;
  table.k = k;
  table.ids.resize(V, k);
  table.similarities.resize(V, k);
  std::vector<bool> seen(V, false);
  for (const Row& row : rows) {
    if (row.word >= V)
      throw std::runtime_error("neighbor table word id " + std::to_string(row.word) +
                               " out of range (rows=" + std::to_string(V) + "): " + path);
    if (seen[row.word])
      throw std::runtime_error("neighbor table repeats word " + std::to_string(row.word) +
                               ": " + path);
    seen[row.word] = true;
    for (int j = 0; j < k; ++j) {
      if (row.ids[j] < 0 || row.ids[j] >= V || row.ids[j] == row.word)
        throw std::runtime_error("neighbor table row for word " + std::to_string(row.word) +
                                 " has a bad neighbor id: " + path);
      table.ids(row.word, j) = row.ids[j];
      table.similarities(row.word, j) = row.sims[j];
    }
  }
  return table;
}

TransitionTable build_transition_table(const TokenStream& stream, int vocab_size, int k) {
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  if (k < 1) throw std::invalid_argument("transition k must be >= 1");

  std::vector<std::map<std::int32_t, std::int64_t>> counts(vocab_size);
  for (std::size_t i = 0; i + 1 < stream.size(); ++i) {
    const std::int32_t a = stream.ids[i];
    const std::int32_t b = stream.ids[i + 1];
    if (a < 0 || a >= vocab_size || b < 0 || b >= vocab_size)
      throw std::out_of_range("token id outside the vocabulary in transition build");
    ++counts[a][b];
  }

  TransitionTable table;
  table.k = k;
  table.offsets.reserve(vocab_size + 1);
  table.offsets.push_back(0);
  std::vector<std::pair<std::int32_t, std::int64_t>> row;
  for (int w = 0; w < vocab_size; ++w) {
    row.assign(counts[w].begin(), counts[w].end());
    std::stable_sort(row.begin(), row.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::int64_t total = 0;
    for (const auto& [id, c] : row) total += c;
    const int take = std::min<int>(k, static_cast<int>(row.size()));
    for (int j = 0; j < take; ++j) {
      table.ids.push_back(row[j].first);
      table.probs.push_back(static_cast<double>(row[j].second) / static_cast<double>(total));
    }
    table.offsets.push_back(static_cast<std::int32_t>(table.ids.size()));
  }
  return table;
}

Eigen::VectorXd truncated_softmax(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  Temperature tau) {
  if (scores.size() == 0) throw std::invalid_argument("truncated_softmax on empty scores");
  if (!(tau.value > 0.0 && tau.value <= 1.0))
    throw std::invalid_argument("temperature must lie in (0, 1]");
  Eigen::VectorXd p = ((scores.array() - scores.maxCoeff()) / tau.value).exp();
  p /= p.sum();
  return p;
}

std::int32_t sample_neighbor(std::int32_t word, const NeighborTable& table,
                             Temperature tau, Rng& rng) {
  if (word < 0 || word >= table.vocab_size())
    throw std::out_of_range("word id outside the neighbor table");
  if (table.k == 0) return word;
  const Eigen::VectorXd p = truncated_softmax(table.similarities.row(word).transpose(), tau);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int j = 0; j < table.k; ++j) {
    acc += p(j);
    if (u < acc) return table.ids(word, j);
  }
  return table.ids(word, table.k - 1);
}

Temperature update_temperature(Temperature tau, double valid_ppl, double prev_valid_ppl) {
  if (!(tau.value > 0.0 && tau.value <= 1.0))
    throw std::invalid_argument("temperature must lie in (0, 1]");
  if (!(valid_ppl > 0.0) || !(prev_valid_ppl > 0.0))
    throw std::invalid_argument("perplexities must be positive");
  // expm1 keeps 2^tau - 1 accurate (and strictly positive) when tau is tiny.
  const double contracted = std::expm1(tau.value * std::numbers::ln2);
  const bool improved = valid_ppl < prev_valid_ppl;
  double next;
  if (improved && tau.value < 1.0) {
    next = tau.value + std::abs(tau.value - contracted);
    // A couple of ulps below 1 the contraction stalls on the double grid; once
    // it can no longer make progress the limit is the correct value.
    if (next <= tau.value) next = 1.0;
  } else {
    next = contracted;
  }
  return Temperature{std::min(next, 1.0)};
}

ReplacementSampler::ReplacementSampler(const NeighborTable& table) {
  const int V = table.vocab_size();
  offsets_.reserve(V + 1);
  offsets_.push_back(0);
  ids_.reserve(static_cast<std::size_t>(V) * table.k);
  scores_.reserve(ids_.capacity());
  for (int v = 0; v < V; ++v) {
    for (int j = 0; j < table.k; ++j) {
      ids_.push_back(table.ids(v, j));
      scores_.push_back(table.similarities(v, j));
    }
    offsets_.push_back(static_cast<std::int32_t>(ids_.size()));
  }
  set_temperature(tau_);
}

ReplacementSampler::ReplacementSampler(const TransitionTable& table)
    : offsets_(table.offsets), ids_(table.ids), scores_(table.probs) {
  set_temperature(tau_);
}

void ReplacementSampler::set_temperature(Temperature tau) {
  if (!(tau.value > 0.0 && tau.value <= 1.0))
    throw std::invalid_argument("temperature must lie in (0, 1]");
  tau_ = tau;
  probs_.resize(scores_.size());
  for (int v = 0; v < vocab_size(); ++v) {
    const int begin = offsets_[v];
    const int len = offsets_[v + 1] - begin;
    if (len == 0) continue;
    Eigen::Map<Eigen::VectorXd>(probs_.data() + begin, len) =
        truncated_softmax(Eigen::Map<const Eigen::VectorXd>(scores_.data() + begin, len), tau_);
  }
}

ReplacementSampler::Draw ReplacementSampler::draw(std::int32_t word, Rng& rng) const {
  if (word < 0 || word >= vocab_size())
    throw std::out_of_range("word id outside the replacement sampler");
  const int begin = offsets_[word];
  const int len = offsets_[word + 1] - begin;
  if (len == 0) return {word, true};
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int j = 0; j < len; ++j) {
    acc += probs_[begin + j];
    if (u < acc) return {ids_[begin + j], false};
  }
  return {ids_[begin + len - 1], false};
}

}  // namespace curricle
