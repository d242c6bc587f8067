#pragma once

// SemEval-2010 Task 8 ingestion: parsing, tokenization with position
// indicators, vocabulary, pretrained embeddings, k-fold splits and the
// tokenized-corpus cache.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rrgru/error.hpp"
#include "rrgru/labels.hpp"
#include "rrgru/rng.hpp"

namespace rrgru {

struct RawExample {
  long id = 0;
  std::string text;
  LabelId label = LabelSet::kOther;
};

struct TokenizedExample {
  long id = 0;
  std::vector<std::size_t> token_ids;
  std::size_t p_e1 = 0;
  std::size_t p_e2 = 0;
  LabelId label = LabelSet::kOther;

  std::size_t length() const { return token_ids.size(); }
  friend bool operator==(const TokenizedExample&, const TokenizedExample&) = default;
};

inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kE1Open = "<e1>";
inline constexpr std::string_view kE1Close = "</e1>";
inline constexpr std::string_view kE2Open = "<e2>";
inline constexpr std::string_view kE2Close = "</e2>";

class Vocabulary {
 public:
  static constexpr std::size_t kUnkId = 0;
  static constexpr std::size_t kE1OpenId = 1;
  static constexpr std::size_t kE1CloseId = 2;
  static constexpr std::size_t kE2OpenId = 3;
  static constexpr std::size_t kE2CloseId = 4;

  Vocabulary() {
    for (auto t : {kUnk, kE1Open, kE1Close, kE2Open, kE2Close}) add(std::string(t));
  }

  std::size_t size() const { return tokens_.size(); }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::size_t id_or_unk(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Order-sensitive hash of the token list; identifies the vocabulary a
  // checkpoint was trained with.
  std::uint64_t hash() const {
    std::uint64_t h = fnv1a64("");
    for (const auto& t : tokens_) {
      h = fnv1a64(t, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

  // One token per line, in id order.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary", path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read vocabulary", path);
    Vocabulary v;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (n <= 5) {
        if (line != v.tokens_[n - 1])
          throw FormatError("reserved token '" + v.tokens_[n - 1] + "' expected", path, n);
        continue;
      }
      if (v.add(line) != n - 1) throw FormatError("duplicate token '" + line + "'", path, n);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::size_t count_of(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace detail

// Checks that the sentence has exactly one well-formed, non-overlapping span
// per nominal.
inline void validate_markup(std::string_view text) {
  for (auto tag : {kE1Open, kE1Close, kE2Open, kE2Close})
    if (detail::count_of(text, tag) != 1)
      throw ParseError("sentence must contain exactly one " + std::string(tag));
  const auto o1 = text.find(kE1Open), c1 = text.find(kE1Close);
  const auto o2 = text.find(kE2Open), c2 = text.find(kE2Close);
  if (o1 > c1 || o2 > c2) throw ParseError("nominal closing tag precedes its opening tag");
  if (!(c1 < o2 || c2 < o1)) throw ParseError("nominal spans overlap");
}

// Parses the official format: `<id>\t"<sentence>"`, relation line,
// `Comment...` line, blank separator.
inline std::vector<RawExample> parse_semeval(std::istream& in, const std::string& source = {}) {
  std::vector<RawExample> out;
  std::string raw;
  std::size_t lineno = 0;
  auto next = [&](std::string& line) {
    if (!std::getline(in, raw)) return false;
    ++lineno;
    line = std::string(detail::trim_cr(raw));
    return true;
  };

  std::string line;
  while (next(line)) {
    if (detail::trim(line).empty()) continue;

    const std::size_t sentence_line = lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected '<id>\\t\"sentence\"'", source, lineno);
    RawExample ex;
    try {
      std::size_t used = 0;
      ex.id = std::stol(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("id");
    } catch (const std::exception&) {
      throw ParseError("bad sentence id '" + line.substr(0, tab) + "'", source, lineno);
    }
    auto body = detail::trim(std::string_view(line).substr(tab + 1));
    if (body.size() < 2 || body.front() != '"' || body.back() != '"')
      throw ParseError("sentence must be double-quoted", source, lineno);
    ex.text = std::string(body.substr(1, body.size() - 2));
    try {
      validate_markup(ex.text);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), source, sentence_line);
    }

    if (!next(line) || detail::trim(line).empty())
      throw ParseError("missing relation line after sentence " + std::to_string(ex.id), source,
                       lineno);
    const auto rel = detail::trim(line);
    auto label = LabelSet::try_parse(rel);
    if (!label) {
      if (rel.rfind("Comment", 0) == 0 || rel.find('\t') != std::string_view::npos)
        throw ParseError("missing relation line after sentence " + std::to_string(ex.id),
                         source, lineno);
      throw LabelError("unknown relation '" + std::string(rel) + "'", source, lineno);
    }
    ex.label = *label;

    if (!next(line) || line.rfind("Comment", 0) != 0)
      throw ParseError("expected 'Comment' line", source, lineno);
    if (next(line) && !detail::trim(line).empty())
      throw ParseError("expected blank separator line", source, lineno);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<RawExample> parse_semeval(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset", path);
  return parse_semeval(in, path);
}

// Lowercases, isolates the position indicators and the punctuation
// characters . , ! ? ; : ' " ( ) and splits on whitespace.
inline std::vector<std::string> split_tokens(std::string_view text) {
  static constexpr std::string_view kPunct = ".,!?;:'\"()";
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (std::size_t i = 0; i < text.size();) {
    bool tag = false;
    for (auto t : {kE1Open, kE1Close, kE2Open, kE2Close}) {
      if (text.substr(i, t.size()) == t) {
        spaced += ' ';
        spaced += t;
        spaced += ' ';
        i += t.size();
        tag = true;
        break;
      }
    }
    if (tag) continue;
    const char c = text[i++];
    if (kPunct.find(c) != std::string_view::npos) {
      spaced += ' ';
      spaced += c;
      spaced += ' ';
    } else {
      spaced += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::vector<std::string> tokens;
  std::istringstream ss(spaced);
  for (std::string t; ss >> t;) tokens.push_back(std::move(t));
  return tokens;
}

// Token ids with indicators kept as single words; p_e1/p_e2 point at the
// first content token inside each span. With frozen = false unseen tokens
// are added to the vocabulary, otherwise they map to <unk>.
namespace detail {

template <typename IdOf>
TokenizedExample tokenize_with(const RawExample& ex, IdOf&& id_of) {
  validate_markup(ex.text);
  const auto tokens = split_tokens(ex.text);
  TokenizedExample out;
  out.id = ex.id;
  out.label = ex.label;
  out.token_ids.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == kE1Open) out.p_e1 = i + 1;
    if (t == kE2Open) out.p_e2 = i + 1;
    out.token_ids.push_back(id_of(t));
  }
  return out;
}

}  // namespace detail

inline TokenizedExample tokenize(const RawExample& ex, Vocabulary& vocab, bool frozen) {
  if (frozen) return detail::tokenize_with(ex, [&](const std::string& t) { return vocab.id_or_unk(t); });
  return detail::tokenize_with(ex, [&](const std::string& t) { return vocab.add(t); });
}

inline TokenizedExample tokenize(const RawExample& ex, const Vocabulary& vocab) {
  return detail::tokenize_with(ex, [&](const std::string& t) { return vocab.id_or_unk(t); });
}

// d_e x |V| row-major; column j is the vector of token j.
struct EmbeddingMatrix {
  std::size_t dim = 0;
  std::size_t vocab_size = 0;
  std::vector<double> data;
  std::size_t covered = 0;  // vocabulary entries found in the file

  double at(std::size_t row, std::size_t token) const { return data[row * vocab_size + token]; }
  double coverage() const { return vocab_size ? double(covered) / double(vocab_size) : 0.0; }
};

inline constexpr double kOovInitRange = 0.25;

inline EmbeddingMatrix random_embeddings(std::size_t dim, std::size_t vocab_size,
                                         std::uint64_t seed) {
  EmbeddingMatrix m{dim, vocab_size, std::vector<double>(dim * vocab_size)};
  Rng rng = substream(seed, "embeddings");
  std::uniform_real_distribution<double> u(-kOovInitRange, kOovInitRange);
  for (std::size_t j = 0; j < vocab_size; ++j)
    for (std::size_t i = 0; i < dim; ++i) m.data[i * vocab_size + j] = u(rng);
  return m;
}

// GloVe text format. Tokens missing from the file (indicators and <unk>
// included) get uniform random vectors from `seed`, drawn in id order.
inline EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                       std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings file", path);
  std::size_t dim = 0;
  std::vector<std::vector<double>> found(vocab.size());
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    std::istringstream ss{std::string(view)};
    std::string word;
    ss >> word;
    vec.clear();
    for (std::string tok; ss >> tok;) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError("bad number '" + tok + "'", path, lineno);
      }
    }
    if (dim == 0) {
      if (vec.empty()) throw FormatError("line has no vector values", path, lineno);
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw FormatError("expected " + std::to_string(dim) + " values, found " +
                            std::to_string(vec.size()),
                        path, lineno);
    }
    if (!vocab.contains(word)) continue;
    const auto id = vocab.id_or_unk(word);
    if (id <= Vocabulary::kE2CloseId) continue;
    if (found[id].empty()) found[id] = vec;
  }
  if (dim == 0) throw FormatError("embeddings file is empty", path);

  EmbeddingMatrix m = random_embeddings(dim, vocab.size(), seed);
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (found[j].empty()) continue;
    ++m.covered;
    for (std::size_t i = 0; i < dim; ++i) m.data[i * vocab.size() + j] = found[j][i];
  }
  return m;
}

struct Fold {
  std::vector<TokenizedExample> train;
  std::vector<TokenizedExample> valid;
};

// Seeded shuffle, then k contiguous folds whose sizes differ by at most one.
inline std::vector<Fold> kfold_split(const std::vector<TokenizedExample>& examples, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 2) throw ContractError("kfold_split: k must be at least 2");
  if (k > examples.size())
    throw ContractError("kfold_split: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(examples.size()) + " examples");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = substream(seed, "folds");
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> fold_of(examples.size());
  const std::size_t base = examples.size() / k, extra = examples.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t n = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) fold_of[order[pos++]] = f;
  }

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& ex = examples[order[i]];
      (fold_of[order[i]] == f ? folds[f].valid : folds[f].train).push_back(ex);
    }
  return folds;
}

// Tokenized-corpus cache: `id \t ids \t p_e1 \t p_e2 \t label_id` per line.
inline void write_cache(std::ostream& out, const std::vector<TokenizedExample>& examples) {
  for (const auto& ex : examples) {
    out << ex.id << '\t';
    for (std::size_t i = 0; i < ex.token_ids.size(); ++i)
      out << (i ? " " : "") << ex.token_ids[i];
    out << '\t' << ex.p_e1 << '\t' << ex.p_e2 << '\t' << ex.label << '\n';
  }
}

inline void write_cache(const std::string& path, const std::vector<TokenizedExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cache", path);
  write_cache(out, examples);
}

inline std::vector<TokenizedExample> read_cache(std::istream& in, std::size_t vocab_size,
                                                const std::string& source = {}) {
  std::vector<TokenizedExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 5) throw FormatError("expected 5 tab-separated fields", source, lineno);
    TokenizedExample ex;
    try {
      ex.id = std::stol(fields[0]);
      std::istringstream ids(fields[1]);
      for (std::size_t t; ids >> t;) ex.token_ids.push_back(t);
      ex.p_e1 = std::stoul(fields[2]);
      ex.p_e2 = std::stoul(fields[3]);
      ex.label = std::stoul(fields[4]);
    } catch (const std::exception&) {
      throw FormatError("malformed cache record", source, lineno);
    }
    const auto n = ex.token_ids.size();
    if (ex.p_e1 >= n || ex.p_e2 >= n || ex.p_e1 == ex.p_e2 || ex.label >= LabelSet::kLabels)
      throw FormatError("inconsistent cache record", source, lineno);
    for (auto t : ex.token_ids)
      if (t >= vocab_size) throw FormatError("token id outside vocabulary", source, lineno);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<TokenizedExample> read_cache(const std::string& path, std::size_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read cache", path);
  return read_cache(in, vocab_size, path);
}

}  // namespace rrgru
