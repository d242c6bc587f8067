#pragma once

// Binary array container used for model checkpoints and preprocessed
// embeddings.
//
//   magic "RRGRUARR" | u32 version | u64 header length | header text
//   u64 array count | per array: u64 name length, name, u64 rows, u64 cols,
//   rows*cols IEEE-754 doubles
//
// All integers and doubles are little-endian. The header is `key=value`
// lines describing the contents (config, vocabulary hash, seed).

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rrgru/autodiff.hpp"
#include "rrgru/corpus.hpp"
#include "rrgru/error.hpp"
#include "rrgru/net.hpp"

namespace rrgru {

using Metadata = std::map<std::string, std::string>;

struct ArrayFile {
  Metadata meta;
  std::vector<NamedParam> arrays;
};

namespace detail {

inline constexpr char kArrayMagic[8] = {'R', 'R', 'G', 'R', 'U', 'A', 'R', 'R'};
inline constexpr std::uint32_t kArrayVersion = 1;

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("truncated file", path);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& path) {
  if (n > (1ULL << 32)) throw CheckpointError("implausible record length", path);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("truncated file", path);
  return s;
}

}  // namespace detail

inline void write_arrays(std::ostream& out, const ArrayFile& f) {
  out.write(detail::kArrayMagic, 8);
  const std::uint32_t ver = detail::kArrayVersion;
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((ver >> (8 * i)) & 0xff));
  std::string header;
  for (const auto& [k, v] : f.meta) header += k + "=" + v + "\n";
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_u64(out, f.arrays.size());
  for (const auto& a : f.arrays) {
    detail::put_u64(out, a.name.size());
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    detail::put_u64(out, a.value.rows());
    detail::put_u64(out, a.value.cols());
    for (double x : a.value.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
}

inline void write_arrays(const std::string& path, const ArrayFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write", path);
  write_arrays(out, f);
  if (!out) throw DataError("write failed", path);
}

inline ArrayFile read_arrays(std::istream& in, const std::string& path = {}) {
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != std::string(detail::kArrayMagic, 8))
    throw CheckpointError("not an array container (bad magic)", path);
  unsigned char vb[4];
  if (!in.read(reinterpret_cast<char*>(vb), 4)) throw CheckpointError("truncated file", path);
  const std::uint32_t ver = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (std::uint32_t(vb[3]) << 24);
  if (ver != detail::kArrayVersion)
    throw CheckpointError("unsupported container version " + std::to_string(ver), path);

  ArrayFile f;
  std::istringstream header(detail::get_bytes(in, detail::get_u64(in, path), path));
  for (std::string line; std::getline(header, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("bad header line '" + line + "'", path);
    f.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = detail::get_u64(in, path);
  for (std::uint64_t a = 0; a < count; ++a) {
    std::string name = detail::get_bytes(in, detail::get_u64(in, path), path);
    const auto rows = detail::get_u64(in, path), cols = detail::get_u64(in, path);
    if (rows * cols > (1ULL << 32)) throw CheckpointError("implausible shape for " + name, path);
    std::vector<double> data(rows * cols);
    for (double& x : data) x = std::bit_cast<double>(detail::get_u64(in, path));
    f.arrays.push_back({std::move(name), Value::leaf({rows, cols}, std::move(data))});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes", path);
  return f;
}

inline ArrayFile read_arrays(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open", path);
  return read_arrays(in, path);
}

// ---------------------------------------------------------------- model

inline Metadata model_metadata(const ModelConfig& cfg) {
  return {{"d_e", std::to_string(cfg.d_e)},
          {"d_h", std::to_string(cfg.d_h)},
          {"k", std::to_string(cfg.k)},
          {"variant", to_string(cfg.variant)},
          {"n_directional", std::to_string(cfg.n_directional)}};
}

struct Checkpoint {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
  Metadata meta;  // everything in the header, including the keys above
  ModelParams params;
};

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ModelParams& params, std::uint64_t vocab_hash,
                            Metadata extra = {}) {
  ArrayFile f;
  f.meta = std::move(extra);
  for (auto& [k, v] : model_metadata(cfg)) f.meta[k] = v;
  f.meta["format"] = "rrgru-checkpoint";
  f.meta["vocab_size"] = std::to_string(params.vocab_size());
  f.meta["vocab_hash"] = std::to_string(vocab_hash);
  f.arrays = params.named();
  write_arrays(path, f);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  ArrayFile f = read_arrays(path);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = f.meta.find(key);
    if (it == f.meta.end()) throw CheckpointError("header lacks '" + key + "'", path);
    return it->second;
  };
  if (need("format") != "rrgru-checkpoint") throw CheckpointError("not a model checkpoint", path);
  Checkpoint ck;
  try {
    ck.config.d_e = std::stoul(need("d_e"));
    ck.config.d_h = std::stoul(need("d_h"));
    ck.config.k = std::stoul(need("k"));
    ck.config.n_directional = std::stoul(need("n_directional"));
    ck.vocab_hash = std::stoull(need("vocab_hash"));
  } catch (const std::invalid_argument&) {
    throw CheckpointError("malformed numeric header field", path);
  }
  try {
    ck.config.variant = parse_variant(need("variant"));
    ck.config.validate();
    ck.params = ModelParams::bind(ck.config, std::stoul(need("vocab_size")), f.arrays);
  } catch (const ShapeError& e) {
    throw CheckpointError(e.what(), path);
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what(), path);
  }
  ck.meta = std::move(f.meta);
  return ck;
}

// Preprocessed embedding matrix.
inline void save_embeddings(const std::string& path, const EmbeddingMatrix& m,
                            std::uint64_t vocab_hash, Metadata extra = {}) {
  ArrayFile f;
  f.meta = std::move(extra);
  f.meta["format"] = "rrgru-embeddings";
  f.meta["vocab_hash"] = std::to_string(vocab_hash);
  f.meta["covered"] = std::to_string(m.covered);
  f.arrays.push_back({"embeddings", Value::leaf({m.dim, m.vocab_size}, m.data)});
  write_arrays(path, f);
}

inline EmbeddingMatrix load_embedding_matrix(const std::string& path, std::uint64_t vocab_hash) {
  ArrayFile f = read_arrays(path);
  if (f.meta["format"] != "rrgru-embeddings" || f.arrays.size() != 1)
    throw CheckpointError("not an embeddings file", path);
  if (f.meta["vocab_hash"] != std::to_string(vocab_hash))
    throw CheckpointError("embeddings were built for vocabulary " + f.meta["vocab_hash"] +
                              ", current vocabulary is " + std::to_string(vocab_hash),
                          path);
  const auto& a = f.arrays[0].value;
  EmbeddingMatrix m{a.rows(), a.cols(), {a.data().begin(), a.data().end()}};
  m.covered = std::stoul(f.meta["covered"]);
  return m;
}

}  // namespace rrgru
