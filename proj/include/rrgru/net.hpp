#pragma once

// Multiple range-restricted bidirectional GRUs with attention.
//
// Three bidirectional GRU layers read the embedded sentence, each restricted
// to its own inclusive token range: a window of +-k around e1, the same
// around e2, and the span between the two nominals. The e1/e2 layers
// contribute the forward+backward hidden state at the nominal position; the
// relation layer contributes attention-pooled states, pooled separately per
// direction and summed. The concatenation is scored against one class
// embedding per directional label.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rrgru/autodiff.hpp"
#include "rrgru/corpus.hpp"
#include "rrgru/dropout.hpp"
#include "rrgru/labels.hpp"

namespace rrgru {

enum class Variant { full, relation_only, nominals_only, att_bgru };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::relation_only: return "relation_only";
    case Variant::nominals_only: return "nominals_only";
    case Variant::att_bgru: return "att_bgru";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::full, Variant::relation_only, Variant::nominals_only, Variant::att_bgru})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "' (full|relation_only|nominals_only|att_bgru)");
}

struct ModelConfig {
  std::size_t d_e = 100;
  std::size_t d_h = 100;
  std::size_t k = 3;
  Variant variant = Variant::full;
  std::size_t n_directional = LabelSet::kDirectional;

  bool uses_nominals() const {
    return variant == Variant::full || variant == Variant::nominals_only;
  }
  bool uses_relation() const { return variant != Variant::nominals_only; }

  std::size_t final_dim() const {
    switch (variant) {
      case Variant::full: return 3 * d_h;
      case Variant::nominals_only: return 2 * d_h;
      default: return d_h;
    }
  }

  void validate() const {
    if (d_e == 0 || d_h == 0) throw ConfigError("d_e and d_h must be positive");
    if (n_directional != LabelSet::kDirectional)
      throw ConfigError("classifier must have " + std::to_string(LabelSet::kDirectional) + " rows");
  }
};

// ------------------------------------------------------------------ ranges

struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const { return hi - lo + 1; }
  bool contains(std::size_t i) const { return lo <= i && i <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct RangeSet {
  Range e1;
  Range e2;
  Range rel;

  friend bool operator==(const RangeSet&, const RangeSet&) = default;
};

inline Range nominal_window(std::size_t p, std::size_t k, std::size_t n) {
  return {p > k ? p - k : 0, std::min(n - 1, p + k)};
}

inline RangeSet compute_ranges(const TokenizedExample& ex, const ModelConfig& cfg) {
  const std::size_t n = ex.length();
  if (ex.p_e1 >= n || ex.p_e2 >= n)
    throw ContractError("nominal position outside sentence of length " + std::to_string(n));
  return {nominal_window(ex.p_e1, cfg.k, n), nominal_window(ex.p_e2, cfg.k, n),
          {std::min(ex.p_e1, ex.p_e2), std::max(ex.p_e1, ex.p_e2)}};
}

// ------------------------------------------------------------------ params

struct GRUParams {
  Value W_r, U_r, W_z, U_z, W, U;
};

struct BiGRUParams {
  GRUParams fwd;
  GRUParams bwd;
};

// Name and shape of every trainable array, in canonical order.
inline std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& cfg,
                                                                std::size_t vocab_size) {
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embeddings", Shape{cfg.d_e, vocab_size});
  auto gru = [&](const std::string& layer) {
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = "gru." + layer + "." + dir + ".";
      out.emplace_back(p + "W_r", Shape{cfg.d_h, cfg.d_e});
      out.emplace_back(p + "U_r", Shape{cfg.d_h, cfg.d_h});
      out.emplace_back(p + "W_z", Shape{cfg.d_h, cfg.d_e});
      out.emplace_back(p + "U_z", Shape{cfg.d_h, cfg.d_h});
      out.emplace_back(p + "W", Shape{cfg.d_h, cfg.d_e});
      out.emplace_back(p + "U", Shape{cfg.d_h, cfg.d_h});
    }
  };
  if (cfg.uses_nominals()) {
    gru("e1");
    gru("e2");
  }
  if (cfg.uses_relation()) {
    gru("rel");
    out.emplace_back("w_att_fwd", Shape{1, cfg.d_h});
    out.emplace_back("w_att_bwd", Shape{1, cfg.d_h});
  }
  out.emplace_back("W_c", Shape{cfg.n_directional, cfg.final_dim()});
  out.emplace_back("b_c", Shape{cfg.n_directional, 1});
  return out;
}

struct ModelParams {
  Value embeddings;
  std::optional<BiGRUParams> e1, e2, rel;
  Value w_att_fwd, w_att_bwd;
  Value W_c, b_c;

  std::size_t vocab_size() const { return embeddings.cols(); }

  // Arrays in param_layout order.
  std::vector<NamedParam> named() const {
    std::vector<NamedParam> out{{"embeddings", embeddings}};
    auto gru = [&](const std::string& layer, const BiGRUParams& bi) {
      for (const auto& [dir, p] : {std::pair<const char*, const GRUParams*>{"fwd", &bi.fwd},
                                   std::pair<const char*, const GRUParams*>{"bwd", &bi.bwd}}) {
        const std::string pre = "gru." + layer + "." + dir + ".";
        out.push_back({pre + "W_r", p->W_r});
        out.push_back({pre + "U_r", p->U_r});
        out.push_back({pre + "W_z", p->W_z});
        out.push_back({pre + "U_z", p->U_z});
        out.push_back({pre + "W", p->W});
        out.push_back({pre + "U", p->U});
      }
    };
    if (e1) gru("e1", *e1);
    if (e2) gru("e2", *e2);
    if (rel) {
      gru("rel", *rel);
      out.push_back({"w_att_fwd", w_att_fwd});
      out.push_back({"w_att_bwd", w_att_bwd});
    }
    out.push_back({"W_c", W_c});
    out.push_back({"b_c", b_c});
    return out;
  }

  // Assembles params from named arrays, verifying names and shapes against
  // the layout for `cfg`.
  static ModelParams bind(const ModelConfig& cfg, std::size_t vocab_size,
                          const std::vector<NamedParam>& arrays) {
    const auto layout = param_layout(cfg, vocab_size);
    std::map<std::string, Value> by_name;
    for (const auto& a : arrays) by_name[a.name] = a.value;
    if (by_name.size() != layout.size())
      throw ShapeError("expected " + std::to_string(layout.size()) + " parameter arrays, got " +
                       std::to_string(by_name.size()));
    for (const auto& [name, shape] : layout) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ShapeError("missing parameter array '" + name + "'");
      if (it->second.shape() != shape)
        throw ShapeError("parameter '" + name + "' has shape " + it->second.shape().str() +
                         ", expected " + shape.str());
    }
    auto get = [&](const std::string& n) { return by_name.at(n); };
    auto gru = [&](const std::string& layer) {
      BiGRUParams bi;
      for (auto [dir, p] : {std::pair<const char*, GRUParams*>{"fwd", &bi.fwd},
                            std::pair<const char*, GRUParams*>{"bwd", &bi.bwd}}) {
        const std::string pre = "gru." + layer + "." + dir + ".";
        *p = {get(pre + "W_r"), get(pre + "U_r"), get(pre + "W_z"),
              get(pre + "U_z"), get(pre + "W"),   get(pre + "U")};
      }
      return bi;
    };
    ModelParams m;
    m.embeddings = get("embeddings");
    if (cfg.uses_nominals()) {
      m.e1 = gru("e1");
      m.e2 = gru("e2");
    }
    if (cfg.uses_relation()) {
      m.rel = gru("rel");
      m.w_att_fwd = get("w_att_fwd");
      m.w_att_bwd = get("w_att_bwd");
    }
    m.W_c = get("W_c");
    m.b_c = get("b_c");
    return m;
  }

  ModelParams clone(const ModelConfig& cfg) const {
    std::vector<NamedParam> copy;
    for (const auto& p : named()) copy.push_back({p.name, p.value.clone()});
    return bind(cfg, vocab_size(), copy);
  }
};

// Glorot-uniform matrices, uniform [-0.01, 0.01] attention vectors, zero
// bias. Embeddings are copied from `embeddings`.
inline ModelParams init_params(const ModelConfig& cfg, const EmbeddingMatrix& embeddings,
                               Rng& rng) {
  cfg.validate();
  if (embeddings.dim != cfg.d_e)
    throw ConfigError("embedding dimension " + std::to_string(embeddings.dim) +
                      " does not match d_e=" + std::to_string(cfg.d_e));
  std::vector<NamedParam> arrays;
  for (const auto& [name, shape] : param_layout(cfg, embeddings.vocab_size)) {
    std::vector<double> data(shape.size(), 0.0);
    if (name == "embeddings") {
      data = embeddings.data;
    } else if (name == "b_c") {
      // zero
    } else if (name.starts_with("w_att")) {
      std::uniform_real_distribution<double> u(-0.01, 0.01);
      for (double& x : data) x = u(rng);
    } else {
      const double a = std::sqrt(6.0 / double(shape.rows + shape.cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& x : data) x = u(rng);
    }
    arrays.push_back({name, Value::leaf(shape, std::move(data))});
  }
  return ModelParams::bind(cfg, embeddings.vocab_size, arrays);
}

// -------------------------------------------------------------- recurrence

enum class Direction { fwd, bwd };

// Runs a GRU over `inputs` (embedded columns in ascending position order),
// starting from a zero state at the entry end. Returns hidden states in
// ascending position order.
inline std::vector<Value> gru_run(Graph& g, std::span<const Value> inputs, const GRUParams& p,
                                  Direction dir) {
  if (inputs.empty()) throw ContractError("gru_run: empty range");
  const std::size_t d_h = p.U.rows();
  std::vector<Value> hidden(inputs.size());
  Value h = Value::zeros({d_h, 1});
  const std::size_t n = inputs.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = dir == Direction::fwd ? step : n - 1 - step;
    const Value& e = inputs[t];
    Value r = sigmoid(g, add(g, matmul(g, p.W_r, e), matmul(g, p.U_r, h)));
    Value z = sigmoid(g, add(g, matmul(g, p.W_z, e), matmul(g, p.U_z, h)));
    Value cand = tanh(g, add(g, matmul(g, p.W, e), matmul(g, p.U, mul(g, r, h))));
    h = add(g, mul(g, z, h), mul(g, one_minus(g, z), cand));
    hidden[t] = h;
  }
  return hidden;
}

// v_en = forward + backward hidden state at the nominal position.
inline Value nominal_vector(Graph& g, const Value& fwd_at_p, const Value& bwd_at_p) {
  return add(g, fwd_at_p, bwd_at_p);
}

struct AttentionResult {
  Value pooled;  // d_h x 1
  Value alpha;   // 1 x T
};

// alpha = softmax(w_att tanh(H)), pooled = H alpha^T, with H the d_h x T
// matrix whose columns are `states`.
inline AttentionResult attention_pool(Graph& g, std::span<const Value> states,
                                      const Value& w_att) {
  if (states.empty()) throw ContractError("attention_pool: no states");
  Value H = hstack(g, states);
  if (w_att.shape() != Shape{1, H.rows()})
    throw ShapeError("attention vector " + w_att.shape().str() + " vs hidden size " +
                     std::to_string(H.rows()));
  Value alpha = softmax_rowvec(g, matmul(g, w_att, tanh(g, H)));
  return {matmul(g, H, transpose(g, alpha)), alpha};
}

// --------------------------------------------------------------- forward

struct LayerStates {
  Range range;
  std::vector<Value> fwd;  // indexed by position - range.lo
  std::vector<Value> bwd;

  const Value& at(Direction d, std::size_t pos) const {
    return (d == Direction::fwd ? fwd : bwd).at(pos - range.lo);
  }
};

struct ForwardTrace {
  RangeSet ranges;
  std::optional<LayerStates> e1, e2, rel;
  Value alpha_fwd, alpha_bwd;
  Value v_e1, v_e2, v_rel;
  Value v_fin;
  Value s_c;
};

namespace detail {

inline void check_model(const ModelParams& p, const ModelConfig& cfg) {
  if (p.embeddings.rows() != cfg.d_e)
    throw ShapeError("embeddings have " + std::to_string(p.embeddings.rows()) +
                     " rows, config says d_e=" + std::to_string(cfg.d_e));
  if (p.W_c.shape() != Shape{cfg.n_directional, cfg.final_dim()})
    throw ShapeError("W_c is " + p.W_c.shape().str() + " but variant " + to_string(cfg.variant) +
                     " needs " + Shape{cfg.n_directional, cfg.final_dim()}.str());
  if (cfg.uses_nominals() && !(p.e1 && p.e2))
    throw ShapeError("variant " + to_string(cfg.variant) + " needs e1/e2 GRU parameters");
  if (cfg.uses_relation() && !p.rel)
    throw ShapeError("variant " + to_string(cfg.variant) + " needs relation GRU parameters");
}

inline std::vector<Value> dropped(Graph& g, std::span<const Value> xs, const DropoutSpec& d) {
  std::vector<Value> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(apply_dropout(g, x, d.rates.hidden, d.mode, d.rng));
  return out;
}

}  // namespace detail

inline ForwardTrace forward(Graph& g, const TokenizedExample& ex, const ModelParams& params,
                            const ModelConfig& cfg,
                            const DropoutSpec& dropout = DropoutSpec::inference()) {
  detail::check_model(params, cfg);
  const std::size_t n = ex.length();
  for (auto t : ex.token_ids)
    if (t >= params.vocab_size())
      throw ContractError("token id " + std::to_string(t) + " outside vocabulary of size " +
                          std::to_string(params.vocab_size()));

  ForwardTrace tr;
  tr.ranges = compute_ranges(ex, cfg);
  const Range whole{0, n - 1};
  const Range rel_range = cfg.variant == Variant::att_bgru ? whole : tr.ranges.rel;

  // e_t = W_e w_t, embedded once per position actually read by some layer.
  std::vector<bool> needed(n, false);
  auto mark = [&](Range r) {
    for (std::size_t i = r.lo; i <= r.hi; ++i) needed[i] = true;
  };
  if (cfg.uses_nominals()) {
    mark(tr.ranges.e1);
    mark(tr.ranges.e2);
  }
  if (cfg.uses_relation()) mark(rel_range);
  std::vector<Value> embedded(n);
  for (std::size_t i = 0; i < n; ++i)
    if (needed[i])
      embedded[i] = apply_dropout(g, column(g, params.embeddings, ex.token_ids[i]),
                                  dropout.rates.embed, dropout.mode, dropout.rng);

  auto run_layer = [&](const BiGRUParams& bi, Range r) {
    std::span<const Value> in(embedded.begin() + r.lo, r.size());
    return LayerStates{r, gru_run(g, in, bi.fwd, Direction::fwd),
                       gru_run(g, in, bi.bwd, Direction::bwd)};
  };
  auto nominal = [&](const LayerStates& s, std::size_t p) {
    Value f = apply_dropout(g, s.at(Direction::fwd, p), dropout.rates.hidden, dropout.mode,
                            dropout.rng);
    Value b = apply_dropout(g, s.at(Direction::bwd, p), dropout.rates.hidden, dropout.mode,
                            dropout.rng);
    return nominal_vector(g, f, b);
  };

  if (cfg.uses_nominals()) {
    tr.e1 = run_layer(*params.e1, tr.ranges.e1);
    tr.e2 = run_layer(*params.e2, tr.ranges.e2);
    tr.v_e1 = nominal(*tr.e1, ex.p_e1);
    tr.v_e2 = nominal(*tr.e2, ex.p_e2);
  }
  if (cfg.uses_relation()) {
    tr.rel = run_layer(*params.rel, rel_range);
    auto f = attention_pool(g, detail::dropped(g, tr.rel->fwd, dropout), params.w_att_fwd);
    auto b = attention_pool(g, detail::dropped(g, tr.rel->bwd, dropout), params.w_att_bwd);
    tr.alpha_fwd = f.alpha;
    tr.alpha_bwd = b.alpha;
    tr.v_rel = add(g, f.pooled, b.pooled);
  }

  switch (cfg.variant) {
    case Variant::full: tr.v_fin = concat(g, {tr.v_e1, tr.v_rel, tr.v_e2}); break;
    case Variant::nominals_only: tr.v_fin = concat(g, {tr.v_e1, tr.v_e2}); break;
    case Variant::relation_only:
    case Variant::att_bgru: tr.v_fin = tr.v_rel; break;
  }
  Value fin = apply_dropout(g, tr.v_fin, dropout.rates.final, dropout.mode, dropout.rng);
  tr.s_c = add(g, matmul(g, params.W_c, fin), params.b_c);
  return tr;
}

// Class scores in inference mode.
inline std::vector<double> score(const TokenizedExample& ex, const ModelParams& params,
                                 const ModelConfig& cfg) {
  Graph g;
  auto tr = forward(g, ex, params, cfg);
  return {tr.s_c.data().begin(), tr.s_c.data().end()};
}

// Argmax over the directional scores (lowest index on ties), or Other when
// every score is negative.
inline LabelId predict(std::span<const double> s_c) {
  if (s_c.size() != LabelSet::kDirectional)
    throw ShapeError("predict: expected " + std::to_string(LabelSet::kDirectional) +
                     " scores, got " + std::to_string(s_c.size()));
  const auto best = std::max_element(s_c.begin(), s_c.end());
  if (*best < 0.0) return LabelSet::kOther;
  return static_cast<LabelId>(best - s_c.begin());
}

}  // namespace rrgru
