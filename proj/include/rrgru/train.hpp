#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rrgru/autodiff.hpp"
#include "rrgru/dropout.hpp"
#include "rrgru/eval.hpp"
#include "rrgru/net.hpp"
#include "rrgru/rng.hpp"

namespace rrgru {

struct LossConfig {
  double m_plus = 2.5;
  double m_minus = 0.5;
  double gamma = 2.0;

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (m_plus < 0.0 || m_minus < 0.0) throw ConfigError("margins must be non-negative");
  }
};

// log(1 + exp(gamma (m+ - s_gold))) + log(1 + exp(gamma (m- + s_competitor)))
//
// The competitor is the best-scoring directional class other than the gold
// one. Other has no score row, so for Other examples the first term is
// dropped and the competitor is the best of all rows.
inline Value ranking_loss(Graph& g, const Value& s_c, LabelId gold, const LossConfig& cfg) {
  if (s_c.size() != LabelSet::kDirectional)
    throw ShapeError("ranking_loss: expected " + std::to_string(LabelSet::kDirectional) +
                     " scores, got " + s_c.shape().str());
  if (gold >= LabelSet::kLabels) throw LabelError("ranking_loss: invalid gold label");
  const auto s = s_c.data();
  std::size_t competitor = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == gold) continue;
    if (competitor == s.size() || s[i] > s[competitor]) competitor = i;
  }
  Value neg = softplus(g, affine(g, pick(g, s_c, competitor), cfg.gamma, cfg.gamma * cfg.m_minus));
  if (LabelSet::is_other(gold)) return neg;
  Value pos = softplus(g, affine(g, pick(g, s_c, gold), -cfg.gamma, cfg.gamma * cfg.m_plus));
  return add(g, pos, neg);
}

struct L2Scope {
  bool embeddings = false;
  bool bias = false;
};

// coeff * sum of squares over the GRU matrices, attention vectors and W_c
// (embeddings and b_c only when `scope` asks for them).
inline Value l2_penalty(Graph& g, const ModelParams& params, double coeff, L2Scope scope = {}) {
  if (coeff < 0.0) throw ContractError("l2 coefficient must be non-negative");
  std::vector<Value> terms;
  for (const auto& p : params.named()) {
    if (p.name == "embeddings" && !scope.embeddings) continue;
    if (p.name == "b_c" && !scope.bias) continue;
    terms.push_back(sum_squares(g, p.value));
  }
  if (terms.empty()) return Value::scalar(0.0);
  return affine(g, add_scalars(g, terms), coeff, 0.0);
}

struct AdaDeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  double lr_scale = 1.0;
  std::vector<std::vector<double>> sq_grad;   // E[g^2]
  std::vector<std::vector<double>> sq_delta;  // E[dx^2]

  static AdaDeltaState for_params(std::span<const NamedParam> params, double rho = 0.95,
                                  double eps = 1e-6, double lr_scale = 1.0) {
    AdaDeltaState s{rho, eps, lr_scale};
    for (const auto& p : params) {
      s.sq_grad.emplace_back(p.value.size(), 0.0);
      s.sq_delta.emplace_back(p.value.size(), 0.0);
    }
    return s;
  }
};

// One AdaDelta update of every parameter from its accumulated gradient,
// followed by zeroing the gradients. Nothing is modified if any gradient is
// non-finite.
inline void adadelta_step(std::span<NamedParam> params, AdaDeltaState& st) {
  if (st.sq_grad.size() != params.size())
    throw ContractError("optimizer state does not match parameter list");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (st.sq_grad[p].size() != params[p].value.size())
      throw ContractError("optimizer state shape differs for '" + params[p].name + "'");
    for (double gx : params[p].value.grad())
      if (!std::isfinite(gx)) throw NumericError("non-finite gradient in '" + params[p].name + "'");
  }
  const double rho = st.rho, eps = st.eps;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto x = params[p].value.data();
    auto grad = params[p].value.grad();
    auto& eg = st.sq_grad[p];
    auto& ed = st.sq_delta[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = grad[i];
      eg[i] = rho * eg[i] + (1.0 - rho) * gi * gi;
      const double dx = -(std::sqrt(ed[i] + eps) / std::sqrt(eg[i] + eps)) * gi;
      ed[i] = rho * ed[i] + (1.0 - rho) * dx * dx;
      x[i] += st.lr_scale * dx;
      grad[i] = 0.0;
    }
  }
}

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t epochs = 100;
  DropoutRates dropout{0.3, 0.3, 0.7};
  double l2_coeff = 1e-5;
  L2Scope l2_scope;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    for (double r : {dropout.embed, dropout.hidden, dropout.final})
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must be in [0,1)");
    if (l2_coeff < 0.0) throw ConfigError("l2_coeff must be non-negative");
  }
};

struct EpochReport {
  double mean_loss = 0.0;
  double accuracy = 0.0;  // of the dropout-perturbed training predictions
};

// One pass over `data` in seeded shuffled order, one optimizer step per
// batch. Batch loss is the sum of per-example ranking losses plus the L2
// penalty; the reported loss is the mean ranking loss per example.
inline EpochReport train_epoch(const std::vector<TokenizedExample>& data, ModelParams& params,
                               AdaDeltaState& opt, const ModelConfig& mcfg,
                               const TrainConfig& tcfg, const LossConfig& lcfg, Rng& shuffle_rng,
                               Rng& dropout_rng) {
  if (data.empty()) throw ContractError("train_epoch: no training data");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  auto named = params.named();
  for (auto& p : named) p.value.zero_grad();
  const DropoutSpec drop{tcfg.dropout, Mode::train, &dropout_rng};

  double total_loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
    for (std::size_t b = start; b < end; ++b) {
      const auto& ex = data[order[b]];
      Graph g;
      auto tr = forward(g, ex, params, mcfg, drop);
      Value loss = ranking_loss(g, tr.s_c, ex.label, lcfg);
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss on example " + std::to_string(ex.id) + " (batch " +
                           std::to_string(start / tcfg.batch_size) + ")");
      g.backward(loss);
      total_loss += loss.item();
      if (predict(tr.s_c.data()) == ex.label) ++correct;
    }
    if (tcfg.l2_coeff > 0.0) {
      Graph g;
      g.backward(l2_penalty(g, params, tcfg.l2_coeff, tcfg.l2_scope));
    }
    try {
      adadelta_step(named, opt);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at batch " +
                         std::to_string(start / tcfg.batch_size));
    }
  }
  return {total_loss / double(data.size()), double(correct) / double(data.size())};
}

inline std::vector<LabelId> predict_all(const std::vector<TokenizedExample>& data,
                                        const ModelParams& params, const ModelConfig& cfg) {
  std::vector<LabelId> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict(score(ex, params, cfg)));
  return out;
}

inline double accuracy(const std::vector<TokenizedExample>& data, const ModelParams& params,
                       const ModelConfig& cfg) {
  if (data.empty()) return 0.0;
  const auto pred = predict_all(data, params, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred[i] == data[i].label;
  return double(correct) / double(data.size());
}

inline MetricReport evaluate(const std::vector<TokenizedExample>& data, const ModelParams& params,
                             const ModelConfig& cfg) {
  if (data.empty()) throw ContractError("evaluate: empty dataset");
  std::vector<LabelId> gold;
  gold.reserve(data.size());
  for (const auto& ex : data) gold.push_back(ex.label);
  return macro_f1(gold, predict_all(data, params, cfg));
}

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // inference mode, after the epoch
  std::optional<double> valid_f1;
};

struct FitResult {
  ModelParams best;
  std::size_t best_epoch = 0;  // 0: the initial parameters
  std::optional<double> best_valid_f1;
  std::vector<EpochLog> log;
};

// Trains for tcfg.epochs epochs. With a validation set the parameters of
// the epoch with the highest validation macro-F1 are kept (earliest on
// ties); without one, the final parameters.
inline FitResult fit(const std::vector<TokenizedExample>& train,
                     const std::vector<TokenizedExample>& valid, ModelParams params,
                     const ModelConfig& mcfg, const TrainConfig& tcfg, const LossConfig& lcfg,
                     AdaDeltaState opt, std::uint64_t seed,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  mcfg.validate();
  tcfg.validate();
  lcfg.validate();
  Rng shuffle_rng = substream(seed, "shuffle");
  Rng dropout_rng = substream(seed, "dropout");

  FitResult result;
  result.best = params.clone(mcfg);
  if (!valid.empty()) result.best_valid_f1 = evaluate(valid, params, mcfg).macro_f1;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto rep = train_epoch(train, params, opt, mcfg, tcfg, lcfg, shuffle_rng, dropout_rng);
    EpochLog row{epoch, rep.mean_loss, accuracy(train, params, mcfg), std::nullopt};
    if (!valid.empty()) {
      row.valid_f1 = evaluate(valid, params, mcfg).macro_f1;
      if (*row.valid_f1 > *result.best_valid_f1) {
        result.best = params.clone(mcfg);
        result.best_epoch = epoch;
        result.best_valid_f1 = row.valid_f1;
      }
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  if (valid.empty()) {
    result.best = std::move(params);
    result.best_epoch = tcfg.epochs;
  }
  return result;
}

}  // namespace rrgru
