#pragma once

// Finite-difference check of the whole model on a tiny synthetic problem.

#include <random>
#include <vector>

#include "rrgru/autodiff.hpp"
#include "rrgru/net.hpp"
#include "rrgru/train.hpp"

namespace rrgru {

struct ModelCheckSetup {
  ModelConfig model{8, 6, 1, Variant::full};
  std::size_t sentence_length = 7;
  std::size_t vocab_size = 12;
  std::size_t examples = 4;
  LossConfig loss;
  double l2_coeff = 1e-5;
  std::uint64_t seed = 7;
  double eps = 1e-5;
  double tol = 1e-4;
};

// Random sentences with nominals at distinct positions and a mix of gold
// labels, Other included.
inline std::vector<TokenizedExample> synthetic_examples(std::size_t count, std::size_t length,
                                                        std::size_t vocab_size, Rng& rng) {
  if (length < 2 || vocab_size < 1) throw ContractError("synthetic_examples: degenerate sizes");
  std::uniform_int_distribution<std::size_t> tok(0, vocab_size - 1), pos(0, length - 1),
      lab(0, LabelSet::kLabels - 1);
  std::vector<TokenizedExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    TokenizedExample ex;
    ex.id = static_cast<long>(i + 1);
    for (std::size_t t = 0; t < length; ++t) ex.token_ids.push_back(tok(rng));
    ex.p_e1 = pos(rng);
    do ex.p_e2 = pos(rng);
    while (ex.p_e2 == ex.p_e1);
    ex.label = i == 0 ? LabelSet::kOther : lab(rng);
    out.push_back(std::move(ex));
  }
  return out;
}

// Total loss (sum of ranking losses plus L2) of `examples`, dropout off.
inline Value total_loss(Graph& g, const std::vector<TokenizedExample>& examples,
                        const ModelParams& params, const ModelConfig& cfg, const LossConfig& loss,
                        double l2_coeff) {
  std::vector<Value> terms;
  for (const auto& ex : examples)
    terms.push_back(ranking_loss(g, forward(g, ex, params, cfg).s_c, ex.label, loss));
  terms.push_back(l2_penalty(g, params, l2_coeff));
  return add_scalars(g, terms);
}

inline GradCheckReport check_model_gradients(const ModelCheckSetup& s) {
  Rng rng = substream(s.seed, "gradcheck");
  const auto examples = synthetic_examples(s.examples, s.sentence_length, s.vocab_size, rng);
  ModelParams params =
      init_params(s.model, random_embeddings(s.model.d_e, s.vocab_size, s.seed), rng);
  // Non-zero bias so that class scores are not all tied at the start.
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double& b : params.b_c.data()) b = n01(rng);
  auto named = params.named();
  return grad_check(
      [&](Graph& g) { return total_loss(g, examples, params, s.model, s.loss, s.l2_coeff); },
      named, s.eps, s.tol);
}

}  // namespace rrgru
