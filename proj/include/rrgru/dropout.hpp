#pragma once

#include <random>

#include "rrgru/autodiff.hpp"
#include "rrgru/rng.hpp"

namespace rrgru {

enum class Mode { train, infer };

// Inverted dropout: in train mode each entry is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate). Identity in infer mode or
// when rate is 0.
inline Value apply_dropout(Graph& g, const Value& v, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must be in [0,1)");
  if (mode == Mode::infer || rate == 0.0) return v;
  if (rng == nullptr) throw ContractError("train-mode dropout needs a generator");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(v.size());
  for (double& m : mask) m = keep(*rng) ? scale : 0.0;
  return mul(g, v, Value::leaf(v.shape(), std::move(mask)));
}

struct DropoutRates {
  double embed = 0.0;
  double hidden = 0.0;
  double final = 0.0;
};

// Everything a forward pass needs to know about dropout.
struct DropoutSpec {
  DropoutRates rates;
  Mode mode = Mode::infer;
  Rng* rng = nullptr;

  static DropoutSpec inference() { return {}; }
};

}  // namespace rrgru
