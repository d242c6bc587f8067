#pragma once

// Flat key=value run configuration. Keys are exactly the field names below;
// the same names (with '-' for '_') are accepted as command-line flags.

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "rrgru/error.hpp"
#include "rrgru/net.hpp"
#include "rrgru/train.hpp"

namespace rrgru {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  double rho = 0.95;
  double eps = 1e-6;
  double lr_scale = 1.0;
  std::uint64_t seed = 1;
  std::size_t cv_folds = 10;  // < 2 disables the validation split
  std::size_t cv_fold = 0;
  std::size_t train_limit = 0;  // 0 = all training examples

  std::string train_file;
  std::string test_file;
  std::string embeddings;
  std::string checkpoint;
  std::string out_dir = "out";

  struct Field {
    std::string key;
    bool is_path;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
  };

  static const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
      std::vector<Field> v;
      auto num = [&v](std::string key, auto member) {
        v.push_back({key, false,
                     [member](const RunConfig& c) { return fmt_num(member(const_cast<RunConfig&>(c))); },
                     [member, key](RunConfig& c, const std::string& s) {
                       parse_num(s, member(c), key);
                     }});
      };
      auto str = [&v](std::string key, std::string RunConfig::*m, bool is_path) {
        v.push_back({key, is_path, [m](const RunConfig& c) { return c.*m; },
                     [m](RunConfig& c, const std::string& s) { c.*m = s; }});
      };
      auto flag = [&v](std::string key, bool L2Scope::*m) {
        v.push_back({key, false,
                     [m](const RunConfig& c) { return std::string(c.train.l2_scope.*m ? "1" : "0"); },
                     [m, key](RunConfig& c, const std::string& s) {
                       if (s == "1" || s == "true") c.train.l2_scope.*m = true;
                       else if (s == "0" || s == "false") c.train.l2_scope.*m = false;
                       else throw ConfigError("'" + key + "' expects 0/1, got '" + s + "'");
                     }});
      };
      num("d_e", [](RunConfig& c) -> auto& { return c.model.d_e; });
      num("d_h", [](RunConfig& c) -> auto& { return c.model.d_h; });
      num("k", [](RunConfig& c) -> auto& { return c.model.k; });
      v.push_back({"variant", false, [](const RunConfig& c) { return to_string(c.model.variant); },
                   [](RunConfig& c, const std::string& s) { c.model.variant = parse_variant(s); }});
      num("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
      num("epochs", [](RunConfig& c) -> auto& { return c.train.epochs; });
      num("dropout_embed", [](RunConfig& c) -> auto& { return c.train.dropout.embed; });
      num("dropout_hidden", [](RunConfig& c) -> auto& { return c.train.dropout.hidden; });
      num("dropout_final", [](RunConfig& c) -> auto& { return c.train.dropout.final; });
      num("l2_coeff", [](RunConfig& c) -> auto& { return c.train.l2_coeff; });
      flag("l2_embeddings", &L2Scope::embeddings);
      flag("l2_bias", &L2Scope::bias);
      num("m_plus", [](RunConfig& c) -> auto& { return c.loss.m_plus; });
      num("m_minus", [](RunConfig& c) -> auto& { return c.loss.m_minus; });
      num("gamma", [](RunConfig& c) -> auto& { return c.loss.gamma; });
      num("rho", [](RunConfig& c) -> auto& { return c.rho; });
      num("eps", [](RunConfig& c) -> auto& { return c.eps; });
      num("lr_scale", [](RunConfig& c) -> auto& { return c.lr_scale; });
      num("seed", [](RunConfig& c) -> auto& { return c.seed; });
      num("cv_folds", [](RunConfig& c) -> auto& { return c.cv_folds; });
      num("cv_fold", [](RunConfig& c) -> auto& { return c.cv_fold; });
      num("train_limit", [](RunConfig& c) -> auto& { return c.train_limit; });
      str("train_file", &RunConfig::train_file, true);
      str("test_file", &RunConfig::test_file, true);
      str("embeddings", &RunConfig::embeddings, true);
      str("checkpoint", &RunConfig::checkpoint, true);
      str("out_dir", &RunConfig::out_dir, true);
      return v;
    }();
    return f;
  }

  void set(const std::string& key, const std::string& value) {
    for (const auto& f : fields())
      if (f.key == key) {
        f.set(*this, value);
        return;
      }
    throw ConfigError("unknown config key '" + key + "'");
  }

  std::string get(const std::string& key) const {
    for (const auto& f : fields())
      if (f.key == key) return f.get(*this);
    throw ConfigError("unknown config key '" + key + "'");
  }

  // key=value lines; '#' starts a comment.
  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      try {
        set(std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))));
      } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  std::string to_text(bool include_paths = true) const {
    std::string out;
    for (const auto& f : fields())
      if (include_paths || !f.is_path) out += f.key + "=" + f.get(*this) + "\n";
    return out;
  }

  void validate() const {
    model.validate();
    train.validate();
    loss.validate();
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must be in (0,1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (lr_scale < 0.0) throw ConfigError("lr_scale must be non-negative");
    if (cv_folds >= 2 && cv_fold >= cv_folds) throw ConfigError("cv_fold must be < cv_folds");
  }

 private:
  template <typename T>
  static std::string fmt_num(T x) {
    if constexpr (std::is_floating_point_v<T>) {
      std::ostringstream s;
      s.precision(17);
      s << x;
      return s.str();
    } else {
      return std::to_string(x);
    }
  }

  template <typename T>
  static void parse_num(const std::string& s, T& out, const std::string& key) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out = std::stod(s, &used);
      } else {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        out = static_cast<T>(std::stoull(s, &used));
      }
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
    }
  }
};

}  // namespace rrgru
