#pragma once

// The rrgru command implementations, shared by the CLI and its tests.

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rrgru/checkpoint.hpp"
#include "rrgru/config.hpp"
#include "rrgru/corpus.hpp"
#include "rrgru/eval.hpp"
#include "rrgru/model_check.hpp"
#include "rrgru/net.hpp"
#include "rrgru/train.hpp"

namespace rrgru::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigFailure = 2,
  kDataFailure = 3,
  kNumericFailure = 4,
};

struct Artifacts {
  fs::path dir;
  fs::path train_cache() const { return dir / "train.cache"; }
  fs::path test_cache() const { return dir / "test.cache"; }
  fs::path vocab() const { return dir / "vocab.txt"; }
  fs::path embeddings() const { return dir / "embeddings.bin"; }
  fs::path coverage() const { return dir / "coverage.txt"; }
  fs::path preprocess_config() const { return dir / "preprocess.cfg"; }
  fs::path default_checkpoint() const { return dir / "model.ckpt"; }
  fs::path train_log() const { return dir / "train.log"; }
  fs::path predictions() const { return dir / "predictions.txt"; }
  fs::path answer_key() const { return dir / "answer_key.txt"; }
  fs::path metrics_tsv() const { return dir / "metrics.tsv"; }
  fs::path metrics_kv() const { return dir / "metrics.kv"; }
};

inline fs::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? Artifacts{cfg.out_dir}.default_checkpoint()
                                : fs::path(cfg.checkpoint);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write", path.string());
  out << text;
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " not set");
  if (!fs::exists(path)) throw DataError(what + " not found", path);
}

// Tokenizes the training (and optional test) file, builds the vocabulary
// from training tokens only, and writes the embedding matrix.
inline void cmd_preprocess(const RunConfig& cfg) {
  cfg.validate();
  require_file(cfg.train_file, "train_file");
  if (!cfg.test_file.empty()) require_file(cfg.test_file, "test_file");
  if (!cfg.embeddings.empty()) require_file(cfg.embeddings, "embeddings");
  const Artifacts art{cfg.out_dir};
  fs::create_directories(art.dir);

  Vocabulary vocab;
  std::vector<TokenizedExample> train;
  for (const auto& raw : parse_semeval(cfg.train_file)) train.push_back(tokenize(raw, vocab, false));
  spdlog::info("train: {} sentences, vocabulary {}", train.size(), vocab.size());
  write_cache(art.train_cache().string(), train);
  if (!cfg.test_file.empty()) {
    std::vector<TokenizedExample> test;
    for (const auto& raw : parse_semeval(cfg.test_file)) test.push_back(tokenize(raw, vocab));
    spdlog::info("test: {} sentences", test.size());
    write_cache(art.test_cache().string(), test);
  }
  vocab.save(art.vocab().string());

  EmbeddingMatrix emb = cfg.embeddings.empty()
                            ? random_embeddings(cfg.model.d_e, vocab.size(), cfg.seed)
                            : load_embeddings(cfg.embeddings, vocab, cfg.seed);
  if (emb.dim != cfg.model.d_e)
    throw ConfigError("embeddings file has dimension " + std::to_string(emb.dim) +
                      ", config d_e=" + std::to_string(cfg.model.d_e));
  save_embeddings(art.embeddings().string(), emb, vocab.hash(), {{"seed", std::to_string(cfg.seed)}});
  std::ostringstream cov;
  cov << "vocab_size=" << vocab.size() << "\ncovered=" << emb.covered
      << "\ncoverage=" << emb.coverage() << "\nseed=" << cfg.seed << "\n";
  write_text(art.coverage(), cov.str());
  write_text(art.preprocess_config(), cfg.to_text(false));
  spdlog::info("embeddings: {} of {} tokens covered", emb.covered, vocab.size());
}

struct TrainOutcome {
  FitResult fit;
  fs::path checkpoint;
};

inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream* log_out = nullptr) {
  cfg.validate();
  const Artifacts art{cfg.out_dir};
  for (const auto& p : {art.vocab(), art.train_cache(), art.embeddings()})
    if (!fs::exists(p)) throw DataError("missing preprocess artifact (run preprocess first)", p.string());
  const Vocabulary vocab = Vocabulary::load(art.vocab().string());
  auto data = read_cache(art.train_cache().string(), vocab.size());
  if (cfg.train_limit && cfg.train_limit < data.size()) data.resize(cfg.train_limit);
  if (data.empty()) throw ContractError("no training examples");
  const EmbeddingMatrix emb = load_embedding_matrix(art.embeddings().string(), vocab.hash());

  std::vector<TokenizedExample> train = data, valid;
  if (cfg.cv_folds >= 2) {
    auto folds = kfold_split(data, cfg.cv_folds, cfg.seed);
    train = std::move(folds[cfg.cv_fold].train);
    valid = std::move(folds[cfg.cv_fold].valid);
  }
  spdlog::info("training {} on {} examples, validating on {}", to_string(cfg.model.variant),
               train.size(), valid.size());

  Rng init_rng = substream(cfg.seed, "init");
  ModelParams params = init_params(cfg.model, emb, init_rng);
  auto named = params.named();
  auto opt = AdaDeltaState::for_params(named, cfg.rho, cfg.eps, cfg.lr_scale);

  std::ofstream log_file(art.train_log(), std::ios::binary);
  if (!log_file) throw DataError("cannot write", art.train_log().string());
  log_file << "epoch\tmean_loss\ttrain_accuracy\tvalid_macro_f1\n";
  auto on_epoch = [&](const EpochLog& row) {
    std::ostringstream line;
    line.precision(6);
    line << row.epoch << '\t' << row.mean_loss << '\t' << row.train_accuracy << '\t';
    if (row.valid_f1) line << *row.valid_f1;
    else line << "NA";
    log_file << line.str() << '\n' << std::flush;
    if (log_out) *log_out << line.str() << '\n';
    spdlog::info("epoch {}: loss {:.4f} train acc {:.4f} valid F1 {}", row.epoch, row.mean_loss,
                 row.train_accuracy, row.valid_f1 ? std::to_string(*row.valid_f1) : "NA");
  };
  TrainOutcome out{fit(train, valid, std::move(params), cfg.model, cfg.train, cfg.loss,
                       std::move(opt), cfg.seed, on_epoch),
                   checkpoint_path(cfg)};

  Metadata meta;
  for (const auto& f : RunConfig::fields())
    if (!f.is_path) meta["config." + f.key] = f.get(cfg);
  meta["seed"] = std::to_string(cfg.seed);
  meta["best_epoch"] = std::to_string(out.fit.best_epoch);
  if (out.fit.best_valid_f1) {
    std::ostringstream s;
    s.precision(17);
    s << *out.fit.best_valid_f1;
    meta["best_valid_macro_f1"] = s.str();
  }
  if (out.checkpoint.has_parent_path()) fs::create_directories(out.checkpoint.parent_path());
  save_checkpoint(out.checkpoint.string(), cfg.model, out.fit.best, vocab.hash(), meta);
  spdlog::info("saved checkpoint {} (epoch {})", out.checkpoint.string(), out.fit.best_epoch);
  return out;
}

struct Loaded {
  Checkpoint ck;
  Vocabulary vocab;
  std::vector<TokenizedExample> data;
};

inline Loaded load_for_inference(const RunConfig& cfg) {
  const Artifacts art{cfg.out_dir};
  const auto ckpath = checkpoint_path(cfg);
  if (!fs::exists(ckpath)) throw DataError("checkpoint not found", ckpath.string());
  if (!fs::exists(art.vocab())) throw DataError("vocabulary not found", art.vocab().string());
  require_file(cfg.test_file, "test_file");
  Loaded l{load_checkpoint(ckpath.string()), Vocabulary::load(art.vocab().string()), {}};
  if (l.ck.vocab_hash != l.vocab.hash())
    throw DataError("vocabulary hash " + std::to_string(l.vocab.hash()) +
                        " does not match checkpoint vocabulary hash " +
                        std::to_string(l.ck.vocab_hash),
                    ckpath.string());
  for (const auto& raw : parse_semeval(cfg.test_file)) l.data.push_back(tokenize(raw, l.vocab));
  if (l.data.empty()) throw ContractError("dataset '" + cfg.test_file + "' has no examples");
  return l;
}

inline std::vector<PredictionRecord> records(const std::vector<TokenizedExample>& data,
                                             const std::vector<LabelId>& labels) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back({data[i].id, labels[i]});
  return out;
}

inline MetricReport cmd_eval(const RunConfig& cfg) {
  const auto l = load_for_inference(cfg);
  const Artifacts art{cfg.out_dir};
  const auto pred = predict_all(l.data, l.ck.params, l.ck.config);
  std::vector<LabelId> gold;
  for (const auto& ex : l.data) gold.push_back(ex.label);
  const auto report = macro_f1(gold, pred);

  fs::create_directories(art.dir);
  emit_scorer_file(records(l.data, pred), art.predictions().string());
  emit_scorer_file(records(l.data, gold), art.answer_key().string());
  std::ostringstream tsv, kv;
  write_report_tsv(report, tsv);
  write_report_kv(report, kv);
  kv << "seed=" << l.ck.meta.at("seed") << '\n';
  write_text(art.metrics_tsv(), tsv.str());
  write_text(art.metrics_kv(), kv.str());
  return report;
}

inline std::size_t cmd_predict(const RunConfig& cfg) {
  const auto l = load_for_inference(cfg);
  const Artifacts art{cfg.out_dir};
  fs::create_directories(art.dir);
  emit_scorer_file(records(l.data, predict_all(l.data, l.ck.params, l.ck.config)),
                   art.predictions().string());
  return l.data.size();
}

struct GradCheckSummary {
  Variant variant;
  GradCheckReport report;
};

inline std::vector<GradCheckSummary> cmd_gradcheck(const RunConfig& cfg,
                                                   const std::vector<Variant>& variants) {
  std::vector<GradCheckSummary> out;
  for (auto v : variants) {
    ModelCheckSetup setup;
    setup.model.variant = v;
    setup.loss = cfg.loss;
    setup.l2_coeff = cfg.train.l2_coeff;
    setup.seed = cfg.seed;
    out.push_back({v, check_model_gradients(setup)});
  }
  return out;
}

}  // namespace rrgru::cli
