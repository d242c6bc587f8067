// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 5        run the listed criteria
//
// Exit status: 0 if nothing failed and something passed, 1 on any failure,
// 77 if every selected criterion was skipped.
//
// Criteria 7 and 8 need the SemEval-2010 Task 8 files:
//   RRGRU_SEMEVAL_TRAIN   TRAIN_FILE.TXT
//   RRGRU_SEMEVAL_TEST    TEST_FILE_FULL.TXT
//   RRGRU_GLOVE           glove.6B.100d.txt (optional for 7)
//   RRGRU_RUN_HEADLINE=1  opt in to criterion 8 (hours of CPU)
// Criterion 9 additionally runs the official perl scorer when
// RRGRU_OFFICIAL_SCORER points at it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include "oracles/reference_forward.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"

using namespace rrgru;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

const std::string kData = RRGRU_TEST_DATA;
const std::vector<Variant> kVariants{Variant::full, Variant::relation_only,
                                     Variant::nominals_only, Variant::att_bgru};

ModelParams perturbed_model(const ModelConfig& cfg, std::size_t vocab, Rng& rng) {
  auto p = init_params(cfg, random_embeddings(cfg.d_e, vocab, rng()), rng);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto [name, v] : p.named())
    if (name != "embeddings")
      for (double& x : v.data()) x += n(rng);
  return p;
}

TokenizedExample random_example(std::size_t n, std::size_t vocab, Rng& rng) {
  std::uniform_int_distribution<std::size_t> tok(0, vocab - 1), pos(0, n - 1);
  TokenizedExample ex;
  for (std::size_t i = 0; i < n; ++i) ex.token_ids.push_back(tok(rng));
  ex.p_e1 = pos(rng);
  do ex.p_e2 = pos(rng);
  while (ex.p_e2 == ex.p_e1);
  return ex;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  for (auto v : kVariants) {
    const auto tv = std::chrono::steady_clock::now();
    ModelCheckSetup s;  // d_e=8, d_h=6, N=7, k=1, dropout off
    s.model.variant = v;
    const auto r = check_model_gradients(s);
    if (seconds_since(tv) >= 30.0) ok = false;
    std::set<std::string> arrays;
    for (const auto& e : r.entries) arrays.insert(e.name);
    detail += to_string(v) + " max_rel=" + fmt(r.max_rel_error(), 3) + " (" +
              std::to_string(arrays.size()) + " arrays); ";
    if (!r.passed()) {
      ok = false;
      for (const auto& f : r.failures()) detail += "failed " + f + "; ";
    }
  }
  const double secs = seconds_since(t0);
  detail += fmt(secs, 3) + " s";
  return ok ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 2
Outcome masking_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = substream(2, "acceptance");
  std::uniform_int_distribution<std::size_t> len(3, 25), kdist(0, 4);
  const std::size_t vocab = 40;
  std::size_t mutated = 0;
  for (int pair = 0; pair < 200; ++pair) {
    const Variant v = kVariants[pair % 3];  // the range-restricted variants
    ModelConfig cfg{6, 5, kdist(rng), v};
    const auto params = perturbed_model(cfg, vocab, rng);
    auto ex = random_example(len(rng), vocab, rng);
    const auto r = compute_ranges(ex, cfg);
    const auto base = score(ex, params, cfg);
    std::uniform_int_distribution<std::size_t> tok(0, vocab - 1);
    for (std::size_t i = 0; i < ex.length(); ++i) {
      if (r.e1.contains(i) || r.e2.contains(i) || r.rel.contains(i)) continue;
      ex.token_ids[i] = tok(rng);
      ++mutated;
    }
    if (score(ex, params, cfg) != base)
      return fail("pair " + std::to_string(pair) + " (" + to_string(v) + ") changed s_c");
  }
  const double secs = seconds_since(t0);
  const std::string detail =
      "200 pairs, " + std::to_string(mutated) + " tokens mutated, " + fmt(secs, 3) + " s";
  return secs < 10.0 ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 3
Outcome attention_normalization() {
  Rng rng = substream(3, "acceptance");
  std::uniform_int_distribution<std::size_t> len(1, 30), dim(1, 12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 30.0);
  double worst = 0.0;
  for (int call = 0; call < 1000; ++call) {
    const std::size_t d = dim(rng), t = len(rng);
    const double s = scale(rng);
    std::vector<Value> hs;
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> h(d);
      for (double& x : h) x = s * n(rng);
      hs.push_back(Value::column(h));
    }
    std::vector<double> w(d);
    for (double& x : w) x = s * n(rng);
    Graph g;
    const auto r = attention_pool(g, hs, Value::leaf({1, d}, w));
    double total = 0.0;
    for (double a : r.alpha.data()) {
      if (!(a >= 0.0 && a <= 1.0)) return fail("alpha entry " + fmt(a) + " outside [0,1]");
      total += a;
    }
    worst = std::max(worst, std::abs(total - 1.0));
    if (std::abs(total - 1.0) > 1e-9) return fail("sum of alpha " + fmt(total, 17));
  }
  return pass("1000 calls, max |sum-1| = " + fmt(worst, 3));
}

// ------------------------------------------------------------------ 4
reference::Params to_reference(const ModelParams& p) {
  reference::Params out;
  for (const auto& [name, v] : p.named())
    out[name] = {v.rows(), v.cols(), {v.data().begin(), v.data().end()}};
  return out;
}

Outcome forward_oracle() {
  Rng rng = substream(4, "acceptance");
  std::uniform_int_distribution<std::size_t> len(2, 10);
  const std::size_t vocab = 25;
  double worst = 0.0;
  const reference::Variant ref[] = {reference::Variant::full, reference::Variant::relation_only,
                                    reference::Variant::nominals_only,
                                    reference::Variant::att_bgru};
  for (std::size_t vi = 0; vi < kVariants.size(); ++vi) {
    for (int i = 0; i < 20; ++i) {
      ModelConfig cfg{5, 4, std::size_t(i % 4), kVariants[vi]};
      const auto params = perturbed_model(cfg, vocab, rng);
      const auto ex = random_example(len(rng), vocab, rng);
      const auto got = score(ex, params, cfg);
      const auto want =
          reference::scores(to_reference(params), {ex.token_ids, ex.p_e1, ex.p_e2}, cfg.k, ref[vi]);
      for (std::size_t c = 0; c < got.size(); ++c) worst = std::max(worst, std::abs(got[c] - want[c]));
    }
  }
  const std::string detail = "20 examples x 4 variants, max |diff| = " + fmt(worst, 3);
  return worst <= 1e-10 ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 5
Outcome loss_values() {
  const LossConfig cfg;  // m+ 2.5, m- 0.5, gamma 2
  auto loss = [&](double gold, double comp) {
    std::vector<double> s(18, -50.0);
    s[0] = gold;
    s[1] = comp;
    Graph g;
    return ranking_loss(g, Value::column(s), 0, cfg).item();
  };
  const double point = loss(2.5, -0.5);
  if (std::abs(point - 2.0 * std::log(2.0)) > 1e-12) return fail("loss(2.5,-0.5) = " + fmt(point, 17));
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double g = -4.0 + 0.4 * i, c = -4.0 + 0.4 * j;
      const double here = loss(g, c);
      if (i + 1 < 20 && loss(g + 0.4, c) > here)
        return fail("not decreasing in gold score at (" + fmt(g) + "," + fmt(c) + ")");
      if (j + 1 < 20 && loss(g, c + 0.4) < here)
        return fail("not increasing in competitor score at (" + fmt(g) + "," + fmt(c) + ")");
    }
  }
  return pass("loss(2.5,-0.5) = " + fmt(point, 17) + " = 2 ln 2; 20x20 grid monotone");
}

// ------------------------------------------------------------------ 6
Outcome overfit_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  auto raw = parse_semeval(kData + "/smoke_train.txt");
  raw.resize(20);
  Vocabulary vocab;
  std::vector<TokenizedExample> data;
  for (const auto& r : raw) data.push_back(tokenize(r, vocab, false));
  RunConfig cfg;  // default hyperparameters
  cfg.train.epochs = 50;
  Rng init = substream(cfg.seed, "init");
  auto params = init_params(cfg.model, random_embeddings(cfg.model.d_e, vocab.size(), cfg.seed), init);
  auto named = params.named();
  auto opt = AdaDeltaState::for_params(named, cfg.rho, cfg.eps, cfg.lr_scale);
  std::size_t first_perfect = 0;
  auto result = fit(data, {}, std::move(params), cfg.model, cfg.train, cfg.loss, std::move(opt),
                    cfg.seed, [&](const EpochLog& row) {
                      if (!first_perfect && row.train_accuracy == 1.0) first_perfect = row.epoch;
                    });
  const double secs = seconds_since(t0);
  std::string detail = "final train accuracy " + fmt(result.log.back().train_accuracy) + ", ";
  detail += first_perfect ? "100% first at epoch " + std::to_string(first_perfect)
                          : std::string("100% never reached");
  detail += ", " + fmt(secs, 3) + " s";
  return first_perfect && secs < 120.0 ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 7
Outcome small_scale_learning() {
  const char* train_path = env("RRGRU_SEMEVAL_TRAIN");
  if (!train_path) return skip("RRGRU_SEMEVAL_TRAIN not set; official training data unavailable");
  auto raw = parse_semeval(train_path);
  if (raw.size() < 1200) return fail("training file has only " + std::to_string(raw.size()) + " sentences");
  Rng rng = substream(7, "subset");
  std::shuffle(raw.begin(), raw.end(), rng);
  Vocabulary vocab;
  std::vector<TokenizedExample> train, valid;
  for (std::size_t i = 0; i < 1000; ++i) train.push_back(tokenize(raw[i], vocab, false));
  for (std::size_t i = 1000; i < 1200; ++i) valid.push_back(tokenize(raw[i], vocab));
  RunConfig cfg;
  cfg.train.epochs = 30;
  const auto emb = env("RRGRU_GLOVE") ? load_embeddings(env("RRGRU_GLOVE"), vocab, cfg.seed)
                                      : random_embeddings(cfg.model.d_e, vocab.size(), cfg.seed);
  Rng init = substream(cfg.seed, "init");
  auto params = init_params(cfg.model, emb, init);
  auto named = params.named();
  auto opt = AdaDeltaState::for_params(named, cfg.rho, cfg.eps, cfg.lr_scale);
  auto r = fit(train, valid, std::move(params), cfg.model, cfg.train, cfg.loss, std::move(opt),
               cfg.seed);
  const double final_f1 = *r.log.back().valid_f1;
  const std::string detail = "valid macro-F1 after 30 epochs " + fmt(100 * final_f1) + "% (best " +
                             fmt(100 * *r.best_valid_f1) + "% at epoch " +
                             std::to_string(r.best_epoch) + "), embeddings " +
                             (env("RRGRU_GLOVE") ? "GloVe" : "random");
  return final_f1 >= 0.45 ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 8
Outcome headline_reproduction() {
  const char* train_path = env("RRGRU_SEMEVAL_TRAIN");
  const char* test_path = env("RRGRU_SEMEVAL_TEST");
  const char* glove = env("RRGRU_GLOVE");
  if (!train_path || !test_path || !glove)
    return skip("needs RRGRU_SEMEVAL_TRAIN, RRGRU_SEMEVAL_TEST and RRGRU_GLOVE; data unavailable");
  if (!env("RRGRU_RUN_HEADLINE")) return skip("set RRGRU_RUN_HEADLINE=1 to run (hours of CPU)");
  TempDir tmp;
  std::map<Variant, double> f1;
  for (auto v : kVariants) {
    RunConfig cfg;
    cfg.train_file = train_path;
    cfg.test_file = test_path;
    cfg.embeddings = glove;
    cfg.out_dir = (tmp.path() / to_string(v)).string();
    cfg.model.variant = v;
    if (const char* e = env("RRGRU_HEADLINE_EPOCHS")) cfg.set("epochs", e);
    cli::cmd_preprocess(cfg);
    cli::cmd_train(cfg);
    f1[v] = 100.0 * cli::cmd_eval(cfg).macro_f1;
    std::cout << "  " << to_string(v) << " test macro-F1 " << fmt(f1[v]) << "%\n" << std::flush;
  }
  const double full = f1[Variant::full];
  const bool band = std::abs(full - 84.3) <= 1.5;
  const bool order = full > f1[Variant::relation_only] &&
                     f1[Variant::relation_only] > f1[Variant::nominals_only] &&
                     full > f1[Variant::att_bgru];
  std::string detail = "full " + fmt(full) + "% (target 84.3 +/- 1.5), relation_only " +
                       fmt(f1[Variant::relation_only]) + "%, nominals_only " +
                       fmt(f1[Variant::nominals_only]) + "%, att_bgru " +
                       fmt(f1[Variant::att_bgru]) + "%";
  if (!order) detail += "; ablation order not reproduced";
  return band && order ? pass(detail) : fail(detail);
}

// ------------------------------------------------------------------ 9
std::optional<double> official_scorer(const std::string& script, const std::string& answer,
                                      const std::string& key) {
  const std::string cmd = "perl '" + script + "' '" + answer + "' '" + key + "' 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return std::nullopt;
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  std::smatch m;
  static const std::regex official(R"(official score.*macro-averaged F1 = ([0-9.]+)%)");
  if (!std::regex_search(out, m, official)) return std::nullopt;
  return std::stod(m[1]) / 100.0;
}

Outcome scorer_fidelity() {
  // Expected values computed by tests/oracles/official_scorer_oracle.py.
  const std::vector<std::pair<std::string, double>> fixtures{
      {"perfect.txt", 1.0},
      {"all_other.txt", 0.0},
      {"random.txt", 0.047758757824},
      {"flipped.txt", 0.557099187362},
      {"noisy.txt", 0.559448828757}};
  const std::string dir = kData + "/scorer/";
  const char* perl_scorer = env("RRGRU_OFFICIAL_SCORER");
  double worst = 0.0;
  for (const auto& [file, want] : fixtures) {
    const double got = score_files(dir + "key.txt", dir + file).macro_f1;
    double reference = want;
    if (perl_scorer) {
      auto official = official_scorer(perl_scorer, dir + file, dir + "key.txt");
      if (!official) return fail("could not read the official scorer's output for " + file);
      reference = *official;
    }
    worst = std::max(worst, std::abs(got - reference));
    if (std::abs(got - reference) > 0.01)
      return fail(file + ": internal " + fmt(got, 6) + " vs reference " + fmt(reference, 6));
  }
  return pass(std::string("5 fixtures, max |diff| = ") + fmt(worst, 3) + " against the " +
              (perl_scorer ? "official perl scorer" : "reimplemented scorer oracle"));
}

// ------------------------------------------------------------------ 10
Outcome determinism() {
  TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    RunConfig cfg;
    cfg.train_file = kData + "/smoke_train.txt";
    cfg.out_dir = dir->path().string();
    cfg.train.epochs = 3;
    cfg.cv_folds = 4;
    cfg.seed = 10;
    cli::cmd_preprocess(cfg);
    cli::cmd_train(cfg);
  }
  const auto x = read_file(a.file("model.ckpt")), y = read_file(b.file("model.ckpt"));
  if (x.empty()) return fail("no checkpoint written");
  return x == y ? pass("two runs, " + std::to_string(x.size()) + "-byte checkpoints identical")
                : fail("checkpoints differ");
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "masking invariance", masking_invariance},
      {3, "attention normalization", attention_normalization},
      {4, "forward oracle equivalence", forward_oracle},
      {5, "loss values", loss_values},
      {6, "overfit sanity", overfit_sanity},
      {7, "small-scale learning", small_scale_learning},
      {8, "headline reproduction", headline_reproduction},
      {9, "scorer fidelity", scorer_fidelity},
      {10, "determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::size_t passed = 0, failed = 0, skipped = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    (o.status == Status::pass ? passed : o.status == Status::fail ? failed : skipped)++;
    std::cout << "[" << tag << "] " << c.id << ". " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << passed << " passed, " << failed << " failed, " << skipped << " skipped\n";
  if (failed) return 1;
  return passed ? 0 : 77;
}
