#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "pipeline.hpp"

namespace {

using namespace rrgru;

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("RRGRU_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
  spdlog::set_default_logger(spdlog::default_logger());
}

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

// --config plus one flag per RunConfig key.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value configuration file");
    for (const auto& f : RunConfig::fields())
      app->add_option("--" + dashed(f.key), values[f.key], f.key);
  }

  bool given(CLI::App* app, const std::string& key) const {
    return app->count("--" + dashed(key)) > 0;
  }

  RunConfig resolve(CLI::App* app) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& f : RunConfig::fields())
      if (given(app, f.key)) cfg.set(f.key, values.at(f.key));
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Relation classification with range-restricted bidirectional GRUs"};
  app.require_subcommand(1);

  ConfigFlags flags;
  auto* preprocess = app.add_subcommand("preprocess", "tokenize data, build vocabulary and embeddings");
  auto* train = app.add_subcommand("train", "train a model and save the best checkpoint");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on --test-file");
  auto* predict = app.add_subcommand("predict", "write scorer-format predictions for --test-file");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check on a tiny model");
  for (auto* sub : {preprocess, train, eval, predict, gradcheck}) flags.attach(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kConfigFailure;
  }

  try {
    if (preprocess->parsed()) {
      cli::cmd_preprocess(flags.resolve(preprocess));
    } else if (train->parsed()) {
      cli::cmd_train(flags.resolve(train));
    } else if (eval->parsed()) {
      const auto r = cli::cmd_eval(flags.resolve(eval));
      std::cout << "examples\t" << r.total << "\naccuracy\t" << r.accuracy << "\nmacro_f1\t"
                << r.macro_f1 << '\n';
    } else if (predict->parsed()) {
      const auto cfg = flags.resolve(predict);
      const auto n = cli::cmd_predict(cfg);
      spdlog::info("wrote {} predictions to {}", n, cli::Artifacts{cfg.out_dir}.predictions().string());
    } else if (gradcheck->parsed()) {
      const auto cfg = flags.resolve(gradcheck);
      std::vector<Variant> variants{Variant::full, Variant::relation_only, Variant::nominals_only,
                                    Variant::att_bgru};
      if (flags.given(gradcheck, "variant")) variants = {cfg.model.variant};
      bool ok = true;
      for (const auto& s : cli::cmd_gradcheck(cfg, variants)) {
        std::cout << to_string(s.variant) << "\t" << (s.report.passed() ? "PASS" : "FAIL")
                  << "\tmax_rel_err=" << s.report.max_rel_error() << '\n';
        for (const auto& name : s.report.failures()) std::cout << "  failed: " << name << '\n';
        ok = ok && s.report.passed();
      }
      return ok ? cli::kOk : cli::kCheckFailed;
    }
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return cli::kConfigFailure;
  } catch (const NumericError& e) {
    spdlog::error("numeric: {}", e.what());
    return cli::kNumericFailure;
  } catch (const Error& e) {
    spdlog::error("data: {}", e.what());
    return cli::kDataFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("data: {}", e.what());
    return cli::kDataFailure;
  }
  return cli::kOk;
}
