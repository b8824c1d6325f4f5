#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "fairneg/commands.hpp"
#include "fairneg/common.hpp"
#include "fairneg/run_config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "INI configuration file");
  cmd->add_option("--set", args.sets, "Override key=value (repeatable)");
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--seed", args.seed, "Seed override for this command");
}

fairneg::RunConfig build_config(const CommonArgs& args,
                                const std::string& seed_key) {
  std::vector<std::string> overrides = args.sets;
  if (args.seed >= 0 && !seed_key.empty()) {
    overrides.push_back(seed_key + "=" + std::to_string(args.seed));
  }
  if (args.config_path.empty()) {
    return fairneg::RunConfig::from_overrides(overrides);
  }
  return fairneg::RunConfig::load(args.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FairNeg: fairness-aware negative sampling for implicit-feedback recommenders"};
  app.require_subcommand(1);

  CommonArgs prepare_args, synth_args, train_args, evaluate_args, compare_args,
      sweep_args;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Ingest ratings + attributes, reindex, and split");
  add_common(prepare, prepare_args);
  CLI::App* synth =
      app.add_subcommand("synth", "Generate synthetic raw data files");
  add_common(synth, synth_args);
  CLI::App* train = app.add_subcommand("train", "Run bi-level training");
  add_common(train, train_args);
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  add_common(evaluate, evaluate_args);
  CLI::App* compare =
      app.add_subcommand("compare", "Consolidate runs against the UNS baseline");
  add_common(compare, compare_args);
  CLI::App* sweep =
      app.add_subcommand("sweep", "Grid-sweep gamma and/or beta");
  add_common(sweep, sweep_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      fairneg::cli::cmd_prepare(build_config(prepare_args, "split_seed"),
                                prepare_args.out);
    } else if (synth->parsed()) {
      fairneg::cli::cmd_synth(build_config(synth_args, "synth_seed"),
                              synth_args.out);
    } else if (train->parsed()) {
      fairneg::cli::cmd_train(build_config(train_args, "train_seed"),
                              train_args.out);
    } else if (evaluate->parsed()) {
      fairneg::cli::cmd_evaluate(build_config(evaluate_args, ""));
    } else if (compare->parsed()) {
      fairneg::cli::cmd_compare(build_config(compare_args, ""), compare_args.out);
    } else if (sweep->parsed()) {
      fairneg::cli::cmd_sweep(build_config(sweep_args, "train_seed"),
                              sweep_args.out);
    }
  } catch (const fairneg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fairneg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
