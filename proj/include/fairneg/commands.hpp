#pragma once

#include <map>
#include <string>

#include "fairneg/interactions.hpp"
#include "fairneg/run_config.hpp"

namespace fairneg::cli {

// Applies the FAIRNEG_OUT_ROOT override to relative output paths.
std::string resolve_out_dir(const std::string& out);

// Relative improvement over a baseline in percent; sign flips so that a
// positive value is always an improvement.
double relative_improvement_pct(double value, double baseline,
                                bool lower_better);

struct PreparedData {
  DataSplit split;
  GroupMap groups;
  std::map<std::string, std::string> hashes;  // part name -> hex
  std::uint64_t split_seed = 0;
};

// Loads a prepare output directory, verifying the manifest content hashes.
PreparedData load_prepared(const std::string& data_dir);

void cmd_prepare(const RunConfig& config, const std::string& out_dir);
void cmd_synth(const RunConfig& config, const std::string& out_dir);
void cmd_train(const RunConfig& config, const std::string& out_dir);
void cmd_evaluate(const RunConfig& config);
void cmd_compare(const RunConfig& config, const std::string& out_dir);
void cmd_sweep(const RunConfig& config, const std::string& out_dir);

}  // namespace fairneg::cli
