#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fairneg/commands.hpp"
#include "fairneg/run_config.hpp"

using namespace fairneg;
namespace fs = std::filesystem;

namespace {

fs::path workspace() {
  static const fs::path root =
      fs::temp_directory_path() / "fairneg_cli_test";
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Tiny but trainable synthetic setup shared by the pipeline tests.
std::vector<std::string> base_overrides(const std::string& data_dir) {
  return {
      "source=synth",        "synth_users=40",        "synth_items=20",
      "synth_groups=2",      "synth_interactions=300", "synth_seed=5",
      "synth_feedback_share=0.75,0.25",
      "split_seed=11",       "latent_dim=8",          "epochs_max=4",
      "batch_size=64",       "patience=4",            "eval_k=3",
      "metric_ks=3,5",       "train_seed=13",         "data_dir=" + data_dir,
  };
}

}  // namespace

TEST_CASE("run config parsing and validation") {
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(RunConfig::from_overrides({"no_such_key=1"}), ConfigError);
  }
  SUBCASE("type checking at load") {
    CHECK_THROWS_AS(RunConfig::from_overrides({"epochs_max=ten"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_overrides({"dynamic=maybe"}), ConfigError);
  }
  SUBCASE("invalid beta is rejected before any work") {
    const RunConfig c =
        RunConfig::from_overrides({"strategy=fairneg", "beta=1.5"});
    CHECK_THROWS_AS(c.make_train_config(), ConfigError);
  }
  SUBCASE("strategy is required for training") {
    const RunConfig c = RunConfig::from_overrides({});
    CHECK_THROWS_AS(c.make_train_config(), ConfigError);
  }
  SUBCASE("file values load and flag overrides win") {
    const auto path = workspace() / "cfg.ini";
    fs::create_directories(workspace());
    std::ofstream out(path);
    out << "# comment\n; also a comment\nstrategy = uns\nbeta= 0.25\n\n";
    out.close();
    const RunConfig c = RunConfig::load(path.string(), {"beta=0.75"});
    CHECK(c.get_string("strategy") == "uns");
    CHECK(c.get_double("beta") == 0.75);
    CHECK_THROWS_AS(RunConfig::load((workspace() / "none.ini").string(), {}),
                    ConfigError);
  }
  SUBCASE("config hash tracks effective values") {
    const RunConfig a = RunConfig::from_overrides({"beta=0.5"});
    const RunConfig b = RunConfig::from_overrides({"beta=0.6"});
    CHECK(a.config_hash() != b.config_hash());
    CHECK(a.config_hash() ==
          RunConfig::from_overrides({"beta=0.5"}).config_hash());
  }
}

TEST_CASE("prepare on synthetic source, deterministic rerun") {
  const fs::path data = workspace() / "data";
  fs::remove_all(data);
  const RunConfig cfg = RunConfig::from_overrides(base_overrides(data.string()));
  cli::cmd_prepare(cfg, data.string());

  for (const char* name : {"ratings.txt", "attributes.txt", "train.txt",
                           "validation.txt", "test.txt", "users.txt",
                           "items.txt", "group_stats.csv",
                           "split_manifest.json"}) {
    CHECK(fs::exists(data / name));
  }
  const cli::PreparedData loaded = cli::load_prepared(data.string());
  CHECK(loaded.split.train.size() == 180);
  CHECK(loaded.split.validation.size() == 60);
  CHECK(loaded.split.test.size() == 60);
  CHECK(loaded.groups.group_count() == 2);

  const std::string manifest_before = slurp(data / "split_manifest.json");
  const std::string train_before = slurp(data / "train.txt");
  cli::cmd_prepare(cfg, data.string());
  CHECK(slurp(data / "split_manifest.json") == manifest_before);
  CHECK(slurp(data / "train.txt") == train_before);
}

TEST_CASE("prepare validation errors") {
  SUBCASE("files source requires labels") {
    const RunConfig cfg = RunConfig::from_overrides(
        {"source=files", "ratings_path=r.txt", "attributes_path=a.txt"});
    CHECK_THROWS_AS(cli::cmd_prepare(cfg, (workspace() / "x").string()),
                    ConfigError);
  }
  SUBCASE("missing attribute file is a data error") {
    const RunConfig cfg = RunConfig::from_overrides(
        {"source=files", "ratings_path=/nonexistent/r.dat",
         "attributes_path=/nonexistent/a.csv", "group_labels=g"});
    CHECK_THROWS_AS(cli::cmd_prepare(cfg, (workspace() / "x").string()),
                    DataError);
  }
  SUBCASE("label filter that matches nothing is a data error") {
    const fs::path dir = workspace() / "nolabel";
    fs::create_directories(dir);
    std::ofstream(dir / "r.txt") << "1::1::5\n";
    std::ofstream(dir / "a.csv") << "1,real_label\n";
    const RunConfig cfg = RunConfig::from_overrides(
        {"source=files", "ratings_path=" + (dir / "r.txt").string(),
         "attributes_path=" + (dir / "a.csv").string(),
         "group_labels=other_label"});
    CHECK_THROWS_AS(cli::cmd_prepare(cfg, dir.string()), DataError);
  }
}

TEST_CASE("train evaluate pipeline with byte-identical reruns") {
  const fs::path data = workspace() / "pipe_data";
  fs::remove_all(data);
  auto overrides = base_overrides(data.string());
  const RunConfig prep = RunConfig::from_overrides(overrides);
  cli::cmd_prepare(prep, data.string());

  overrides.push_back("strategy=fairneg");
  overrides.push_back("beta=0.5");
  const RunConfig cfg = RunConfig::from_overrides(overrides);

  const fs::path run1 = workspace() / "run1";
  const fs::path run2 = workspace() / "run2";
  fs::remove_all(run1);
  fs::remove_all(run2);
  cli::cmd_train(cfg, run1.string());
  cli::cmd_train(cfg, run2.string());
  for (const char* name : {"checkpoint.json", "epoch_log.csv", "manifest.json"}) {
    CHECK(fs::exists(run1 / name));
  }
  CHECK(slurp(run1 / "epoch_log.csv") == slurp(run2 / "epoch_log.csv"));
  CHECK(slurp(run1 / "checkpoint.json") == slurp(run2 / "checkpoint.json"));

  cli::cmd_evaluate(cfg.with("run_dir", run1.string()));
  cli::cmd_evaluate(cfg.with("run_dir", run2.string()));
  for (int k : {3, 5}) {
    const std::string stem = "metrics_k" + std::to_string(k);
    CHECK(fs::exists(run1 / (stem + ".csv")));
    CHECK(slurp(run1 / (stem + ".json")) == slurp(run2 / (stem + ".json")));
    CHECK(slurp(run1 / (stem + ".csv")) == slurp(run2 / (stem + ".csv")));
  }

  SUBCASE("repeated evaluation is idempotent") {
    const std::string before = slurp(run1 / "metrics_k3.json");
    cli::cmd_evaluate(cfg.with("run_dir", run1.string()));
    CHECK(slurp(run1 / "metrics_k3.json") == before);
  }

  SUBCASE("tampered data refuses to evaluate") {
    const fs::path data2 = workspace() / "pipe_data_tampered";
    fs::remove_all(data2);
    fs::create_directories(data2);
    for (const auto& entry : fs::directory_iterator(data)) {
      fs::copy(entry.path(), data2 / entry.path().filename());
    }
    std::ofstream(data2 / "train.txt", std::ios::app) << "0 1\n";
    const RunConfig bad =
        cfg.with("run_dir", run1.string()).with("data_dir", data2.string());
    CHECK_THROWS_AS(cli::cmd_evaluate(bad), DataError);
  }
}

TEST_CASE("compare consolidates runs against the uns baseline") {
  const fs::path data = workspace() / "cmp_data";
  fs::remove_all(data);
  auto overrides = base_overrides(data.string());
  cli::cmd_prepare(RunConfig::from_overrides(overrides), data.string());

  const fs::path uns_dir = workspace() / "cmp_uns";
  const fs::path fn_dir = workspace() / "cmp_fairneg";
  fs::remove_all(uns_dir);
  fs::remove_all(fn_dir);
  auto uns_overrides = overrides;
  uns_overrides.push_back("strategy=uns");
  const RunConfig uns_cfg = RunConfig::from_overrides(uns_overrides);
  cli::cmd_train(uns_cfg, uns_dir.string());
  cli::cmd_evaluate(uns_cfg.with("run_dir", uns_dir.string()));

  auto fn_overrides = overrides;
  fn_overrides.push_back("strategy=fairneg");
  const RunConfig fn_cfg = RunConfig::from_overrides(fn_overrides);
  cli::cmd_train(fn_cfg, fn_dir.string());
  cli::cmd_evaluate(fn_cfg.with("run_dir", fn_dir.string()));

  const fs::path cmp = workspace() / "cmp_out";
  fs::remove_all(cmp);
  const RunConfig cmp_cfg = RunConfig::from_overrides(
      {"runs=" + uns_dir.string() + "," + fn_dir.string(), "metric_ks=3,5"});
  cli::cmd_compare(cmp_cfg, cmp.string());
  const std::string csv = slurp(cmp / "comparison.csv");
  CHECK(csv.find("uns") != std::string::npos);
  CHECK(csv.find("fairneg") != std::string::npos);
  CHECK(csv.find("ri_recall_disp_pct") != std::string::npos);

  SUBCASE("self-comparison has zero relative improvement") {
    const RunConfig self_cfg = RunConfig::from_overrides(
        {"runs=" + uns_dir.string() + "," + uns_dir.string(), "metric_ks=3"});
    const fs::path self = workspace() / "cmp_self";
    fs::remove_all(self);
    cli::cmd_compare(self_cfg, self.string());
    const std::string self_csv = slurp(self / "comparison.csv");
    // Both rows are the baseline, so every RI column is 0.
    std::istringstream lines(self_csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
      const auto tail = line.substr(line.size() - 14);
      CHECK(tail == ",0,0,0,0,0,0,0");
    }
  }

  SUBCASE("fewer than two runs is a config error") {
    const RunConfig one = RunConfig::from_overrides({"runs=" + uns_dir.string()});
    CHECK_THROWS_AS(cli::cmd_compare(one, (workspace() / "z").string()),
                    ConfigError);
  }
  SUBCASE("a missing uns baseline is a config error") {
    const RunConfig no_base = RunConfig::from_overrides(
        {"runs=" + fn_dir.string() + "," + fn_dir.string(), "metric_ks=3"});
    CHECK_THROWS_AS(cli::cmd_compare(no_base, (workspace() / "z").string()),
                    ConfigError);
  }
}

TEST_CASE("sweep runs grid points and summarizes") {
  const fs::path data = workspace() / "sweep_data";
  fs::remove_all(data);
  auto overrides = base_overrides(data.string());
  cli::cmd_prepare(RunConfig::from_overrides(overrides), data.string());

  overrides.push_back("strategy=fairneg");
  overrides.push_back("epochs_max=2");
  overrides.push_back("metric_ks=3");
  overrides.push_back("sweep_beta=0.2,0.8");
  const RunConfig cfg = RunConfig::from_overrides(overrides);
  const fs::path out = workspace() / "sweep_out";
  fs::remove_all(out);
  cli::cmd_sweep(cfg, out.string());
  const std::string summary = slurp(out / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);  // header + 2
  CHECK(summary.find(",ok,") != std::string::npos);
  CHECK(fs::exists(out / "g0.1_b0.2" / "metrics_k3.json"));
  CHECK(fs::exists(out / "g0.1_b0.8" / "metrics_k3.json"));

  SUBCASE("empty grid is a config error") {
    const RunConfig no_grid =
        RunConfig::from_overrides(base_overrides(data.string()));
    CHECK_THROWS_AS(cli::cmd_sweep(no_grid, (workspace() / "z").string()),
                    ConfigError);
  }
  SUBCASE("range grid spec parses inclusively") {
    auto o2 = base_overrides(data.string());
    o2.push_back("strategy=fairneg");
    o2.push_back("epochs_max=1");
    o2.push_back("metric_ks=3");
    o2.push_back("sweep_gamma=0:0.1:0.2");
    const fs::path out2 = workspace() / "sweep_gamma_out";
    fs::remove_all(out2);
    cli::cmd_sweep(RunConfig::from_overrides(o2), out2.string());
    const std::string s2 = slurp(out2 / "summary.csv");
    CHECK(std::count(s2.begin(), s2.end(), '\n') == 4);  // header + 3 points
  }
}

TEST_CASE("out-dir root override applies to relative paths") {
  setenv("FAIRNEG_OUT_ROOT", "/tmp/fairneg_root", 1);
  CHECK(cli::resolve_out_dir("runs/x") == "/tmp/fairneg_root/runs/x");
  CHECK(cli::resolve_out_dir("/abs/path") == "/abs/path");
  unsetenv("FAIRNEG_OUT_ROOT");
  CHECK(cli::resolve_out_dir("runs/x") == "runs/x");
  CHECK_THROWS_AS(cli::resolve_out_dir(""), ConfigError);
}

TEST_CASE("cli binary maps error classes to exit codes") {
  const char* cli = std::getenv("FAIRNEG_CLI");
  if (cli == nullptr) return;  // property configured in CMake; guard anyway
  const std::string bin(cli);
  auto run = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  const fs::path out = workspace() / "bin_synth";
  fs::remove_all(out);
  CHECK(run("synth --set synth_users=10 --set synth_items=8 "
            "--set synth_interactions=20 --out " + out.string()) == 0);
  CHECK(run("train --set strategy=fairneg --set beta=1.5 --set data_dir=x "
            "--out " + (workspace() / "bin_run").string()) == 1);
  CHECK(run("train --set strategy=fairneg --set data_dir=/nonexistent "
            "--out " + (workspace() / "bin_run2").string()) == 2);
  CHECK(run("") != 0);
}

TEST_CASE("relative improvement matches the published convention") {
  // Lower-better metric: (base - x) / base.
  CHECK(cli::relative_improvement_pct(0.0287, 0.3179, true) ==
        doctest::Approx(90.97).epsilon(1e-3));
  // Higher-better metric: (x - base) / base.
  CHECK(cli::relative_improvement_pct(0.4734, 0.4622, false) ==
        doctest::Approx(2.42).epsilon(1e-2));
  CHECK(cli::relative_improvement_pct(0.5, 0.5, true) == 0.0);
  CHECK(cli::relative_improvement_pct(0.1, 0.0, false) == 0.0);
}

TEST_CASE("lightgcn pipeline through the commands") {
  const fs::path data = workspace() / "lgn_data";
  fs::remove_all(data);
  auto overrides = base_overrides(data.string());
  cli::cmd_prepare(RunConfig::from_overrides(overrides), data.string());

  overrides.push_back("strategy=fairneg");
  overrides.push_back("backbone=lightgcn");
  overrides.push_back("lightgcn_layers=2");
  overrides.push_back("epochs_max=2");
  overrides.push_back("metric_ks=3");
  const RunConfig cfg = RunConfig::from_overrides(overrides);
  const fs::path run = workspace() / "lgn_run";
  fs::remove_all(run);
  cli::cmd_train(cfg, run.string());
  cli::cmd_evaluate(cfg.with("run_dir", run.string()));
  CHECK(fs::exists(run / "metrics_k3.json"));

  const std::string first = slurp(run / "metrics_k3.json");
  cli::cmd_evaluate(cfg.with("run_dir", run.string()));
  CHECK(slurp(run / "metrics_k3.json") == first);
}
