#include "fairneg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_set>

#include "fairneg/metrics.hpp"
#include "fairneg/model.hpp"
#include "fairneg/synth.hpp"
#include "fairneg/trainer.hpp"

namespace fairneg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for hashing: " + path);
  Fnv1a h;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  return hex64(h.digest());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path);
  out << content;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(1) + "\n");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

std::string part_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_part(const std::string& path, const InteractionTable& table) {
  std::ostringstream out;
  for (const Interaction& it : table.interactions()) {
    out << it.user << ' ' << it.item << '\n';
  }
  write_text(path, out.str());
}

InteractionTable read_part(const std::string& path, std::int32_t num_users,
                           std::int32_t num_items) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split part: " + path);
  std::vector<Interaction> pairs;
  std::int64_t u, i;
  while (in >> u >> i) {
    pairs.push_back(
        {static_cast<std::int32_t>(u), static_cast<std::int32_t>(i)});
  }
  return InteractionTable::from_pairs(std::move(pairs), num_users, num_items);
}

json config_echo(const RunConfig& config) {
  json j = json::object();
  for (const auto& [key, value] : config.values()) j[key] = value;
  return j;
}

}  // namespace

double relative_improvement_pct(double value, double baseline,
                                bool lower_better) {
  if (baseline == 0.0) return 0.0;
  const double ri =
      lower_better ? (baseline - value) / baseline : (value - baseline) / baseline;
  return 100.0 * ri;
}

std::string resolve_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("an output directory is required (--out)");
  fs::path p(out);
  const char* root = std::getenv("FAIRNEG_OUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative()) {
    p = fs::path(root) / p;
  }
  return p.string();
}

PreparedData load_prepared(const std::string& data_dir) {
  const json manifest = read_json(part_path(data_dir, "split_manifest.json"));
  PreparedData d;
  d.split_seed = manifest.at("seed").get<std::uint64_t>();
  const auto num_users = manifest.at("num_users").get<std::int32_t>();
  const auto num_items = manifest.at("num_items").get<std::int32_t>();

  for (const std::string name : {"train", "validation", "test", "items"}) {
    const std::string file =
        name == "items" ? "items.txt" : name + std::string(".txt");
    const std::string got = file_hash(part_path(data_dir, file));
    const std::string want =
        manifest.at("hashes").at(name).get<std::string>();
    if (got != want) {
      throw DataError("content hash mismatch for " + file + " in " + data_dir);
    }
    d.hashes[name] = got;
  }

  d.split.seed = d.split_seed;
  d.split.train = read_part(part_path(data_dir, "train.txt"), num_users, num_items);
  d.split.validation =
      read_part(part_path(data_dir, "validation.txt"), num_users, num_items);
  d.split.test = read_part(part_path(data_dir, "test.txt"), num_users, num_items);

  d.groups.group_labels =
      manifest.at("group_labels").get<std::vector<std::string>>();
  d.groups.item_group.assign(static_cast<std::size_t>(num_items), -1);
  std::ifstream items(part_path(data_dir, "items.txt"));
  if (!items) throw DataError("cannot open items.txt in " + data_dir);
  std::string line;
  while (std::getline(items, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t idx, group;
    std::string raw;
    if (!(ss >> idx >> raw >> group) || idx < 0 || idx >= num_items) {
      throw DataError("malformed items.txt line: \"" + line + "\"");
    }
    d.groups.item_group[static_cast<std::size_t>(idx)] =
        static_cast<std::int32_t>(group);
  }
  for (std::int32_t g : d.groups.item_group) {
    if (g < 0) throw DataError("items.txt does not cover the catalog");
  }
  return d;
}

void cmd_synth(const RunConfig& config, const std::string& out_dir) {
  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);
  const SynthSpec spec = config.make_synth_spec();
  write_synthetic_files(spec, part_path(out, "ratings.txt"),
                        part_path(out, "attributes.txt"));
  const std::int64_t target =
      spec.interactions > 0
          ? spec.interactions
          : static_cast<std::int64_t>(std::llround(
                spec.density * static_cast<double>(spec.users) *
                static_cast<double>(spec.items)));
  std::cout << "synth: wrote " << target << " target interactions, "
            << spec.users << " users, " << spec.items << " items to " << out
            << "\n";
}

void cmd_prepare(const RunConfig& config, const std::string& out_dir) {
  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);

  std::string ratings_path, attributes_path;
  std::vector<std::string> labels = config.get_string_list("group_labels");
  const std::string source = config.get_string("source");
  if (source == "synth") {
    const SynthSpec spec = config.make_synth_spec();
    ratings_path = part_path(out, "ratings.txt");
    attributes_path = part_path(out, "attributes.txt");
    write_synthetic_files(spec, ratings_path, attributes_path);
    if (labels.empty()) {
      labels = spec.labels;
      if (labels.empty()) {
        for (int g = 0; g < spec.groups; ++g) {
          labels.push_back("group_" + std::to_string(g));
        }
      }
    }
  } else if (source == "files") {
    ratings_path = config.require_string("ratings_path");
    attributes_path = config.require_string("attributes_path");
    if (labels.empty()) {
      throw ConfigError("group_labels must name at least one group to keep");
    }
  } else {
    throw ConfigError("source must be \"files\" or \"synth\"");
  }

  TextFormat fmt;
  fmt.separator = config.get_string("ratings_separator");
  fmt.user_column = config.get_int("ratings_user_column");
  fmt.item_column = config.get_int("ratings_item_column");

  const auto raw_pairs = load_interactions(ratings_path, fmt);
  const auto raw_attrs =
      load_attributes(attributes_path, config.get_string("attributes_separator"));

  // Attribute filtering: keep only configured labels, then drop interactions
  // whose item left the catalog.
  const std::set<std::string> keep(labels.begin(), labels.end());
  std::vector<RawAttribute> attrs;
  for (const RawAttribute& a : raw_attrs) {
    if (keep.count(a.label)) attrs.push_back(a);
  }
  if (attrs.empty()) {
    throw DataError("no items carry the configured group labels");
  }
  std::unordered_set<std::string> retained;
  for (const RawAttribute& a : attrs) retained.insert(a.item);
  std::vector<RawPair> pairs;
  for (const RawPair& p : raw_pairs) {
    if (retained.count(p.item)) pairs.push_back(p);
  }
  if (pairs.empty()) {
    throw DataError("no interactions reference the retained items");
  }

  const ReindexResult r = reindex(pairs, attrs);
  const DataSplit s = split(r.table, config.get_u64("split_seed"));
  const auto stats = group_stats(r.table, r.groups);

  write_part(part_path(out, "train.txt"), s.train);
  write_part(part_path(out, "validation.txt"), s.validation);
  write_part(part_path(out, "test.txt"), s.test);
  {
    std::ostringstream users;
    for (std::size_t u = 0; u < r.user_ids.size(); ++u) {
      users << u << ' ' << r.user_ids[u] << '\n';
    }
    write_text(part_path(out, "users.txt"), users.str());
    std::ostringstream items;
    for (std::size_t i = 0; i < r.item_ids.size(); ++i) {
      items << i << ' ' << r.item_ids[i] << ' ' << r.groups.item_group[i] << '\n';
    }
    write_text(part_path(out, "items.txt"), items.str());
  }
  {
    std::ostringstream csv;
    csv << "group,label,items,feedback,feedback_per_item\n";
    for (std::size_t g = 0; g < stats.size(); ++g) {
      csv << g << ',' << r.groups.group_labels[g] << ',' << stats[g].item_count
          << ',' << stats[g].feedback_count << ','
          << format_double(stats[g].feedback_per_item, 6) << '\n';
    }
    write_text(part_path(out, "group_stats.csv"), csv.str());
  }

  json manifest;
  manifest["format"] = "fairneg-split-v1";
  manifest["seed"] = config.get_u64("split_seed");
  manifest["num_users"] = r.table.num_users();
  manifest["num_items"] = r.table.num_items();
  manifest["total_interactions"] = r.table.size();
  manifest["group_labels"] = r.groups.group_labels;
  manifest["sizes"] = {{"train", s.train.size()},
                       {"validation", s.validation.size()},
                       {"test", s.test.size()}};
  manifest["hashes"] = {
      {"train", file_hash(part_path(out, "train.txt"))},
      {"validation", file_hash(part_path(out, "validation.txt"))},
      {"test", file_hash(part_path(out, "test.txt"))},
      {"items", file_hash(part_path(out, "items.txt"))}};
  manifest["config_hash"] = hex64(config.config_hash());
  write_json(part_path(out, "split_manifest.json"), manifest);

  std::cout << "prepare: " << r.table.num_users() << " users, "
            << r.table.num_items() << " items, " << r.table.size()
            << " interactions -> " << s.train.size() << "/"
            << s.validation.size() << "/" << s.test.size() << " split at "
            << out << "\n";
  for (std::size_t g = 0; g < stats.size(); ++g) {
    std::cout << "  group " << g << " (" << r.groups.group_labels[g]
              << "): " << stats[g].item_count << " items, "
              << stats[g].feedback_count << " feedback, "
              << format_double(stats[g].feedback_per_item, 4)
              << " feedback/item\n";
  }
}

void cmd_train(const RunConfig& config, const std::string& out_dir) {
  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);
  const TrainConfig tc = config.make_train_config();
  const std::string data_dir = config.require_string("data_dir");
  const PreparedData data = load_prepared(data_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = bilevel_train(tc, data.split, data.groups);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  {
    std::ostringstream csv;
    csv << EpochRecord::csv_header(data.groups.group_count()) << '\n';
    for (const EpochRecord& rec : result.log) csv << rec.csv_row() << '\n';
    write_text(part_path(out, "epoch_log.csv"), csv.str());
  }
  save_checkpoint(result.best_model, part_path(out, "checkpoint.json"));

  json manifest;
  manifest["format"] = "fairneg-run-v1";
  json echo = config_echo(config);
  echo["learning_rate"] = format_double(tc.adam.learning_rate, 17);
  manifest["config"] = std::move(echo);
  manifest["config_hash"] = hex64(config.config_hash());
  manifest["data_dir"] = data_dir;
  json hashes = json::object();
  for (const auto& [name, hash] : data.hashes) hashes[name] = hash;
  manifest["data_hashes"] = std::move(hashes);
  manifest["strategy"] = config.get_string("strategy");
  manifest["seed"] = tc.seed;
  manifest["best_epoch"] = result.best_epoch;
  manifest["best_val_recall"] = result.best_val_recall;
  manifest["epochs_run"] = result.epochs_run;
  json p = json::array();
  for (Eigen::Index g = 0; g < result.final_p.p.size(); ++g) {
    p.push_back(result.final_p.p[g]);
  }
  manifest["final_p"] = std::move(p);
  manifest["wall_clock_sec"] = wall;
  write_json(part_path(out, "manifest.json"), manifest);

  std::cout << "train: " << config.get_string("strategy") << " ran "
            << result.epochs_run << " epochs, best epoch " << result.best_epoch
            << " (validation Recall@" << tc.eval_k << " = "
            << format_double(result.best_val_recall, 6) << "), "
            << format_double(wall, 4) << "s -> " << out << "\n";
}

namespace {

MetricReport evaluate_checkpoint(const EmbeddingModel& model,
                                 const PreparedData& data, int k,
                                 GroupRecallAggregation aggregation) {
  Propagated prop;
  EmbeddingView view = model.base_view();
  if (model.config.kind == BackboneKind::LightGCN) {
    prop = model.forward();
    view = {&prop.users, &prop.items};
  }
  const auto lists =
      topk_recommend(view, data.split.test,
                     {&data.split.train, &data.split.validation}, k);
  return compute_metrics(lists, data.split.test, data.groups, k, aggregation);
}

}  // namespace

void cmd_evaluate(const RunConfig& config) {
  const std::string run_dir = config.require_string("run_dir");
  const json manifest = read_json(part_path(run_dir, "manifest.json"));
  const std::string data_dir = config.has("data_dir")
                                   ? config.get_string("data_dir")
                                   : manifest.at("data_dir").get<std::string>();
  const PreparedData data = load_prepared(data_dir);

  // Refuse to score a checkpoint against data it was not trained on.
  for (const auto& [name, hash] : data.hashes) {
    const std::string want =
        manifest.at("data_hashes").at(name).get<std::string>();
    if (want != hash) {
      throw DataError("data hash mismatch for \"" + name +
                      "\"; refusing to evaluate");
    }
  }

  EmbeddingModel model = load_checkpoint(part_path(run_dir, "checkpoint.json"));
  if (model.num_users() != data.split.train.num_users() ||
      model.num_items() != data.split.train.num_items()) {
    throw DataError("checkpoint shape does not match the prepared data");
  }
  if (model.config.kind == BackboneKind::LightGCN) {
    model.build_adjacency(data.split.train);
  }

  const auto aggregation = config.aggregation();
  for (int k : config.metric_ks()) {
    const MetricReport report =
        evaluate_checkpoint(model, data, k, aggregation);
    std::ostringstream csv;
    csv << "# config_hash=" << hex64(config.config_hash())
        << " data_hash=" << data.hashes.at("train") << '\n';
    csv << MetricReport::csv_header(data.groups.group_count()) << '\n'
        << report.csv_row() << '\n';
    const std::string stem = "metrics_k" + std::to_string(k);
    write_text(part_path(run_dir, stem + ".csv"), csv.str());

    json j = json::parse(report.to_json());
    j["config_hash"] = hex64(config.config_hash());
    j["run_config_hash"] = manifest.at("config_hash");
    json hashes = json::object();
    for (const auto& [name, hash] : data.hashes) hashes[name] = hash;
    j["data_hashes"] = std::move(hashes);
    j["strategy"] = manifest.at("strategy");
    write_json(part_path(run_dir, stem + ".json"), j);

    std::cout << "evaluate k=" << k
              << ": Recall-Disp=" << format_double(report.disp, 6)
              << " Recall-Min=" << format_double(report.min, 6)
              << " Recall-Avg=" << format_double(report.avg, 6)
              << " N=" << format_double(report.ndcg, 6)
              << " P=" << format_double(report.precision, 6)
              << " R=" << format_double(report.recall, 6) << "\n";
  }
}

void cmd_compare(const RunConfig& config, const std::string& out_dir) {
  const std::vector<std::string> runs = config.get_string_list("runs");
  if (runs.size() < 2) {
    throw ConfigError("compare needs >= 2 run directories in \"runs\"");
  }
  const std::vector<int> ks = config.metric_ks();

  struct RunMetrics {
    std::string dir;
    std::string strategy;
    json manifest;
    std::map<int, json> reports;
  };
  std::vector<RunMetrics> loaded;
  for (const std::string& dir : runs) {
    RunMetrics rm;
    rm.dir = dir;
    rm.manifest = read_json(part_path(dir, "manifest.json"));
    rm.strategy = rm.manifest.at("strategy").get<std::string>();
    for (int k : ks) {
      const std::string file =
          part_path(dir, "metrics_k" + std::to_string(k) + ".json");
      if (!fs::exists(file)) {
        throw DataError("missing " + file + "; run the evaluate command first");
      }
      rm.reports[k] = read_json(file);
    }
    loaded.push_back(std::move(rm));
  }
  // All runs must sit on the same split.
  const json& ref = loaded.front().manifest.at("data_hashes");
  for (const RunMetrics& rm : loaded) {
    if (rm.manifest.at("data_hashes") != ref) {
      throw DataError("run " + rm.dir +
                      " was trained on a different split; refusing to compare");
    }
  }

  const auto baseline =
      std::find_if(loaded.begin(), loaded.end(),
                   [](const RunMetrics& rm) { return rm.strategy == "uns"; });
  if (baseline == loaded.end()) {
    throw ConfigError("compare requires a UNS baseline run for the RI column");
  }

  struct Column {
    const char* name;
    bool lower_better;
  };
  const std::vector<Column> columns = {
      {"recall_disp", true}, {"recall_min", false}, {"recall_avg", false},
      {"ndcg", false},       {"precision", false},  {"recall", false},
      {"f1", false}};

  auto metric_value = [](const json& report, const char* name) {
    const json& v = report.at(name);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : v.get<double>();
  };

  std::ostringstream csv;
  csv << "run,strategy,k";
  for (const Column& c : columns) csv << ',' << c.name;
  for (const Column& c : columns) csv << ",ri_" << c.name << "_pct";
  csv << '\n';
  for (const RunMetrics& rm : loaded) {
    for (int k : ks) {
      csv << rm.dir << ',' << rm.strategy << ',' << k;
      for (const Column& c : columns) {
        csv << ',' << format_double(metric_value(rm.reports.at(k), c.name));
      }
      for (const Column& c : columns) {
        const double v = metric_value(rm.reports.at(k), c.name);
        const double b = metric_value(baseline->reports.at(k), c.name);
        csv << ','
            << format_double(relative_improvement_pct(v, b, c.lower_better), 6);
      }
      csv << '\n';
    }
  }

  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);
  write_text(part_path(out, "comparison.csv"), csv.str());

  for (const RunMetrics& rm : loaded) {
    for (int k : ks) {
      std::cout << rm.strategy << " @" << k << ":";
      for (const Column& c : columns) {
        const double v = metric_value(rm.reports.at(k), c.name);
        const double b = metric_value(baseline->reports.at(k), c.name);
        std::cout << ' ' << c.name << '=' << format_double(v, 4) << " (RI "
                  << format_double(relative_improvement_pct(v, b, c.lower_better), 4)
                  << "%)";
      }
      std::cout << "\n";
    }
  }
  std::cout << "compare: wrote " << part_path(out, "comparison.csv") << "\n";
}

namespace {

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> values;
  if (spec.empty()) return values;
  if (spec.find(':') != std::string::npos) {
    double start, step, stop;
    char c1, c2;
    std::istringstream ss(spec);
    if (!(ss >> start >> c1 >> step >> c2 >> stop) || c1 != ':' || c2 != ':' ||
        step <= 0.0) {
      throw ConfigError("grid spec must be start:step:stop, got \"" + spec +
                        "\"");
    }
    for (double v = start; v <= stop + 1e-9; v += step) {
      values.push_back(std::min(v, stop));
    }
    return values;
  }
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    values.push_back(std::strtod(part.c_str(), nullptr));
  }
  return values;
}

}  // namespace

void cmd_sweep(const RunConfig& config, const std::string& out_dir) {
  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);

  const std::vector<double> gammas = parse_grid(config.get_string("sweep_gamma"));
  const std::vector<double> betas = parse_grid(config.get_string("sweep_beta"));
  if (gammas.empty() && betas.empty()) {
    throw ConfigError("sweep needs a non-empty sweep_gamma and/or sweep_beta grid");
  }
  const std::vector<double> gamma_axis =
      gammas.empty() ? std::vector<double>{config.get_double("gamma")} : gammas;
  const std::vector<double> beta_axis =
      betas.empty() ? std::vector<double>{config.get_double("beta")} : betas;
  const std::vector<int> ks = config.metric_ks();

  std::ostringstream csv;
  csv << "gamma,beta,status,best_epoch,epochs_run";
  for (int k : ks) {
    csv << ",recall_disp@" << k << ",recall_min@" << k << ",recall_avg@" << k
        << ",f1@" << k << ",recall@" << k;
  }
  csv << '\n';

  for (double gamma : gamma_axis) {
    for (double beta : beta_axis) {
      const std::string point = "g" + format_double(gamma, 6) + "_b" +
                                format_double(beta, 6);
      const std::string dir = part_path(out, point);
      csv << format_double(gamma, 6) << ',' << format_double(beta, 6);
      try {
        RunConfig point_config = config.with("gamma", format_double(gamma, 17))
                                     .with("beta", format_double(beta, 17));
        cmd_train(point_config, dir);
        cmd_evaluate(point_config.with("run_dir", dir));
        const json manifest = read_json(part_path(dir, "manifest.json"));
        csv << ",ok," << manifest.at("best_epoch").get<int>() << ','
            << manifest.at("epochs_run").get<int>();
        for (int k : ks) {
          const json r =
              read_json(part_path(dir, "metrics_k" + std::to_string(k) + ".json"));
          auto val = [&](const char* name) {
            const json& v = r.at(name);
            return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                               : v.get<double>();
          };
          csv << ',' << format_double(val("recall_disp")) << ','
              << format_double(val("recall_min")) << ','
              << format_double(val("recall_avg")) << ','
              << format_double(val("f1")) << ',' << format_double(val("recall"));
        }
      } catch (const std::exception& e) {
        std::cerr << "sweep point " << point << " failed: " << e.what() << "\n";
        csv << ",failed,,";
        for (std::size_t k = 0; k < ks.size(); ++k) csv << ",,,,,";
      }
      csv << '\n';
    }
  }
  write_text(part_path(out, "summary.csv"), csv.str());
  std::cout << "sweep: wrote " << part_path(out, "summary.csv") << "\n";
}

}  // namespace fairneg::cli
