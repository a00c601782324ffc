#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rrnet/errors.hpp"
#include "rrnet/harness.hpp"

namespace fs = std::filesystem;
using rrnet::Json;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kIo = 2, kAlert = 3, kOther = 4 };

// Flag values are read as JSON literals when they parse as such, so `--dims
// [125,250]` and `--delta 0.01` keep their types; a bare comma list becomes an
// array and anything else is a string.
Json flag_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
  }
  if (text.find(',') != std::string::npos) {
    try {
      return Json::parse("[" + text + "]");
    } catch (const Json::parse_error&) {
    }
  }
  return Json(text);
}

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::string> format;
};

// Execution settings: a flag beats the config file, which beats the default.
struct Execution {
  fs::path out_dir = ".";
  std::string format = "both";
};

struct Command {
  std::string kind;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> flags;  // key -> raw text, filled by CLI11
};

void add_key_flags(Command& cmd) {
  for (const auto& key : rrnet::allowed_keys(cmd.kind)) {
    if (key == "seed" || rrnet::ExperimentConfig::is_execution_key(key)) continue;
    cmd.app->add_option(flag_name(key), cmd.flags[key], "config key '" + key + "'");
  }
}

rrnet::ExperimentConfig build_config(const Command& cmd, const Globals& g) {
  Json doc = Json::object();
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw rrnet::IoError("cannot open config '" + g.config + "'");
    try {
      doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw rrnet::ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw rrnet::ConfigError("config", "must be a JSON object");
    if (doc.contains("kind") && doc.at("kind") != cmd.kind) {
      throw rrnet::ConfigError("kind", "config is for '" + doc.at("kind").dump() +
                                           "' but the command runs '" + cmd.kind + "'");
    }
  }
  doc["kind"] = cmd.kind;
  for (const auto& [key, text] : cmd.flags) {
    if (cmd.app->count(flag_name(key)) == 0) continue;
    Json v = flag_value(text);
    const bool list_key = key == "dims" || key == "widths" || key == "ratios";
    if (list_key && !v.is_array()) v = Json::array({v});
    doc[key] = v;
  }
  if (g.seed) doc["seed"] = *g.seed;
  if (g.workers) doc["workers"] = *g.workers;
  if (g.out_dir) doc["out_dir"] = *g.out_dir;
  if (g.format) doc["format"] = *g.format;
  return rrnet::parse_config(doc);
}

Execution execution(const rrnet::ExperimentConfig& cfg) {
  Execution e;
  const Json& p = cfg.params;
  if (p.contains("out_dir")) {
    if (!p.at("out_dir").is_string()) throw rrnet::ConfigError("out_dir", "must be a string");
    e.out_dir = p.at("out_dir").get<std::string>();
  }
  if (p.contains("format")) {
    const Json& f = p.at("format");
    if (!f.is_string() || (f != "csv" && f != "json" && f != "both")) {
      throw rrnet::ConfigError("format", "must be csv, json or both");
    }
    e.format = f.get<std::string>();
  }
  return e;
}

int run_sample(const Command& cmd, const Globals& g) {
  const rrnet::ExperimentConfig cfg = build_config(cmd, g);
  const Execution ex = execution(cfg);
  const rrnet::Network net = rrnet::sample_network(cfg);
  fs::path out = ex.out_dir / "network.rrnn";
  if (cfg.params.contains("output")) {
    if (!cfg.params.at("output").is_string()) throw rrnet::ConfigError("output", "must be a path");
    out = cfg.params.at("output").get<std::string>();
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  rrnet::save_network(net, out);
  std::cout << out.string() << "\n";
  return kOk;
}

int run_kind(const Command& cmd, const Globals& g) {
  const rrnet::ExperimentConfig cfg = build_config(cmd, g);
  const Execution ex = execution(cfg);
  const rrnet::RunResult res = rrnet::run_experiment(cfg);
  std::error_code ec;
  fs::create_directories(ex.out_dir, ec);
  if (ec) throw rrnet::IoError("cannot create '" + ex.out_dir.string() + "': " + ec.message());
  const fs::path base = ex.out_dir / res.stem;
  if (ex.format != "json") {
    rrnet::write_csv(res.columns, res.rows, base.string() + ".csv");
    std::cout << base.string() << ".csv\n";
  }
  if (ex.format != "csv") {
    rrnet::write_summary_json(res.summary, base.string() + ".json");
    std::cout << base.string() << ".json\n";
  }
  if (res.alert) {
    std::cerr << "rrnet: violation frequency above alert_level\n";
    return kAlert;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random ReLU network experiments"};
  app.set_version_flag("--version", rrnet::version_string());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--config", g.config, "JSON config file; flags override its keys")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "directory for output files");
  app.add_option("--workers", g.workers, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}));

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](CLI::App* parent, const std::string& name, const std::string& kind,
                 const std::string& help) {
    auto cmd = std::make_unique<Command>();
    cmd->kind = kind;
    cmd->app = parent->add_subcommand(name, help);
    add_key_flags(*cmd);
    commands.push_back(std::move(cmd));
  };
  add(&app, "sample", "sample", "build a random network and save it");
  add(&app, "attack", "attack", "flip search on random (network, input) pairs");
  add(&app, "sweep", "sweep", "perturbation ratio across input dimensions");
  add(&app, "collapse", "collapse", "layer statistics of a deep network");
  add(&app, "kernel", "kernel", "iterate the arc-cosine kernel map");
  CLI::App* probe = app.add_subcommand("probe", "run a probe");
  probe->require_subcommand(1);
  for (const auto& kind : rrnet::experiment_kinds()) {
    if (kind.rfind("probe:", 0) == 0) add(probe, kind.substr(6), kind, kind.substr(6) + " probe");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    for (const auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      return cmd->kind == "sample" ? run_sample(*cmd, g) : run_kind(*cmd, g);
    }
    return kConfig;
  } catch (const rrnet::ConfigError& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kConfig;
  } catch (const rrnet::DomainError& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kConfig;
  } catch (const rrnet::DegenerateInput& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kConfig;
  } catch (const rrnet::IoError& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kIo;
  } catch (const rrnet::FormatError& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "rrnet: " << e.what() << "\n";
    return kOther;
  }
}
