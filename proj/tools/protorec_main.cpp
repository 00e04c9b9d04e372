// Copyright 2026 The protorec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line front end: prepare | train | evaluate | sweep | report.
// Errors exit nonzero with a one-line JSON object on stderr so wrappers can
// parse failures.

#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "protorec/harness.hpp"

namespace {

using protorec::ExperimentConfig;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int fail(const std::string& verb, const std::string& message) {
  nlohmann::json err{{"error", message}, {"verb", verb}};
  std::cerr << err.dump() << std::endl;
  return 1;
}

struct CommonOpts {
  std::string config_path;
  std::string seed_csv;
  std::string variant;
  std::string out;
  bool parallel = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
  auto* copt = cmd->add_option("--config", o.config_path, "Experiment config JSON");
  if (config_required) copt->required();
  cmd->add_option("--seed", o.seed_csv,
                  "Override seed list (comma-separated integers)");
  cmd->add_option("--variant", o.variant, "Override objective variant");
  cmd->add_option("--out", o.out, "Override output directory");
  cmd->add_flag("--parallel", o.parallel, "Use all available threads");
}

// Flags win over the config file.
ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg = protorec::config_from_json(read_file(o.config_path));
  if (!o.seed_csv.empty()) {
    cfg.seeds.clear();
    std::istringstream ss(o.seed_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      cfg.seeds.push_back(std::stoull(tok));
    if (cfg.seeds.empty())
      throw std::invalid_argument("--seed: no seeds parsed");
  }
  if (!o.variant.empty())
    cfg.train.variant = protorec::variant_from_string(o.variant);
  if (!o.out.empty()) cfg.out_dir = o.out;
  return cfg;
}

protorec::ExecPolicy policy(const CommonOpts& o) {
  return o.parallel ? protorec::ExecPolicy::parallel : protorec::ExecPolicy::serial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated cross-domain recommender simulator"};
  app.require_subcommand(1);

  CommonOpts prep_o, train_o, eval_o, sweep_o;
  std::string report_dir;

  auto* prepare = app.add_subcommand("prepare", "Build, split, and save datasets");
  add_common(prepare, prep_o);
  auto* train = app.add_subcommand("train", "Run federated training and evaluate");
  add_common(train, train_o);
  auto* evaluate =
      app.add_subcommand("evaluate", "Re-evaluate saved checkpoints");
  add_common(evaluate, eval_o);
  auto* sweep = app.add_subcommand("sweep", "Train across a config sweep axis");
  add_common(sweep, sweep_o);
  auto* report = app.add_subcommand("report", "Render tables for a run directory");
  report->add_option("dir", report_dir, "Run or sweep output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      protorec::cmd_prepare(load_config(prep_o), policy(prep_o));
    } else if (train->parsed()) {
      protorec::cmd_train(load_config(train_o), policy(train_o));
    } else if (evaluate->parsed()) {
      protorec::cmd_evaluate(load_config(eval_o), policy(eval_o));
    } else if (sweep->parsed()) {
      protorec::cmd_sweep(load_config(sweep_o), policy(sweep_o));
    } else if (report->parsed()) {
      std::cout << protorec::cmd_report(report_dir);
    }
  } catch (const std::exception& e) {
    return fail(app.get_subcommands().front()->get_name(), e.what());
  }
  return 0;
}
