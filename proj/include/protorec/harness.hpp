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

#ifndef PROTOREC_HARNESS_HPP_
#define PROTOREC_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "protorec/data.hpp"
#include "protorec/eval.hpp"
#include "protorec/exec.hpp"
#include "protorec/federation.hpp"

namespace protorec {

// A data source: either a synthetic world or interaction files plus a review
// embedder.
struct DataFileEntry {
  std::string path;
  FileFormat format = FileFormat::csv;
};

struct EmbedConfig {
  EmbedMode mode = EmbedMode::hashing;
  int dim = 64;
  std::uint64_t seed = 0;
  std::string path;  // precomputed-embedding file
  bool allow_projection = false;
};

// One experiment: a data source, the full training stack, a seed list, and an
// optional single sweep axis applied on top of the base configuration.
struct ExperimentConfig {
  int version = 1;
  bool synthetic = true;
  SyntheticSpec synth;
  std::vector<DataFileEntry> files;
  bool filter = true;
  EmbedConfig embed;
  TrainConfig train;
  double train_density = 1.0;  // fraction of train interactions kept
  EvalConfig eval;
  std::vector<std::uint64_t> seeds = {1};
  std::string sweep_axis;  // dotted path into the config JSON; empty = none
  std::vector<nlohmann::json> sweep_values;
  std::string out_dir = "out";
  bool save_checkpoints = true;
};

// JSON round-trip; parse(serialize(cfg)) == cfg. Parsing validates and throws
// std::invalid_argument with a field-addressed message.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

// Apply one sweep value to the config's JSON form at the dotted axis path and
// re-parse. The axis must name an existing field.
ExperimentConfig apply_sweep_value(const ExperimentConfig& base,
                                   const std::string& axis,
                                   const nlohmann::json& value);

// Build (generate or load+embed) the per-domain datasets, split with the run
// seed, and thin the train set if train_density < 1.
std::vector<DomainDataset> build_datasets(const ExperimentConfig& cfg,
                                          std::uint64_t run_seed, ExecPolicy exec);

// Verbs. Each writes its artifacts under cfg.out_dir (created if needed).
void cmd_prepare(const ExperimentConfig& cfg, ExecPolicy exec);
std::vector<EvalResult> cmd_train(const ExperimentConfig& cfg, ExecPolicy exec);
std::vector<EvalResult> cmd_evaluate(const ExperimentConfig& cfg, ExecPolicy exec);
void cmd_sweep(const ExperimentConfig& cfg, ExecPolicy exec);
// Render report.md (and sweep.csv for sweep directories) inside `dir`;
// returns the markdown.
std::string cmd_report(const std::string& dir);

}  // namespace protorec

#endif  // PROTOREC_HARNESS_HPP_
