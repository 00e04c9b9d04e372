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

#include "protorec/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "protorec/rng.hpp"

namespace protorec {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename T>
T field(const json& j, const std::string& path, T def) {
  // path is dotted relative to the object j was taken from; the last segment
  // is the key to read.
  const auto pos = path.rfind('.');
  const std::string key = pos == std::string::npos ? path : path.substr(pos + 1);
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for field '" + path + "'");
  }
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("config: " + msg);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

std::string fmt(double x, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }

  ExperimentConfig c;
  c.version = field<int>(j, "version", 1);
  require(c.version == 1, "unsupported config version");

  const json data = j.value("data", json::object());
  const std::string kind = field<std::string>(data, "data.kind", "synthetic");
  require(kind == "synthetic" || kind == "files",
          "data.kind must be 'synthetic' or 'files'");
  c.synthetic = kind == "synthetic";

  const json syn = data.value("synthetic", json::object());
  c.synth.n_users = field<int>(syn, "data.synthetic.n_users", c.synth.n_users);
  c.synth.n_items_per_domain =
      field<int>(syn, "data.synthetic.n_items_per_domain", c.synth.n_items_per_domain);
  c.synth.n_domains = field<int>(syn, "data.synthetic.n_domains", c.synth.n_domains);
  c.synth.latent_dim = field<int>(syn, "data.synthetic.latent_dim", c.synth.latent_dim);
  c.synth.density = field<double>(syn, "data.synthetic.density", c.synth.density);
  c.synth.overlap_fraction = field<double>(syn, "data.synthetic.overlap_fraction",
                                           c.synth.overlap_fraction);
  c.synth.seed = field<std::uint64_t>(syn, "data.synthetic.seed", c.synth.seed);
  c.synth.review_dim = field<int>(syn, "data.synthetic.review_dim", -1);
  c.synth.review_noise =
      field<double>(syn, "data.synthetic.review_noise", c.synth.review_noise);
  c.synth.sharpness =
      field<double>(syn, "data.synthetic.sharpness", c.synth.sharpness);
  c.synth.affinity_offset = field<double>(syn, "data.synthetic.affinity_offset",
                                          c.synth.affinity_offset);

  if (data.contains("files")) {
    for (const auto& f : data.at("files")) {
      DataFileEntry e;
      e.path = field<std::string>(f, "data.files[].path", "");
      require(!e.path.empty(), "data.files[].path must be set");
      const std::string format = field<std::string>(f, "data.files[].format", "csv");
      require(format == "csv" || format == "jsonl",
              "data.files[].format must be 'csv' or 'jsonl'");
      e.format = format == "csv" ? FileFormat::csv : FileFormat::jsonl;
      c.files.push_back(std::move(e));
    }
  }
  require(c.synthetic || !c.files.empty(), "data.files must be non-empty");
  c.filter = field<bool>(data, "data.filter", true);

  const json emb = data.value("embed", json::object());
  const std::string mode = field<std::string>(emb, "data.embed.mode", "hashing");
  require(mode == "hashing" || mode == "precomputed",
          "data.embed.mode must be 'hashing' or 'precomputed'");
  c.embed.mode = mode == "hashing" ? EmbedMode::hashing : EmbedMode::precomputed;
  c.embed.dim = field<int>(emb, "data.embed.dim", -1);
  c.embed.seed = field<std::uint64_t>(emb, "data.embed.seed", 0);
  c.embed.path = field<std::string>(emb, "data.embed.path", "");
  c.embed.allow_projection = field<bool>(emb, "data.embed.allow_projection", false);
  require(c.embed.mode == EmbedMode::hashing || !c.embed.path.empty(),
          "data.embed.path required for precomputed embeddings");

  const json model = j.value("model", json::object());
  c.train.embed_dim = field<int>(model, "model.embed_dim", 256);
  require(c.train.embed_dim >= 1, "model.embed_dim must be >= 1");
  c.train.hidden = field<std::vector<int>>(model, "model.hidden", {128, 64});
  for (int h : c.train.hidden) require(h >= 1, "model.hidden entries must be >= 1");
  c.train.lr = field<double>(model, "model.lr", 0.001);
  require(c.train.lr > 0.0, "model.lr must be > 0");

  // Review embeddings feed the contrastive terms, which take their cosine
  // against ID embeddings, so both spaces must share the model dimension.
  // Omitted (or -1) means "use model.embed_dim".
  if (c.synth.review_dim <= 0) c.synth.review_dim = c.train.embed_dim;
  require(c.synth.review_dim == c.train.embed_dim,
          "data.synthetic.review_dim must equal model.embed_dim (or be omitted)");
  if (c.embed.dim <= 0) c.embed.dim = c.train.embed_dim;
  require(c.embed.dim == c.train.embed_dim,
          "data.embed.dim must equal model.embed_dim (or be omitted)");

  const json loss = j.value("loss", json::object());
  c.train.loss.tau = field<double>(loss, "loss.tau", 0.1);
  require(c.train.loss.tau > 0.0, "loss.tau must be > 0");
  c.train.loss.gamma = field<double>(loss, "loss.gamma", 0.2);
  require(c.train.loss.gamma >= 0.0, "loss.gamma must be >= 0");
  c.train.loss.alpha = field<double>(loss, "loss.alpha", 0.05);
  require(c.train.loss.alpha >= 0.0, "loss.alpha must be >= 0");
  c.train.loss.batch_negatives = field<int>(loss, "loss.batch_negatives", 0);
  c.train.loss.full_set_negatives = field<bool>(loss, "loss.full_set_negatives", false);

  const json interp = j.value("interp", json::object());
  c.train.interp.mu = field<double>(interp, "interp.mu", 0.7);
  c.train.interp.sigma = field<double>(interp, "interp.sigma", 0.1);
  c.train.interp.threshold = field<double>(interp, "interp.threshold", 0.5);
  c.train.interp.top_t = field<int>(interp, "interp.top_t", 4);
  c.train.interp.neg_samples = field<int>(interp, "interp.neg_samples", 4);
  try {
    c.train.interp.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: interp: ") + e.what());
  }

  const json priv = j.value("privacy", json::object());
  c.train.privacy.clip_c = field<double>(priv, "privacy.clip_c", 0.1);
  c.train.privacy.noise_eta = field<double>(priv, "privacy.noise_eta", 0.3);
  c.train.privacy.group_n = field<int>(priv, "privacy.group_n", 10);
  c.train.privacy.strict_groups = field<bool>(priv, "privacy.strict_groups", false);
  try {
    c.train.privacy.aggregation = aggregation_mode_from_string(
        field<std::string>(priv, "privacy.aggregation", "weighted"));
    c.train.privacy.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: privacy: ") + e.what());
  }

  const json fed = j.value("federation", json::object());
  c.train.fed.rounds = field<int>(fed, "federation.rounds", 1);
  c.train.fed.local_epochs = field<int>(fed, "federation.local_epochs", 1);
  c.train.fed.batch_size = field<int>(fed, "federation.batch_size", 128);
  const std::string omode = field<std::string>(fed, "federation.overlap_mode", "full");
  require(omode == "full" || omode == "partial",
          "federation.overlap_mode must be 'full' or 'partial'");
  c.train.fed.overlap_mode =
      omode == "full" ? OverlapMode::full : OverlapMode::partial;
  c.train.fed.surrogate_k = field<int>(fed, "federation.surrogate_k", 3);
  c.train.fed.num_domains =
      c.synthetic ? c.synth.n_domains : static_cast<int>(c.files.size());
  try {
    c.train.fed.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: federation: ") + e.what());
  }

  try {
    c.train.variant = variant_from_string(field<std::string>(j, "variant", "full"));
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: variant: ") + e.what());
  }

  c.train_density = field<double>(j, "train_density", 1.0);
  require(c.train_density > 0.0 && c.train_density <= 1.0,
          "train_density must be in (0,1]");

  const json ev = j.value("eval", json::object());
  c.eval.cutoffs = field<std::vector<int>>(ev, "eval.cutoffs", {5, 10});
  require(!c.eval.cutoffs.empty(), "eval.cutoffs must be non-empty");
  for (int n : c.eval.cutoffs) require(n >= 1, "eval.cutoffs entries must be >= 1");
  c.eval.mixed_inference = field<bool>(ev, "eval.mixed_inference", false);
  c.eval.interp = c.train.interp;

  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds", {1});
  require(!c.seeds.empty(), "seeds must be non-empty");

  const json sweep = j.value("sweep", json::object());
  c.sweep_axis = field<std::string>(sweep, "sweep.axis", "");
  if (sweep.contains("values"))
    for (const auto& v : sweep.at("values")) c.sweep_values.push_back(v);
  require(c.sweep_axis.empty() || !c.sweep_values.empty(),
          "sweep.values must be non-empty when sweep.axis is set");

  c.out_dir = field<std::string>(j, "out_dir", "out");
  require(!c.out_dir.empty(), "out_dir must be non-empty");
  c.save_checkpoints = field<bool>(j, "save_checkpoints", true);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = c.version;
  json syn{{"n_users", c.synth.n_users},
           {"n_items_per_domain", c.synth.n_items_per_domain},
           {"n_domains", c.synth.n_domains},
           {"latent_dim", c.synth.latent_dim},
           {"density", c.synth.density},
           {"overlap_fraction", c.synth.overlap_fraction},
           {"seed", c.synth.seed},
           {"review_dim", c.synth.review_dim},
           {"review_noise", c.synth.review_noise},
           {"sharpness", c.synth.sharpness},
           {"affinity_offset", c.synth.affinity_offset}};
  json files = json::array();
  for (const auto& f : c.files)
    files.push_back({{"path", f.path},
                     {"format", f.format == FileFormat::csv ? "csv" : "jsonl"}});
  j["data"] = {{"kind", c.synthetic ? "synthetic" : "files"},
               {"synthetic", syn},
               {"files", files},
               {"filter", c.filter},
               {"embed",
                {{"mode", c.embed.mode == EmbedMode::hashing ? "hashing" : "precomputed"},
                 {"dim", c.embed.dim},
                 {"seed", c.embed.seed},
                 {"path", c.embed.path},
                 {"allow_projection", c.embed.allow_projection}}}};
  j["model"] = {{"embed_dim", c.train.embed_dim},
                {"hidden", c.train.hidden},
                {"lr", c.train.lr}};
  j["loss"] = {{"tau", c.train.loss.tau},
               {"gamma", c.train.loss.gamma},
               {"alpha", c.train.loss.alpha},
               {"batch_negatives", c.train.loss.batch_negatives},
               {"full_set_negatives", c.train.loss.full_set_negatives}};
  j["interp"] = {{"mu", c.train.interp.mu},
                 {"sigma", c.train.interp.sigma},
                 {"threshold", c.train.interp.threshold},
                 {"top_t", c.train.interp.top_t},
                 {"neg_samples", c.train.interp.neg_samples}};
  j["privacy"] = {{"clip_c", c.train.privacy.clip_c},
                  {"noise_eta", c.train.privacy.noise_eta},
                  {"group_n", c.train.privacy.group_n},
                  {"strict_groups", c.train.privacy.strict_groups},
                  {"aggregation", to_string(c.train.privacy.aggregation)}};
  j["federation"] = {
      {"rounds", c.train.fed.rounds},
      {"local_epochs", c.train.fed.local_epochs},
      {"batch_size", c.train.fed.batch_size},
      {"overlap_mode",
       c.train.fed.overlap_mode == OverlapMode::full ? "full" : "partial"},
      {"surrogate_k", c.train.fed.surrogate_k}};
  j["variant"] = to_string(c.train.variant);
  j["train_density"] = c.train_density;
  j["eval"] = {{"cutoffs", c.eval.cutoffs},
               {"mixed_inference", c.eval.mixed_inference}};
  j["seeds"] = c.seeds;
  j["sweep"] = {{"axis", c.sweep_axis}, {"values", c.sweep_values}};
  j["out_dir"] = c.out_dir;
  j["save_checkpoints"] = c.save_checkpoints;
  return j.dump(2);
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base,
                                   const std::string& axis, const json& value) {
  json j = json::parse(config_to_json(base));
  json* node = &j;
  std::istringstream ss(axis);
  std::string segment;
  std::vector<std::string> segments;
  while (std::getline(ss, segment, '.')) segments.push_back(segment);
  if (segments.empty())
    throw std::invalid_argument("config: sweep axis must be non-empty");
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    if (!node->contains(segments[i]))
      throw std::invalid_argument("config: sweep axis references unknown field: " +
                                  axis);
    node = &(*node)[segments[i]];
  }
  if (!node->contains(segments.back()))
    throw std::invalid_argument("config: sweep axis references unknown field: " +
                                axis);
  (*node)[segments.back()] = value;
  return config_from_json(j.dump());
}

std::vector<DomainDataset> build_datasets(const ExperimentConfig& cfg,
                                          std::uint64_t run_seed, ExecPolicy exec) {
  std::vector<DomainDataset> out;
  if (cfg.synthetic) {
    out = generate_synthetic(cfg.synth);
  } else {
    for (std::size_t i = 0; i < cfg.files.size(); ++i) {
      DomainDataset ds = load_domain(cfg.files[i].path, cfg.files[i].format,
                                     cfg.filter);
      ds.domain_id = static_cast<int>(i);
      embed_reviews(ds, cfg.embed.mode, cfg.embed.dim, cfg.embed.seed,
                    cfg.embed.path, cfg.embed.allow_projection, exec);
      out.push_back(std::move(ds));
    }
  }
  assign_global_user_indices(out);
  for (auto& ds : out) {
    split_leave_one_out(ds, mix_key({run_seed, 0x73706c6974ULL}));
    if (cfg.train_density < 1.0)
      apply_density(ds, cfg.train_density, mix_key({run_seed, 0x64656e73ULL}));
  }
  return out;
}

void cmd_prepare(const ExperimentConfig& cfg, ExecPolicy exec) {
  fs::create_directories(cfg.out_dir);
  fs::create_directories(cfg.out_dir + "/datasets");
  write_file(cfg.out_dir + "/config.json", config_to_json(cfg));

  const auto datasets = build_datasets(cfg, cfg.seeds.front(), exec);
  json manifest;
  manifest["split_seed"] = cfg.seeds.front();
  json doms = json::array();
  for (const auto& ds : datasets) {
    const std::string path =
        cfg.out_dir + "/datasets/domain" + std::to_string(ds.domain_id) + ".json";
    save_dataset(ds, path);
    doms.push_back({{"domain", ds.domain_id},
                    {"path", path},
                    {"digest", dataset_digest(ds)},
                    {"users", ds.n_users()},
                    {"items", ds.n_items()},
                    {"train_pairs", ds.train_pairs.size()},
                    {"test_pairs", ds.test_pairs.size()},
                    {"split_skipped_users", ds.split_skipped_users}});
  }
  manifest["domains"] = doms;
  write_file(cfg.out_dir + "/prepare_manifest.json", manifest.dump(2));
}

namespace {

std::string checkpoint_path(const std::string& out_dir, int run, int domain) {
  return out_dir + "/checkpoints/run" + std::to_string(run) + "_domain" +
         std::to_string(domain) + ".ckpt";
}

}  // namespace

std::vector<EvalResult> cmd_train(const ExperimentConfig& cfg, ExecPolicy exec) {
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/config.json", config_to_json(cfg));
  if (cfg.save_checkpoints) fs::create_directories(cfg.out_dir + "/checkpoints");

  std::vector<EvalResult> results;
  json manifest;
  manifest["config"] = json::parse(config_to_json(cfg));
  json runs = json::array();

  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
    const std::uint64_t seed = cfg.seeds[k];
    json run_entry;
    run_entry["run_index"] = k;
    run_entry["seed"] = seed;
    try {
      const double t0 = now_seconds();
      auto datasets = build_datasets(cfg, seed, exec);
      json digests = json::array();
      for (const auto& ds : datasets)
        digests.push_back({{"domain", ds.domain_id}, {"digest", dataset_digest(ds)}});
      run_entry["digests"] = digests;
      const double t1 = now_seconds();

      TrainConfig tc = cfg.train;
      tc.fed.seed = seed;
      tc.fed.num_domains = static_cast<int>(datasets.size());

      std::ofstream telemetry(cfg.out_dir + "/telemetry_run" + std::to_string(k) +
                              ".jsonl");
      FederationHooks hooks;
      hooks.telemetry = [&telemetry](const std::string& line) {
        telemetry << line << '\n';
      };

      FederationResult fed = run_federation(tc, std::move(datasets), hooks, exec);
      const double t2 = now_seconds();

      EvalResult res;
      res.seed = seed;
      res.run_index = static_cast<int>(k);
      for (const auto& client : fed.clients)
        res.domains.push_back(
            evaluate_domain(client.params, client.data, cfg.eval, exec));
      results.push_back(res);
      const double t3 = now_seconds();

      json rounds = json::array();
      for (const auto& r : fed.rounds)
        rounds.push_back({{"round", r.round},
                          {"upload_bytes", r.upload_bytes},
                          {"broadcast_bytes", r.broadcast_bytes},
                          {"train_seconds", r.train_seconds}});
      run_entry["rounds"] = rounds;
      run_entry["prepare_seconds"] = t1 - t0;
      run_entry["train_seconds"] = t2 - t1;
      run_entry["eval_seconds"] = t3 - t2;

      if (cfg.save_checkpoints) {
        json ckpts = json::array();
        for (const auto& client : fed.clients) {
          const std::string path = checkpoint_path(
              cfg.out_dir, static_cast<int>(k), client.data.domain_id);
          json extra{{"seed", seed},
                     {"round", tc.fed.rounds},
                     {"domain", client.data.domain_id},
                     {"variant", to_string(cfg.train.variant)}};
          save_checkpoint(client.params, path, extra.dump());
          ckpts.push_back(path);
        }
        run_entry["checkpoints"] = ckpts;
      }
      runs.push_back(run_entry);
    } catch (const std::exception& e) {
      // Preserve what completed, mark the failure, and surface the error.
      run_entry["error"] = e.what();
      runs.push_back(run_entry);
      manifest["runs"] = runs;
      manifest["failed"] = true;
      write_file(cfg.out_dir + "/manifest.json", manifest.dump(2));
      if (!results.empty())
        write_results_csv(cfg.out_dir + "/results.csv", results);
      write_file(cfg.out_dir + "/FAILED.json",
                 json{{"run_index", k}, {"seed", seed}, {"error", e.what()}}.dump(2));
      throw;
    }
  }

  manifest["runs"] = runs;
  write_file(cfg.out_dir + "/manifest.json", manifest.dump(2));
  write_results_csv(cfg.out_dir + "/results.csv", results);
  write_file(cfg.out_dir + "/aggregate.json", aggregate_json(results));
  return results;
}

std::vector<EvalResult> cmd_evaluate(const ExperimentConfig& cfg, ExecPolicy exec) {
  std::vector<EvalResult> results;
  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
    const std::uint64_t seed = cfg.seeds[k];
    auto datasets = build_datasets(cfg, seed, exec);

    EvalResult res;
    res.seed = seed;
    res.run_index = static_cast<int>(k);
    for (const auto& ds : datasets) {
      const std::string path =
          checkpoint_path(cfg.out_dir, static_cast<int>(k), ds.domain_id);
      if (!fs::exists(path))
        throw std::runtime_error("evaluate: missing checkpoint " + path +
                                 " (run train with save_checkpoints first)");
      const ModelParams params = load_checkpoint(path);
      res.domains.push_back(evaluate_domain(params, ds, cfg.eval, exec));
    }
    results.push_back(res);
  }
  write_results_csv(cfg.out_dir + "/results.csv", results);
  write_file(cfg.out_dir + "/aggregate.json", aggregate_json(results));
  return results;
}

void cmd_sweep(const ExperimentConfig& cfg, ExecPolicy exec) {
  if (cfg.sweep_axis.empty() || cfg.sweep_values.empty())
    throw std::invalid_argument("config: sweep requires sweep.axis and sweep.values");
  fs::create_directories(cfg.out_dir);

  json marker;
  marker["axis"] = cfg.sweep_axis;
  marker["values"] = cfg.sweep_values;
  json points = json::array();
  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i)
    points.push_back("point_" + std::to_string(i));
  marker["points"] = points;
  write_file(cfg.out_dir + "/sweep.json", marker.dump(2));

  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
    ExperimentConfig point = apply_sweep_value(cfg, cfg.sweep_axis,
                                               cfg.sweep_values[i]);
    point.sweep_axis.clear();
    point.sweep_values.clear();
    point.out_dir = cfg.out_dir + "/point_" + std::to_string(i);
    cmd_train(point, exec);
  }
  cmd_report(cfg.out_dir);
}

namespace {

// Per-domain per-metric aggregates of a run directory's results.csv.
struct DirSummary {
  // rows: (domain, metric, cutoff, mean, std)
  struct Row {
    int domain;
    std::string metric;
    int cutoff;
    double mean;
    double std;
  };
  std::vector<Row> rows;
};

DirSummary summarize_dir(const std::string& dir) {
  const auto runs = read_results_csv(dir + "/results.csv");
  std::map<std::tuple<int, std::string, int>, std::vector<double>> bucket;
  for (const auto& run : runs)
    for (const auto& dom : run.domains)
      for (const auto& m : dom.metrics)
        bucket[{dom.domain, m.metric, m.cutoff}].push_back(m.value);
  DirSummary s;
  for (const auto& [key, values] : bucket) {
    const Aggregate a = aggregate(values);
    s.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                      a.mean, a.std});
  }
  return s;
}

}  // namespace

std::string cmd_report(const std::string& dir) {
  std::ostringstream md;
  if (fs::exists(dir + "/sweep.json")) {
    const json marker = json::parse(read_file(dir + "/sweep.json"));
    const std::string axis = marker.at("axis").get<std::string>();
    md << "# Sweep report: " << axis << "\n\n";

    std::ostringstream csv;
    csv << "axis,value,domain,metric,N,mean,std,epsilon\n";
    md << "| value | domain | metric | mean | std | epsilon |\n";
    md << "|---|---|---|---|---|---|\n";
    const auto& values = marker.at("values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::string subdir =
          dir + "/" + marker.at("points")[i].get<std::string>();
      const ExperimentConfig point_cfg =
          config_from_json(read_file(subdir + "/config.json"));
      const double eps = point_cfg.train.privacy.epsilon();
      const std::string eps_s =
          std::isfinite(eps) ? fmt(eps, "%.17g") : std::string("inf");
      const DirSummary s = summarize_dir(subdir);
      for (const auto& r : s.rows) {
        const std::string value_s = values[i].dump();
        csv << axis << ',' << value_s << ',' << r.domain << ',' << r.metric
            << ',' << r.cutoff << ',' << fmt(r.mean, "%.17g") << ','
            << fmt(r.std, "%.17g") << ',' << eps_s << '\n';
        md << "| " << value_s << " | " << r.domain << " | " << r.metric << "@"
           << r.cutoff << " | " << fmt(r.mean) << " | " << fmt(r.std) << " | "
           << eps_s << " |\n";
      }
    }
    write_file(dir + "/sweep.csv", csv.str());
  } else {
    md << "# Run report\n\n";
    if (fs::exists(dir + "/config.json")) {
      const ExperimentConfig cfg = config_from_json(read_file(dir + "/config.json"));
      md << "Variant: `" << to_string(cfg.train.variant) << "`  \n";
      md << "Seeds: " << cfg.seeds.size() << "  \n";
      const double eps = cfg.train.privacy.epsilon();
      md << "Privacy budget per publication: "
         << (std::isfinite(eps) ? fmt(eps, "%.6g") : std::string("unbounded (no noise)"))
         << "\n\n";
    }
    const DirSummary s = summarize_dir(dir);
    md << "| domain | metric | mean | std |\n|---|---|---|---|\n";
    for (const auto& r : s.rows)
      md << "| " << r.domain << " | " << r.metric << "@" << r.cutoff << " | "
         << fmt(r.mean) << " | " << fmt(r.std) << " |\n";
  }
  const std::string text = md.str();
  write_file(dir + "/report.md", text);
  return text;
}

}  // namespace protorec
