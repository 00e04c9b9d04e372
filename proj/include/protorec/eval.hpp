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

#ifndef PROTOREC_EVAL_HPP_
#define PROTOREC_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "protorec/data.hpp"
#include "protorec/exec.hpp"
#include "protorec/model.hpp"
#include "protorec/potential.hpp"

namespace protorec {

struct EvalConfig {
  std::vector<int> cutoffs = {5, 10};
  // Study flag: blend each candidate with on-the-fly mined neighbors
  // (deterministic, beta = interp.mu) instead of scoring the raw item.
  bool mixed_inference = false;
  InterpolationConfig interp;
};

struct MetricValue {
  std::string metric;  // "hr" or "ndcg"
  int cutoff = 0;
  double value = 0.0;
};

struct DomainEval {
  int domain = 0;
  int n_users = 0;
  std::vector<MetricValue> metrics;
};

struct EvalResult {
  std::vector<DomainEval> domains;
  std::uint64_t seed = 0;
  int run_index = 0;
};

// Candidate item indices sorted by descending predicted score, ties broken by
// ascending item index.
std::vector<int> score_candidates(const ModelParams& p, const DomainDataset& ds,
                                  int user, const std::vector<int>& candidates,
                                  const EvalConfig& cfg);

// Single-relevant-item metrics for a 1-based rank.
double hit_rate(int rank, int cutoff);
double ndcg(int rank, int cutoff);

// Leave-one-out evaluation over every test pair: the held-out item is ranked
// against its 99 sampled negatives. Throws if there are no test users.
DomainEval evaluate_domain(const ModelParams& p, const DomainDataset& ds,
                           const EvalConfig& cfg, ExecPolicy exec = ExecPolicy::serial);

// Sample mean and (n-1)-normalized standard deviation; std is 0 for n < 2.
struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
};
Aggregate aggregate(const std::vector<double>& xs);

// Results table: header run,domain,metric,N,value; one row per metric per
// domain per run. Formatting is fixed (%.17g) so identical results give
// byte-identical files.
void write_results_csv(const std::string& path, const std::vector<EvalResult>& runs);
std::vector<EvalResult> read_results_csv(const std::string& path);

// Per-domain, per-metric mean/std across runs, as a JSON object string.
std::string aggregate_json(const std::vector<EvalResult>& runs);

}  // namespace protorec

#endif  // PROTOREC_EVAL_HPP_
