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

#include "protorec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace protorec {

namespace {

using json = nlohmann::json;

double cosine(std::span<const double> x, std::span<const double> y) {
  const double nx = nrm2(x);
  const double ny = nrm2(y);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot(x, y) / (nx * ny);
}

// Mixed-inference item vector: blend the candidate with the mean embedding of
// its most review-similar non-interacted items, deterministic beta = mu.
Vec mixed_item_vec(const ModelParams& p, const DomainDataset& ds, int user,
                   int item, const InterpolationConfig& interp) {
  std::vector<PotentialEntry> found;
  if (nrm2(ds.item_review_emb.row_span(item)) > 0.0) {
    const auto anchor = ds.item_review_emb.row_span(item);
    for (int c = 0; c < ds.n_items(); ++c) {
      if (c == item || ds.user_interacted(user, c)) continue;
      if (nrm2(ds.item_review_emb.row_span(c)) == 0.0) continue;
      const double s = cosine(anchor, ds.item_review_emb.row_span(c));
      if (s >= interp.threshold) found.push_back({c, s});
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.item < b.item;
    });
    if (static_cast<int>(found.size()) > interp.top_t) found.resize(interp.top_t);
  }
  Vec out(p.item_emb.row_span(item).begin(), p.item_emb.row_span(item).end());
  if (found.empty()) return out;
  scale_inplace(interp.mu, out);
  const double share = (1.0 - interp.mu) / static_cast<double>(found.size());
  for (const auto& e : found) axpy(share, p.item_emb.row_span(e.item), out);
  return out;
}

}  // namespace

std::vector<int> score_candidates(const ModelParams& p, const DomainDataset& ds,
                                  int user, const std::vector<int>& candidates,
                                  const EvalConfig& cfg) {
  const auto urow = p.user_emb.row_span(user);
  std::vector<std::pair<double, int>> scored;
  scored.reserve(candidates.size());
  for (int v : candidates) {
    double s;
    if (cfg.mixed_inference) {
      const Vec item = mixed_item_vec(p, ds, user, v, cfg.interp);
      s = predict(p, urow, item);
    } else {
      s = predict(p, urow, p.item_emb.row_span(v));
    }
    scored.emplace_back(s, v);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  out.reserve(scored.size());
  for (const auto& [s, v] : scored) out.push_back(v);
  return out;
}

double hit_rate(int rank, int cutoff) { return rank <= cutoff ? 1.0 : 0.0; }

double ndcg(int rank, int cutoff) {
  if (rank > cutoff) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

DomainEval evaluate_domain(const ModelParams& p, const DomainDataset& ds,
                           const EvalConfig& cfg, ExecPolicy exec) {
  const int n = static_cast<int>(ds.test_pairs.size());
  if (n == 0) throw std::runtime_error("evaluate_domain: no test users");
  if (ds.eval_negatives.size() != ds.test_pairs.size())
    throw std::runtime_error("evaluate_domain: negatives misaligned with test pairs");

  std::vector<int> ranks(n, 0);
  par_for(exec, n, [&](int i) {
    const auto [u, pos] = ds.test_pairs[i];
    std::vector<int> candidates;
    candidates.reserve(1 + ds.eval_negatives[i].size());
    candidates.push_back(pos);
    candidates.insert(candidates.end(), ds.eval_negatives[i].begin(),
                      ds.eval_negatives[i].end());
    const auto ranked = score_candidates(p, ds, u, candidates, cfg);
    const auto it = std::find(ranked.begin(), ranked.end(), pos);
    ranks[i] = static_cast<int>(it - ranked.begin()) + 1;
  });

  DomainEval out;
  out.domain = ds.domain_id;
  out.n_users = n;
  for (int cutoff : cfg.cutoffs) {
    double hr_sum = 0.0;
    double ndcg_sum = 0.0;
    for (int r : ranks) {
      hr_sum += hit_rate(r, cutoff);
      ndcg_sum += ndcg(r, cutoff);
    }
    out.metrics.push_back({"hr", cutoff, hr_sum / n});
    out.metrics.push_back({"ndcg", cutoff, ndcg_sum / n});
  }
  return out;
}

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return a;
  double ss = 0.0;
  for (double x : xs) ss += (x - a.mean) * (x - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return a;
}

void write_results_csv(const std::string& path, const std::vector<EvalResult>& runs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "run,domain,metric,N,value\n";
  char buf[64];
  for (const auto& run : runs) {
    for (const auto& dom : run.domains) {
      for (const auto& m : dom.metrics) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.value);
        out << run.run_index << ',' << dom.domain << ',' << m.metric << ','
            << m.cutoff << ',' << buf << '\n';
      }
    }
  }
}

std::vector<EvalResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "run,domain,metric,N,value")
    throw std::runtime_error(path + ": unexpected results header");

  std::map<int, EvalResult> by_run;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string run_s, dom_s, metric, n_s, val_s;
    if (!std::getline(ss, run_s, ',') || !std::getline(ss, dom_s, ',') ||
        !std::getline(ss, metric, ',') || !std::getline(ss, n_s, ',') ||
        !std::getline(ss, val_s))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad row");
    const int run = std::stoi(run_s);
    const int dom = std::stoi(dom_s);
    auto& res = by_run[run];
    res.run_index = run;
    DomainEval* de = nullptr;
    for (auto& d : res.domains)
      if (d.domain == dom) de = &d;
    if (!de) {
      res.domains.push_back({dom, 0, {}});
      de = &res.domains.back();
    }
    de->metrics.push_back({metric, std::stoi(n_s), std::stod(val_s)});
  }
  std::vector<EvalResult> out;
  for (auto& [run, res] : by_run) out.push_back(std::move(res));
  return out;
}

std::string aggregate_json(const std::vector<EvalResult>& runs) {
  // (domain, metric, cutoff) -> values across runs
  std::map<int, std::map<std::string, std::vector<double>>> bucket;
  for (const auto& run : runs)
    for (const auto& dom : run.domains)
      for (const auto& m : dom.metrics)
        bucket[dom.domain][m.metric + "@" + std::to_string(m.cutoff)].push_back(
            m.value);

  json j;
  j["n_runs"] = runs.size();
  json domains = json::object();
  for (const auto& [dom, metrics] : bucket) {
    json dj = json::object();
    for (const auto& [name, values] : metrics) {
      const Aggregate a = aggregate(values);
      dj[name] = {{"mean", a.mean}, {"std", a.std}};
    }
    domains[std::to_string(dom)] = dj;
  }
  j["domains"] = domains;
  return j.dump(2);
}

}  // namespace protorec
