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

#include "protorec/privacy.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace protorec {

namespace {

using json = nlohmann::json;

int sorted_intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  int n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

json quantized_vector(const Vec& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(static_cast<float>(x));
  return arr;
}

}  // namespace

AggregationMode aggregation_mode_from_string(const std::string& s) {
  if (s == "weighted") return AggregationMode::weighted;
  if (s == "average") return AggregationMode::average;
  if (s == "sum") return AggregationMode::sum;
  throw std::invalid_argument("unknown aggregation mode: " + s);
}

std::string to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::weighted: return "weighted";
    case AggregationMode::average: return "average";
    case AggregationMode::sum: return "sum";
  }
  return "weighted";
}

void PrivacyConfig::validate() const {
  if (!(clip_c > 0.0)) throw std::invalid_argument("privacy: clip_c must be > 0");
  if (noise_eta < 0.0) throw std::invalid_argument("privacy: noise_eta must be >= 0");
  if (group_n < 1) throw std::invalid_argument("privacy: group_n must be >= 1");
}

double PrivacyConfig::epsilon() const {
  if (noise_eta == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * clip_c / noise_eta;
}

std::vector<int> form_group(int u, const DomainDataset& ds, int group_n,
                            bool strict) {
  if (u < 0 || u >= ds.n_users())
    throw std::invalid_argument("form_group: user index out of range");
  if (group_n < 1) throw std::invalid_argument("form_group: group_n must be >= 1");

  const auto& mine = ds.user_items[u];
  std::vector<std::pair<int, int>> scored;  // (common count, user)
  for (int w = 0; w < ds.n_users(); ++w) {
    if (w == u) continue;
    if (strict) {
      if (ds.user_items[w] == mine) scored.emplace_back(static_cast<int>(mine.size()), w);
    } else {
      const int common = sorted_intersection_size(mine, ds.user_items[w]);
      if (common >= 1) scored.emplace_back(common, w);
    }
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  std::vector<int> group{u};
  for (const auto& [count, w] : scored) {
    if (static_cast<int>(group.size()) >= group_n) break;
    group.push_back(w);
  }
  return group;
}

Vec local_prototype(const std::vector<int>& group, const Mat& user_emb) {
  if (group.empty()) throw std::invalid_argument("local_prototype: empty group");
  Vec p(user_emb.cols, 0.0);
  for (int w : group) axpy(1.0, user_emb.row_span(w), p);
  scale_inplace(1.0 / static_cast<double>(group.size()), p);
  return p;
}

PrivatePrototype ldp_publish(const Prototype& p, const PrivacyConfig& cfg, Rng& rng) {
  cfg.validate();
  PrivatePrototype out;
  out.user = p.user;
  out.domain = p.domain;
  out.vector = p.vector;
  const double norm = nrm2(out.vector);
  if (norm > cfg.clip_c) scale_inplace(cfg.clip_c / norm, out.vector);
  for (double& x : out.vector) x += rng.laplace(cfg.noise_eta);
  return out;
}

GlobalPrototypeSet aggregate_global(
    const std::vector<std::vector<PrivatePrototype>>& uploads,
    const std::vector<std::map<int, long long>>& counts, AggregationMode mode,
    int round) {
  if (uploads.size() != counts.size())
    throw std::invalid_argument("aggregate_global: uploads/counts size mismatch");

  struct Contribution {
    const Vec* vector;
    long long count;
  };
  std::map<int, std::vector<Contribution>> by_user;
  for (std::size_t d = 0; d < uploads.size(); ++d) {
    for (const auto& p : uploads[d]) {
      auto it = counts[d].find(p.user);
      if (it == counts[d].end())
        throw std::runtime_error("aggregate_global: missing interaction count for user " +
                                 std::to_string(p.user) + " in domain " +
                                 std::to_string(d));
      by_user[p.user].push_back({&p.vector, it->second});
    }
  }

  GlobalPrototypeSet g;
  g.round = round;
  for (const auto& [user, contribs] : by_user) {
    const std::size_t dim = contribs.front().vector->size();
    Vec acc(dim, 0.0);
    switch (mode) {
      case AggregationMode::weighted: {
        long long total = 0;
        for (const auto& c : contribs) total += c.count;
        if (total <= 0)
          throw std::runtime_error(
              "aggregate_global: total interaction count is 0 for user " +
              std::to_string(user));
        for (const auto& c : contribs)
          axpy(static_cast<double>(c.count) / static_cast<double>(total),
               *c.vector, acc);
        break;
      }
      case AggregationMode::average:
        for (const auto& c : contribs)
          axpy(1.0 / static_cast<double>(contribs.size()), *c.vector, acc);
        break;
      case AggregationMode::sum:
        for (const auto& c : contribs) axpy(1.0, *c.vector, acc);
        break;
    }
    g.entries[user] = std::move(acc);
  }
  return g;
}

std::string upload_to_json(const UploadMessage& m) {
  json j;
  j["round"] = m.round;
  j["domain_id"] = m.domain_id;
  json entries = json::array();
  for (const auto& p : m.entries)
    entries.push_back({{"user", p.user}, {"vector", quantized_vector(p.vector)}});
  j["entries"] = entries;
  json counts = json::array();
  for (const auto& [user, n] : m.counts)
    counts.push_back({{"user", user}, {"n", n}});
  j["counts"] = counts;
  return j.dump();
}

UploadMessage upload_from_json(const std::string& text) {
  const json j = json::parse(text);
  UploadMessage m;
  m.round = j.at("round").get<int>();
  m.domain_id = j.at("domain_id").get<int>();
  for (const auto& e : j.at("entries")) {
    PrivatePrototype p;
    p.user = e.at("user").get<int>();
    p.domain = m.domain_id;
    p.vector = e.at("vector").get<Vec>();
    m.entries.push_back(std::move(p));
  }
  for (const auto& c : j.at("counts"))
    m.counts.emplace_back(c.at("user").get<int>(), c.at("n").get<long long>());
  return m;
}

std::string broadcast_to_json(const BroadcastMessage& m) {
  json j;
  j["round"] = m.round;
  json entries = json::array();
  for (const auto& [user, vec] : m.entries)
    entries.push_back({{"user", user}, {"vector", quantized_vector(vec)}});
  j["entries"] = entries;
  return j.dump();
}

BroadcastMessage broadcast_from_json(const std::string& text) {
  const json j = json::parse(text);
  BroadcastMessage m;
  m.round = j.at("round").get<int>();
  for (const auto& e : j.at("entries"))
    m.entries[e.at("user").get<int>()] = e.at("vector").get<Vec>();
  return m;
}

}  // namespace protorec
