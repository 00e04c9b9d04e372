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

#ifndef PROTOREC_PRIVACY_HPP_
#define PROTOREC_PRIVACY_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "protorec/data.hpp"
#include "protorec/la.hpp"
#include "protorec/rng.hpp"

namespace protorec {

// How the server combines one user's prototypes from multiple domains.
enum class AggregationMode { weighted, average, sum };

AggregationMode aggregation_mode_from_string(const std::string& s);
std::string to_string(AggregationMode m);

struct PrivacyConfig {
  double clip_c = 0.1;    // L2 clipping threshold C
  double noise_eta = 0.3; // Laplace scale; 0 disables noise
  int group_n = 10;       // max users pooled into one local prototype
  bool strict_groups = false;  // require identical item sets instead of overlap
  AggregationMode aggregation = AggregationMode::weighted;

  void validate() const;
  // Per-publication privacy budget 2C/eta; +infinity when eta == 0.
  double epsilon() const;
};

// A user's local prototype before/after the privacy mechanism. `user` is the
// cross-domain global index.
struct Prototype {
  int user = 0;
  int domain = 0;
  Vec vector;
};
using PrivatePrototype = Prototype;

struct GlobalPrototypeSet {
  std::map<int, Vec> entries;  // global user index -> aggregated vector
  int round = 0;
};

// Users sharing >= 1 interacted item with u, ranked by common-item count
// (ties by user index), truncated to group_n - 1 and prepended with u itself.
// strict mode instead admits only users with exactly u's item set.
std::vector<int> form_group(int u, const DomainDataset& ds, int group_n,
                            bool strict = false);

// Arithmetic mean of the group members' user-embedding rows.
Vec local_prototype(const std::vector<int>& group, const Mat& user_emb);

// clip(p, C) = p * min(1, C / |p|), then i.i.d. Laplace(0, eta) per coordinate.
PrivatePrototype ldp_publish(const Prototype& p, const PrivacyConfig& cfg, Rng& rng);

// Combine per-domain uploads into global prototypes. Weighted mode uses
// w_i = count_i(user) / total(user); a zero total is an error. Counts must
// cover every uploaded (domain, user) contribution.
GlobalPrototypeSet aggregate_global(
    const std::vector<std::vector<PrivatePrototype>>& uploads,
    const std::vector<std::map<int, long long>>& counts, AggregationMode mode,
    int round);

// Wire messages. These are the only client->server and server->client
// payloads in the simulation; serialization quantizes vectors to float32.
struct UploadMessage {
  int round = 0;
  int domain_id = 0;
  std::vector<PrivatePrototype> entries;
  std::vector<std::pair<int, long long>> counts;  // (user, interaction count)
};

struct BroadcastMessage {
  int round = 0;
  std::map<int, Vec> entries;
};

std::string upload_to_json(const UploadMessage& m);
UploadMessage upload_from_json(const std::string& text);
std::string broadcast_to_json(const BroadcastMessage& m);
BroadcastMessage broadcast_from_json(const std::string& text);

}  // namespace protorec

#endif  // PROTOREC_PRIVACY_HPP_
