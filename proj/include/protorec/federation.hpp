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

#ifndef PROTOREC_FEDERATION_HPP_
#define PROTOREC_FEDERATION_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "protorec/data.hpp"
#include "protorec/exec.hpp"
#include "protorec/losses.hpp"
#include "protorec/model.hpp"
#include "protorec/potential.hpp"
#include "protorec/privacy.hpp"

namespace protorec {

enum class OverlapMode { full, partial };

// Which part of the objective (or privacy pipeline) is switched off/replaced.
enum class Variant {
  full,         // complete objective
  wo_intra_cl,  // no intra-domain alignment
  intra_sum,    // intra alignment replaced by (e + h)/2 fusion
  wo_inter_cl,  // no cross-domain alignment
  inter_sum,    // cross alignment replaced by (e + g)/2 fusion
  wo_pi,        // no latent-interest mixing: items enter raw
  rand_sam,     // mining replaced by uniform random sampling
  wo_ldp,       // prototypes uploaded without clip + noise
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct FederationConfig {
  int rounds = 1;
  int local_epochs = 1;    // 0 is allowed: prototypes of the untrained model
  int batch_size = 128;
  int num_domains = 1;
  std::uint64_t seed = 0;
  OverlapMode overlap_mode = OverlapMode::full;
  int surrogate_k = 3;     // neighbors averaged for non-overlapping users

  void validate() const;
};

// Everything one training run needs.
struct TrainConfig {
  int embed_dim = 256;
  std::vector<int> hidden = {128, 64};
  double lr = 0.001;
  LossConfig loss;
  InterpolationConfig interp;
  PrivacyConfig privacy;
  FederationConfig fed;
  Variant variant = Variant::full;
};

struct ClientState {
  DomainDataset data;
  ModelParams params;
  OptimizerState opt;
  PotentialItemIndex potential;
  GlobalPrototypeSet received;      // latest broadcast, keyed by global index
  std::uint64_t client_seed = 0;
  std::set<int> overlap_users;      // local indices of cross-domain users
  std::map<int, int> global_to_local;
  int intra_batches_skipped = 0;    // batches too small for in-batch negatives
  int inter_users_excluded = 0;     // partial mode: users with no surrogate
};

struct RoundStats {
  int round = 0;
  std::size_t upload_bytes = 0;
  std::size_t broadcast_bytes = 0;
  double train_seconds = 0.0;
};

struct FederationResult {
  std::vector<ClientState> clients;
  std::vector<RoundStats> rounds;
};

// Observation hooks; any may be empty. Telemetry receives one JSON line per
// trained batch: {round, domain, epoch, l_prd, l_intra_u, l_intra_v, l_inter,
// total}.
struct FederationHooks {
  std::function<void(const std::string&)> telemetry;
  std::function<void(const UploadMessage&, const std::string&)> on_upload;
  std::function<void(const BroadcastMessage&, const std::string&)> on_broadcast;
};

// Prepare a client: model init, mining, seed derivation. `datasets` must have
// global user indices assigned beforehand.
ClientState make_client(DomainDataset ds, const TrainConfig& cfg,
                        const std::set<int>& overlap_globals, ExecPolicy exec);

// One round of local work: E epochs of mini-batch training against the last
// received prototype set, then group/prototype computation and (unless
// wo_ldp) the privacy mechanism. Returns the prototypes to upload.
std::vector<PrivatePrototype> local_update(ClientState& client,
                                           const TrainConfig& cfg, int round,
                                           const FederationHooks& hooks,
                                           ExecPolicy exec);

// Synchronous-round driver: every round all clients run local_update, the
// server aggregates, and the result is broadcast. Messages travel through
// their JSON wire forms (so vectors are float32-quantized in transit).
FederationResult run_federation(const TrainConfig& cfg,
                                std::vector<DomainDataset> datasets,
                                const FederationHooks& hooks = {},
                                ExecPolicy exec = ExecPolicy::serial);

// Partial-overlap fallback: surrogate prototype for a user absent from G,
// built from the global prototypes of the k overlapping users whose local
// prototypes are most similar. Returns false if the domain has no overlapping
// users with global prototypes.
bool resolve_prototype_partial(int user, const std::map<int, Vec>& local_protos,
                               const ClientState& client, int k, Vec* out);

}  // namespace protorec

#endif  // PROTOREC_FEDERATION_HPP_
