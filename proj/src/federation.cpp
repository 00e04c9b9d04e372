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

#include "protorec/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "protorec/rng.hpp"

namespace protorec {

namespace {

using json = nlohmann::json;

double cosine_or_zero(std::span<const double> x, std::span<const double> y) {
  const double nx = nrm2(x);
  const double ny = nrm2(y);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot(x, y) / (nx * ny);
}

double effective_gamma(const TrainConfig& cfg) {
  return (cfg.variant == Variant::wo_intra_cl || cfg.variant == Variant::intra_sum)
             ? 0.0
             : cfg.loss.gamma;
}

double effective_alpha(const TrainConfig& cfg) {
  return (cfg.variant == Variant::wo_inter_cl || cfg.variant == Variant::inter_sum)
             ? 0.0
             : cfg.loss.alpha;
}

std::vector<int> dedup(std::vector<int> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

// Local prototypes for every user of the domain (used only by the
// partial-overlap surrogate path; never leaves the client un-noised).
std::map<int, Vec> all_local_prototypes(const ClientState& client,
                                        const TrainConfig& cfg) {
  std::map<int, Vec> out;
  for (int u = 0; u < client.data.n_users(); ++u) {
    const auto group = form_group(u, client.data, cfg.privacy.group_n,
                                  cfg.privacy.strict_groups);
    out[u] = local_prototype(group, client.params.user_emb);
  }
  return out;
}

}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "wo_intra_cl") return Variant::wo_intra_cl;
  if (s == "intra_sum") return Variant::intra_sum;
  if (s == "wo_inter_cl") return Variant::wo_inter_cl;
  if (s == "inter_sum") return Variant::inter_sum;
  if (s == "wo_pi") return Variant::wo_pi;
  if (s == "rand_sam") return Variant::rand_sam;
  if (s == "wo_ldp") return Variant::wo_ldp;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::wo_intra_cl: return "wo_intra_cl";
    case Variant::intra_sum: return "intra_sum";
    case Variant::wo_inter_cl: return "wo_inter_cl";
    case Variant::inter_sum: return "inter_sum";
    case Variant::wo_pi: return "wo_pi";
    case Variant::rand_sam: return "rand_sam";
    case Variant::wo_ldp: return "wo_ldp";
  }
  return "full";
}

void FederationConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("federation: rounds must be >= 1");
  if (local_epochs < 0)
    throw std::invalid_argument("federation: local_epochs must be >= 0");
  if (batch_size < 2)
    throw std::invalid_argument(
        "federation: batch_size must be >= 2 (in-batch negatives)");
  if (num_domains < 1)
    throw std::invalid_argument("federation: num_domains must be >= 1");
  if (surrogate_k < 1)
    throw std::invalid_argument("federation: surrogate_k must be >= 1");
}

ClientState make_client(DomainDataset ds, const TrainConfig& cfg,
                        const std::set<int>& overlap_globals, ExecPolicy exec) {
  if (cfg.embed_dim <= 0)
    throw std::invalid_argument("make_client: embed_dim must be > 0");
  if (ds.train_pairs.empty())
    throw std::runtime_error("make_client: dataset has no training pairs (split first)");

  ClientState c;
  c.client_seed = mix_key({cfg.fed.seed, static_cast<std::uint64_t>(ds.domain_id)});
  c.params = init_params(ds.n_users(), ds.n_items(), cfg.embed_dim,
                         mix_key({c.client_seed, 0x696e6974ULL}), cfg.hidden);
  c.opt = OptimizerState::like(c.params);

  if (cfg.variant == Variant::rand_sam) {
    c.potential = mine_random_items(ds, cfg.interp,
                                    mix_key({c.client_seed, 0x726d696e65ULL}));
  } else if (cfg.variant != Variant::wo_pi) {
    c.potential = mine_potential_items(ds, cfg.interp, exec);
  }

  for (int u = 0; u < ds.n_users(); ++u) {
    c.global_to_local[ds.user_global[u]] = u;
    if (overlap_globals.count(ds.user_global[u])) c.overlap_users.insert(u);
  }
  c.data = std::move(ds);
  return c;
}

bool resolve_prototype_partial(int user, const std::map<int, Vec>& local_protos,
                               const ClientState& client, int k, Vec* out) {
  std::vector<std::pair<double, int>> scored;
  for (int w : client.overlap_users) {
    if (w == user) continue;
    if (!client.received.entries.count(client.data.user_global[w])) continue;
    scored.emplace_back(
        cosine_or_zero(local_protos.at(user), local_protos.at(w)), w);
  }
  if (scored.empty()) return false;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);

  Vec acc(client.params.d, 0.0);
  for (const auto& [s, w] : scored)
    axpy(1.0 / static_cast<double>(scored.size()),
         client.received.entries.at(client.data.user_global[w]), acc);
  *out = std::move(acc);
  return true;
}

std::vector<PrivatePrototype> local_update(ClientState& client,
                                           const TrainConfig& cfg, int round,
                                           const FederationHooks& hooks,
                                           ExecPolicy exec) {
  const DomainDataset& ds = client.data;
  const double gamma = effective_gamma(cfg);
  const double alpha = effective_alpha(cfg);
  const bool wants_protos =
      (alpha > 0.0 || cfg.variant == Variant::inter_sum) &&
      !client.received.entries.empty();

  // Resolve this round's per-user prototype targets from the last broadcast.
  std::map<int, Vec> protos;  // local user index -> target vector
  if (wants_protos) {
    std::vector<int> missing;
    for (int u = 0; u < ds.n_users(); ++u) {
      auto it = client.received.entries.find(ds.user_global[u]);
      if (it != client.received.entries.end())
        protos[u] = it->second;
      else
        missing.push_back(u);
    }
    if (!missing.empty() && cfg.fed.overlap_mode == OverlapMode::partial) {
      const auto local_protos = all_local_prototypes(client, cfg);
      for (int u : missing) {
        Vec surrogate;
        if (resolve_prototype_partial(u, local_protos, client,
                                      cfg.fed.surrogate_k, &surrogate))
          protos[u] = std::move(surrogate);
        else
          ++client.inter_users_excluded;
      }
    }
  }

  LossConfig eff = cfg.loss;
  eff.gamma = gamma;
  eff.alpha = alpha;

  const int n_pairs = static_cast<int>(ds.train_pairs.size());
  const int B = cfg.fed.batch_size;

  for (int epoch = 0; epoch < cfg.fed.local_epochs; ++epoch) {
    const auto negs = sample_training_negatives(
        ds, mix_key({client.client_seed, 0x6e6567ULL, static_cast<std::uint64_t>(round)}),
        epoch);

    std::vector<int> order(n_pairs);
    for (int i = 0; i < n_pairs; ++i) order[i] = i;
    Rng shuffle = Rng::keyed({client.client_seed, 0x73687566ULL,
                              static_cast<std::uint64_t>(round),
                              static_cast<std::uint64_t>(epoch)});
    for (int i = n_pairs - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }

    for (int start = 0, batch_idx = 0; start < n_pairs; start += B, ++batch_idx) {
      const int end = std::min(start + B, n_pairs);
      GradAccum g = GradAccum::like(client.params);

      std::vector<PredTriple> triples;
      std::vector<int> batch_users, batch_items;
      triples.reserve(end - start);
      for (int k = start; k < end; ++k) {
        const int i = order[k];
        const auto [u, pos] = ds.train_pairs[i];
        const int neg = negs[i].neg_item;
        batch_users.push_back(u);
        batch_items.push_back(pos);

        PredTriple t;
        t.user = u;
        if (cfg.variant == Variant::wo_pi) {
          t.pos = MixedVec::single(pos);
          t.neg = MixedVec::single(neg);
        } else {
          Rng rp = Rng::keyed({client.client_seed, 0x6d697870ULL,
                               static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(i)});
          t.pos = mix_positive(pos, client.potential.entries.at({u, pos}),
                               cfg.interp, rp);
          Rng rn = Rng::keyed({client.client_seed, 0x6d69786eULL,
                               static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(i)});
          t.neg = mix_negative(ds, u, neg, cfg.interp, rn);
        }
        triples.push_back(std::move(t));
      }

      const double l_prd = prediction_loss(client.params, triples, g, 1.0);

      const auto uu = dedup(batch_users);
      const auto vv = dedup(batch_items);
      double l_u = 0.0, l_v = 0.0;
      if (gamma > 0.0) {
        if (uu.size() >= 2 && vv.size() >= 2) {
          const auto res =
              intra_losses(client.params, ds.user_review_emb, ds.item_review_emb,
                           uu, vv, eff, gamma, g);
          l_u = res.l_u;
          l_v = res.l_v;
        } else {
          ++client.intra_batches_skipped;
        }
      }

      double l_inter = 0.0;
      if (alpha > 0.0 && !protos.empty()) {
        std::vector<int> covered;
        for (int u : uu)
          if (protos.count(u)) covered.push_back(u);
        if (covered.size() >= 2)
          l_inter = inter_loss(client.params, protos, covered, eff, alpha, g);
      }

      const LossBreakdown bd = combine(l_prd, l_u, l_v, l_inter, eff);
      if (!std::isfinite(bd.total))
        throw std::runtime_error(
            "non-finite loss at round " + std::to_string(round) + ", domain " +
            std::to_string(ds.domain_id) + ", epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(batch_idx));

      adam_step(client.params, client.opt, g, cfg.lr);

      // Fusion ablations replace the alignment losses with direct averaging
      // of each batch member's embedding with its alignment target.
      if (cfg.variant == Variant::intra_sum) {
        for (int u : uu) {
          if (nrm2(ds.user_review_emb.row_span(u)) == 0.0) continue;
          double* e = client.params.user_emb.row(u);
          const double* h = ds.user_review_emb.row(u);
          for (int j = 0; j < client.params.d; ++j) e[j] = 0.5 * (e[j] + h[j]);
        }
        for (int v : vv) {
          if (nrm2(ds.item_review_emb.row_span(v)) == 0.0) continue;
          double* e = client.params.item_emb.row(v);
          const double* h = ds.item_review_emb.row(v);
          for (int j = 0; j < client.params.d; ++j) e[j] = 0.5 * (e[j] + h[j]);
        }
      }
      if (cfg.variant == Variant::inter_sum && !protos.empty()) {
        for (int u : uu) {
          auto it = protos.find(u);
          if (it == protos.end()) continue;  // no target: embedding kept as-is
          double* e = client.params.user_emb.row(u);
          for (int j = 0; j < client.params.d; ++j)
            e[j] = 0.5 * (e[j] + it->second[j]);
        }
      }

      if (hooks.telemetry) {
        json row;
        row["round"] = round;
        row["domain"] = ds.domain_id;
        row["epoch"] = epoch;
        row["l_prd"] = bd.l_prd;
        row["l_intra_u"] = bd.l_intra_u;
        row["l_intra_v"] = bd.l_intra_v;
        row["l_inter"] = bd.l_inter;
        row["total"] = bd.total;
        hooks.telemetry(row.dump());
      }
    }
  }

  // Prototypes are computed after local training, on the updated embeddings.
  std::vector<int> upload_users;
  if (cfg.fed.overlap_mode == OverlapMode::full) {
    upload_users.resize(ds.n_users());
    for (int u = 0; u < ds.n_users(); ++u) upload_users[u] = u;
  } else {
    upload_users.assign(client.overlap_users.begin(), client.overlap_users.end());
  }

  std::vector<PrivatePrototype> out;
  out.reserve(upload_users.size());
  for (int u : upload_users) {
    const auto group =
        form_group(u, ds, cfg.privacy.group_n, cfg.privacy.strict_groups);
    Prototype p;
    p.user = ds.user_global[u];
    p.domain = ds.domain_id;
    p.vector = local_prototype(group, client.params.user_emb);
    if (cfg.variant == Variant::wo_ldp) {
      out.push_back(std::move(p));
    } else {
      Rng rng = Rng::keyed({client.client_seed, 0x6c6470ULL,
                            static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(u)});
      out.push_back(ldp_publish(p, cfg.privacy, rng));
    }
  }
  return out;
}

FederationResult run_federation(const TrainConfig& cfg,
                                std::vector<DomainDataset> datasets,
                                const FederationHooks& hooks, ExecPolicy exec) {
  cfg.fed.validate();
  cfg.interp.validate();
  cfg.privacy.validate();
  if (cfg.loss.tau <= 0.0)
    throw std::invalid_argument("run_federation: loss tau must be > 0");
  if (static_cast<int>(datasets.size()) != cfg.fed.num_domains)
    throw std::invalid_argument("run_federation: dataset count != num_domains");

  assign_global_user_indices(datasets);

  std::map<int, int> appearances;
  for (const auto& ds : datasets)
    for (int g : ds.user_global) ++appearances[g];
  std::set<int> overlap_globals;
  for (const auto& [g, n] : appearances)
    if (n > 1) overlap_globals.insert(g);

  FederationResult result;
  result.clients.reserve(datasets.size());
  for (auto& ds : datasets)
    result.clients.push_back(make_client(std::move(ds), cfg, overlap_globals, exec));

  for (int round = 1; round <= cfg.fed.rounds; ++round) {
    RoundStats stats;
    stats.round = round;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::vector<PrivatePrototype>> uploads;
    std::vector<std::map<int, long long>> counts;
    for (auto& client : result.clients) {
      auto protos = local_update(client, cfg, round, hooks, exec);

      UploadMessage msg;
      msg.round = round;
      msg.domain_id = client.data.domain_id;
      msg.entries = std::move(protos);
      for (const auto& p : msg.entries) {
        const int local = client.global_to_local.at(p.user);
        msg.counts.emplace_back(
            p.user,
            static_cast<long long>(client.data.train_items_per_user[local].size()));
      }

      // Messages cross the client/server boundary in wire form only.
      const std::string wire = upload_to_json(msg);
      stats.upload_bytes += wire.size();
      if (hooks.on_upload) hooks.on_upload(msg, wire);
      UploadMessage received = upload_from_json(wire);
      uploads.push_back(std::move(received.entries));
      std::map<int, long long> cmap;
      for (const auto& [user, n] : received.counts) cmap[user] = n;
      counts.push_back(std::move(cmap));
    }

    const GlobalPrototypeSet global =
        aggregate_global(uploads, counts, cfg.privacy.aggregation, round);

    BroadcastMessage bmsg;
    bmsg.round = round;
    bmsg.entries = global.entries;
    const std::string wire = broadcast_to_json(bmsg);
    stats.broadcast_bytes = wire.size();
    if (hooks.on_broadcast) hooks.on_broadcast(bmsg, wire);
    for (auto& client : result.clients) {
      const BroadcastMessage received = broadcast_from_json(wire);
      client.received.entries = received.entries;
      client.received.round = received.round;
    }

    stats.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(stats);
  }
  return result;
}

}  // namespace protorec
