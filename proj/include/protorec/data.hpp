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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "protorec/exec.hpp"
#include "protorec/la.hpp"

namespace protorec {

// One raw interaction row as read from disk.
struct Interaction {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string review_text;
  long long timestamp = 0;
};

// One client's view of its domain: users, items, implicit interactions,
// review embeddings, and leave-one-out splits.
struct DomainDataset {
  int domain_id = 0;

  std::vector<std::string> user_ids;  // local index -> id, lexicographic
  std::vector<std::string> item_ids;  // local index -> id, lexicographic
  std::vector<int> user_global;       // local index -> global user index

  // Full interacted item sets (the implicit matrix), sorted per user.
  std::vector<std::vector<int>> user_items;

  // Retained raw rows; source of review texts and timestamps.
  std::vector<Interaction> raw;

  Mat user_review_emb;  // |U| x d, rows unit-norm or all-zero
  Mat item_review_emb;  // |V| x d

  std::vector<std::pair<int, int>> train_pairs;
  std::vector<std::pair<int, int>> test_pairs;          // one per eligible user
  std::vector<std::vector<int>> eval_negatives;         // 99 per test pair
  std::vector<std::vector<int>> train_items_per_user;   // sorted per user

  int split_skipped_users = 0;  // users with < 2 interactions at split time

  int n_users() const { return static_cast<int>(user_ids.size()); }
  int n_items() const { return static_cast<int>(item_ids.size()); }
  bool user_interacted(int u, int v) const;
  long long train_count(int u) const {
    return static_cast<long long>(train_items_per_user[u].size());
  }
};

// Desk-scale synthetic corpus in place of real review datasets.
struct SyntheticSpec {
  int n_users = 0;
  int n_items_per_domain = 0;
  int n_domains = 1;            // K
  int latent_dim = 8;
  double density = 0.0;         // in (0,1)
  double overlap_fraction = 1.0;  // fraction of users present in all domains
  std::uint64_t seed = 0;
  int review_dim = 8;           // review embeddings are produced at the model dim
  double review_noise = 0.3;
  // Interaction probability is a sigmoid of (affinity - affinity_offset)
  // scaled by sharpness. A higher slope sharpens the liked/disliked split; a
  // positive offset shrinks each user's liked set to their top-affinity tail,
  // which raises the ceiling any ranker can reach on held-out items.
  double sharpness = 3.0;
  double affinity_offset = 0.0;
};

enum class FileFormat { csv, jsonl };
enum class EmbedMode { hashing, precomputed };

struct TrainTriple {
  int user;
  int pos_item;
  int neg_item;
};

DomainDataset load_domain(const std::string& path, FileFormat format, bool filter);

// Builds user/item review embeddings at dimension `dim`.
// hashing: seeded feature-hash of token counts + smooth TF-IDF + L2 norm.
// precomputed: rows loaded from `path` (header `dim=<d>`, then `<id>\t<v...>`);
// a dimension mismatch is an error unless `allow_projection`, in which case
// rows are pushed through a seeded Gaussian projection to `dim`.
void embed_reviews(DomainDataset& ds, EmbedMode mode, int dim, std::uint64_t seed,
                   const std::string& path = "", bool allow_projection = false,
                   ExecPolicy exec = ExecPolicy::serial);

// Moves one interaction per user (latest timestamp, seeded-random on ties or
// missing timestamps) into the test set and samples 99 negatives per test
// pair. Users with < 2 interactions are skipped and counted.
void split_leave_one_out(DomainDataset& ds, std::uint64_t seed);

// One fresh uniform negative per train positive; the stream is keyed by
// (seed, epoch, pair index) so resampling per epoch is order-independent.
std::vector<TrainTriple> sample_training_negatives(const DomainDataset& ds,
                                                   std::uint64_t seed, int epoch);

std::vector<DomainDataset> generate_synthetic(const SyntheticSpec& spec);

// Keeps ceil(m * n_u) train interactions per user (min 1); test pairs untouched.
void apply_density(DomainDataset& ds, double m, std::uint64_t seed);

// Assigns global user indices lexicographically over the union of user ids.
void assign_global_user_indices(std::vector<DomainDataset>& domains);

// FNV-1a digest over ids, interactions, and the exact split (train pairs,
// held-out pairs, evaluation negatives); recorded in run manifests so two
// datasets compare equal only when their splits do too.
std::string dataset_digest(const DomainDataset& ds);

void save_dataset(const DomainDataset& ds, const std::string& path);
DomainDataset load_dataset(const std::string& path);

}  // namespace protorec
