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

#ifndef PROTOREC_POTENTIAL_HPP_
#define PROTOREC_POTENTIAL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "protorec/data.hpp"
#include "protorec/exec.hpp"
#include "protorec/model.hpp"
#include "protorec/rng.hpp"

namespace protorec {

// Controls latent-interest mining and the Gaussian blend that mixes an item's
// embedding with the mean embedding of its mined neighbors.
struct InterpolationConfig {
  double mu = 0.7;       // blend-coefficient Gaussian mean
  double sigma = 0.1;    // blend-coefficient Gaussian std
  double threshold = 0.5;  // cosine cutoff for candidate items
  int top_t = 4;         // max mined items per (user, item) pair
  int neg_samples = 4;   // items blended into each sampled negative

  void validate() const;
};

struct PotentialEntry {
  int item = 0;
  double score = 0.0;
};

// For each train pair (user, positive item): up to top_t non-interacted items
// whose review embeddings are most similar to the positive's, sorted by
// descending score (ties by item index).
struct PotentialItemIndex {
  std::map<std::pair<int, int>, std::vector<PotentialEntry>> entries;
};

// Cosine mining over review embeddings. Items with all-zero review rows are
// excluded from candidacy; a positive with an all-zero row yields an empty
// list. Deterministic; the embeddings are static so this runs once.
PotentialItemIndex mine_potential_items(const DomainDataset& ds,
                                        const InterpolationConfig& cfg,
                                        ExecPolicy exec = ExecPolicy::serial);

// Ablation: ignore similarity and pick top_t uniform random non-interacted
// items per train pair (score 1.0).
PotentialItemIndex mine_random_items(const DomainDataset& ds,
                                     const InterpolationConfig& cfg,
                                     std::uint64_t seed);

// Blend coefficient: redraw from Normal(mu, sigma^2) until it lands in (0,1),
// at most 100 draws, then clamp the last draw to [0.01, 0.99].
double draw_beta(const InterpolationConfig& cfg, Rng& rng);

// m = beta * e_pos + (1 - beta) * mean(potential embeddings). Empty potential
// list degenerates to the raw item (beta reported as 1).
MixedVec mix_positive(int pos_item, const std::vector<PotentialEntry>& potential,
                      const InterpolationConfig& cfg, Rng& rng,
                      double* beta_out = nullptr);

// Blend the sampled negative with the mean of neg_samples uniformly sampled
// non-interacted items (all candidates when fewer exist). The extra items
// make it likelier that true disinterest is represented in the mixture.
MixedVec mix_negative(const DomainDataset& ds, int user, int neg_item,
                      const InterpolationConfig& cfg, Rng& rng,
                      double* beta_out = nullptr,
                      std::vector<int>* sampled_out = nullptr);

// Inspection sidecar: one row per indexed pair: user, item, candidate list,
// score list (comma-joined).
void save_potential_index_tsv(const PotentialItemIndex& index,
                              const DomainDataset& ds, const std::string& path);

}  // namespace protorec

#endif  // PROTOREC_POTENTIAL_HPP_
