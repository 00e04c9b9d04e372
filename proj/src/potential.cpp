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

#include "protorec/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace protorec {

void InterpolationConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("interpolation: threshold must be in (0,1)");
  if (top_t < 1) throw std::invalid_argument("interpolation: top_t must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("interpolation: sigma must be > 0");
  if (neg_samples < 1)
    throw std::invalid_argument("interpolation: neg_samples must be >= 1");
}

namespace {

double cosine(std::span<const double> x, std::span<const double> y) {
  const double nx = nrm2(x);
  const double ny = nrm2(y);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot(x, y) / (nx * ny);
}

}  // namespace

PotentialItemIndex mine_potential_items(const DomainDataset& ds,
                                        const InterpolationConfig& cfg,
                                        ExecPolicy exec) {
  cfg.validate();
  if (ds.item_review_emb.rows != ds.n_items())
    throw std::runtime_error("mine_potential_items: review embeddings missing");

  std::vector<bool> has_signal(ds.n_items());
  for (int v = 0; v < ds.n_items(); ++v)
    has_signal[v] = nrm2(ds.item_review_emb.row_span(v)) > 0.0;

  const int n_pairs = static_cast<int>(ds.train_pairs.size());
  std::vector<std::vector<PotentialEntry>> slots(n_pairs);
  par_for(exec, n_pairs, [&](int i) {
    const auto [u, v] = ds.train_pairs[i];
    if (!has_signal[v]) return;
    std::vector<PotentialEntry> found;
    const auto anchor = ds.item_review_emb.row_span(v);
    for (int c = 0; c < ds.n_items(); ++c) {
      if (!has_signal[c] || ds.user_interacted(u, c)) continue;
      const double s = cosine(anchor, ds.item_review_emb.row_span(c));
      if (s >= cfg.threshold) found.push_back({c, s});
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.item < b.item;
    });
    if (static_cast<int>(found.size()) > cfg.top_t) found.resize(cfg.top_t);
    slots[i] = std::move(found);
  });

  PotentialItemIndex index;
  for (int i = 0; i < n_pairs; ++i)
    index.entries[ds.train_pairs[i]] = std::move(slots[i]);
  return index;
}

PotentialItemIndex mine_random_items(const DomainDataset& ds,
                                     const InterpolationConfig& cfg,
                                     std::uint64_t seed) {
  cfg.validate();
  PotentialItemIndex index;
  for (std::size_t i = 0; i < ds.train_pairs.size(); ++i) {
    const auto [u, v] = ds.train_pairs[i];
    const auto& interacted = ds.user_items[u];
    const std::size_t n_candidates = ds.n_items() - interacted.size();
    std::vector<PotentialEntry> picks;
    if (n_candidates > 0) {
      Rng rng = Rng::keyed({seed, 0x72616e646d696eULL, static_cast<std::uint64_t>(i)});
      const int want =
          std::min<int>(cfg.top_t, static_cast<int>(n_candidates));
      std::vector<int> chosen;
      while (static_cast<int>(chosen.size()) < want) {
        int pos = static_cast<int>(rng.uniform_int(n_candidates));
        for (int w : interacted) {
          if (w <= pos)
            ++pos;
          else
            break;
        }
        if (std::find(chosen.begin(), chosen.end(), pos) == chosen.end())
          chosen.push_back(pos);
      }
      for (int c : chosen) picks.push_back({c, 1.0});
    }
    index.entries[ds.train_pairs[i]] = std::move(picks);
  }
  return index;
}

double draw_beta(const InterpolationConfig& cfg, Rng& rng) {
  double b = 0.0;
  for (int i = 0; i < 100; ++i) {
    b = rng.normal(cfg.mu, cfg.sigma);
    if (b > 0.0 && b < 1.0) return b;
  }
  return std::clamp(b, 0.01, 0.99);
}

MixedVec mix_positive(int pos_item, const std::vector<PotentialEntry>& potential,
                      const InterpolationConfig& cfg, Rng& rng, double* beta_out) {
  if (potential.empty()) {
    if (beta_out) *beta_out = 1.0;
    return MixedVec::single(pos_item);
  }
  const double beta = draw_beta(cfg, rng);
  if (beta_out) *beta_out = beta;
  MixedVec mv;
  mv.parts.reserve(potential.size() + 1);
  mv.parts.emplace_back(pos_item, beta);
  const double share = (1.0 - beta) / static_cast<double>(potential.size());
  for (const auto& e : potential) mv.parts.emplace_back(e.item, share);
  return mv;
}

MixedVec mix_negative(const DomainDataset& ds, int user, int neg_item,
                      const InterpolationConfig& cfg, Rng& rng, double* beta_out,
                      std::vector<int>* sampled_out) {
  const auto& interacted = ds.user_items[user];
  const std::size_t n_candidates = ds.n_items() - interacted.size();
  const int want = std::min<int>(cfg.neg_samples, static_cast<int>(n_candidates));

  std::vector<int> sampled;
  while (static_cast<int>(sampled.size()) < want) {
    int pos = static_cast<int>(rng.uniform_int(n_candidates));
    for (int w : interacted) {
      if (w <= pos)
        ++pos;
      else
        break;
    }
    if (std::find(sampled.begin(), sampled.end(), pos) == sampled.end())
      sampled.push_back(pos);
  }
  if (sampled_out) *sampled_out = sampled;

  if (sampled.empty()) {
    if (beta_out) *beta_out = 1.0;
    return MixedVec::single(neg_item);
  }
  const double beta = draw_beta(cfg, rng);
  if (beta_out) *beta_out = beta;
  MixedVec mv;
  mv.parts.reserve(sampled.size() + 1);
  mv.parts.emplace_back(neg_item, beta);
  const double share = (1.0 - beta) / static_cast<double>(sampled.size());
  for (int c : sampled) mv.parts.emplace_back(c, share);
  return mv;
}

void save_potential_index_tsv(const PotentialItemIndex& index,
                              const DomainDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "user\tpos_item\tcandidates\tscores\n";
  for (const auto& [key, entries] : index.entries) {
    out << ds.user_ids[key.first] << '\t' << ds.item_ids[key.second] << '\t';
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i) out << ',';
      out << ds.item_ids[entries[i].item];
    }
    out << '\t';
    char buf[32];
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i) out << ',';
      std::snprintf(buf, sizeof(buf), "%.6f", entries[i].score);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace protorec
