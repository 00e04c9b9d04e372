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
//
// Compares the serial reference kernels against their OpenMP versions on a
// synthetic workload and verifies the outputs agree bit-for-bit. The data-
// parallel kernels write into preallocated per-element slots and reduce in a
// fixed order, so thread count must not change any result.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "protorec/data.hpp"
#include "protorec/eval.hpp"
#include "protorec/exec.hpp"
#include "protorec/federation.hpp"
#include "protorec/potential.hpp"

namespace {

using namespace protorec;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds_since(t0);
}

bool equal_mat(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.a.data(), b.a.data(), a.a.size() * sizeof(double)) == 0;
}

}  // namespace

int main() {
  SyntheticSpec spec;
  spec.n_users = 400;
  spec.n_items_per_domain = 600;
  spec.n_domains = 1;
  spec.latent_dim = 12;
  spec.density = 0.03;
  spec.overlap_fraction = 1.0;
  spec.seed = 7;
  spec.review_dim = 48;

  auto datasets = generate_synthetic(spec);
  DomainDataset& ds = datasets[0];
  split_leave_one_out(ds, 7);

  std::printf("workload: %d users, %d items, %zu train pairs\n", ds.n_users(),
              ds.n_items(), ds.train_pairs.size());

  // --- potential-item mining -------------------------------------------
  InterpolationConfig interp;
  PotentialItemIndex serial_idx, parallel_idx;
  const double t_mine_s = timed([&] {
    serial_idx = mine_potential_items(ds, interp, ExecPolicy::serial);
  });
  const double t_mine_p = timed([&] {
    parallel_idx = mine_potential_items(ds, interp, ExecPolicy::parallel);
  });
  bool mine_equal = serial_idx.entries.size() == parallel_idx.entries.size();
  if (mine_equal) {
    for (const auto& [key, list] : serial_idx.entries) {
      const auto it = parallel_idx.entries.find(key);
      if (it == parallel_idx.entries.end() || it->second.size() != list.size()) {
        mine_equal = false;
        break;
      }
      for (std::size_t i = 0; i < list.size(); ++i)
        if (list[i].item != it->second[i].item ||
            list[i].score != it->second[i].score) {
          mine_equal = false;
          break;
        }
    }
  }
  std::printf("mine_potential_items  serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
              t_mine_s, t_mine_p, t_mine_s / t_mine_p,
              mine_equal ? "bit-identical" : "MISMATCH");

  // --- review embedding (hashing + IDF) --------------------------------
  // Attach synthetic review text so the hashing path has real work.
  ds.raw.clear();
  for (const auto& [u, v] : ds.train_pairs) {
    Interaction it;
    it.user_id = ds.user_ids[u];
    it.item_id = ds.item_ids[v];
    it.rating = 1.0;
    it.review_text = "item " + std::to_string(v) + " quality build value user " +
                     std::to_string(u) + " daily detail review";
    ds.raw.push_back(std::move(it));
  }
  DomainDataset ds2 = ds;
  const double t_emb_s = timed([&] {
    embed_reviews(ds, EmbedMode::hashing, 128, 7, "", false, ExecPolicy::serial);
  });
  const double t_emb_p = timed([&] {
    embed_reviews(ds2, EmbedMode::hashing, 128, 7, "", false, ExecPolicy::parallel);
  });
  const bool emb_equal = equal_mat(ds.user_review_emb, ds2.user_review_emb) &&
                         equal_mat(ds.item_review_emb, ds2.item_review_emb);
  std::printf("embed_reviews         serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
              t_emb_s, t_emb_p, t_emb_s / t_emb_p,
              emb_equal ? "bit-identical" : "MISMATCH");

  // --- evaluation -------------------------------------------------------
  ModelParams params = init_params(ds.n_users(), ds.n_items(), 32, 7, {64, 32});
  DomainEval ev_s, ev_p;
  const double t_ev_s =
      timed([&] { ev_s = evaluate_domain(params, ds, {}, ExecPolicy::serial); });
  const double t_ev_p =
      timed([&] { ev_p = evaluate_domain(params, ds, {}, ExecPolicy::parallel); });
  bool ev_equal = ev_s.metrics.size() == ev_p.metrics.size();
  for (std::size_t i = 0; ev_equal && i < ev_s.metrics.size(); ++i)
    ev_equal = ev_s.metrics[i].value == ev_p.metrics[i].value;
  std::printf("evaluate_domain       serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
              t_ev_s, t_ev_p, t_ev_s / t_ev_p,
              ev_equal ? "bit-identical" : "MISMATCH");

  return (mine_equal && emb_equal && ev_equal) ? 0 : 1;
}
