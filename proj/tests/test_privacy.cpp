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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "protorec/privacy.hpp"

using namespace protorec;
using json = nlohmann::json;

namespace {

// Five users with hand-picked item sets (sorted, as the loaders produce).
DomainDataset group_fixture() {
  DomainDataset ds;
  ds.user_ids = {"u0", "u1", "u2", "u3", "u4", "u5"};
  ds.user_global = {0, 1, 2, 3, 4, 5};
  ds.item_ids = {"i0", "i1", "i2", "i3", "i4", "i5"};
  ds.user_items = {
      {0, 1, 2},  // u0: the anchor
      {0, 1, 2},  // u1: identical set (3 common)
      {0, 1},     // u2: 2 common
      {2},        // u3: 1 common
      {5},        // u4: disjoint
      {0, 1},     // u5: 2 common, ties with u2
  };
  return ds;
}

}  // namespace

TEST_CASE("aggregation mode names round-trip") {
  for (auto m : {AggregationMode::weighted, AggregationMode::average, AggregationMode::sum})
    CHECK(aggregation_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(aggregation_mode_from_string("median"), std::invalid_argument);
}

TEST_CASE("privacy config validates and prices its budget") {
  PrivacyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.epsilon() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // Budget is 2C/eta: linear in C, inverse in eta.
  cfg.clip_c = 0.2;
  CHECK(cfg.epsilon() == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  cfg.noise_eta = 0.6;
  CHECK(cfg.epsilon() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  cfg.noise_eta = 0.0;
  CHECK(cfg.epsilon() == std::numeric_limits<double>::infinity());

  auto bad = PrivacyConfig{};
  bad.clip_c = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = PrivacyConfig{};
  bad.noise_eta = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = PrivacyConfig{};
  bad.group_n = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("group formation ranks neighbors by shared items") {
  DomainDataset ds = group_fixture();

  // Full ranking: identical set first, then the two 2-common users in index
  // order, then the 1-common user; the disjoint user never joins.
  auto g = form_group(0, ds, 10);
  CHECK(g == std::vector<int>{0, 1, 2, 5, 3});

  // group_n caps the size, keeping the best-ranked members.
  CHECK(form_group(0, ds, 3) == std::vector<int>{0, 1, 2});
  CHECK(form_group(0, ds, 1) == std::vector<int>{0});

  // Strict mode admits only users with exactly the anchor's item set.
  CHECK(form_group(0, ds, 10, true) == std::vector<int>{0, 1});
  CHECK(form_group(3, ds, 10, true) == std::vector<int>{3});

  CHECK_THROWS_AS(form_group(-1, ds, 10), std::invalid_argument);
  CHECK_THROWS_AS(form_group(6, ds, 10), std::invalid_argument);
  CHECK_THROWS_AS(form_group(0, ds, 0), std::invalid_argument);
}

TEST_CASE("group formation matches a brute-force oracle on synthetic data") {
  SyntheticSpec spec;
  spec.n_users = 40;
  spec.n_items_per_domain = 110;
  spec.n_domains = 1;
  spec.density = 0.08;
  spec.seed = 17;
  DomainDataset ds = generate_synthetic(spec)[0];

  const int group_n = 5;
  for (int u = 0; u < ds.n_users(); ++u) {
    auto got = form_group(u, ds, group_n);

    std::vector<std::pair<int, int>> scored;  // (common, user)
    for (int w = 0; w < ds.n_users(); ++w) {
      if (w == u) continue;
      std::vector<int> common;
      std::set_intersection(ds.user_items[u].begin(), ds.user_items[u].end(),
                            ds.user_items[w].begin(), ds.user_items[w].end(),
                            std::back_inserter(common));
      if (!common.empty()) scored.emplace_back(static_cast<int>(common.size()), w);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> expect{u};
    for (const auto& [c, w] : scored) {
      if (static_cast<int>(expect.size()) >= group_n) break;
      expect.push_back(w);
    }
    CHECK(got == expect);
    CHECK(static_cast<int>(got.size()) <= group_n);
    CHECK(got.front() == u);
  }
}

TEST_CASE("local prototype is the group mean of user rows") {
  Mat emb(3, 2);
  emb.at(0, 0) = 1.0;
  emb.at(0, 1) = 2.0;
  emb.at(1, 0) = 3.0;
  emb.at(1, 1) = 4.0;
  emb.at(2, 0) = -1.0;
  emb.at(2, 1) = 0.0;

  Vec p = local_prototype({0, 2}, emb);
  CHECK(p[0] == doctest::Approx(0.0));
  CHECK(p[1] == doctest::Approx(1.0));

  Vec single = local_prototype({1}, emb);
  CHECK(single[0] == doctest::Approx(3.0));
  CHECK(single[1] == doctest::Approx(4.0));

  CHECK_THROWS_AS(local_prototype({}, emb), std::invalid_argument);
}

TEST_CASE("publication clips to the L2 ball") {
  PrivacyConfig cfg;
  cfg.clip_c = 1.0;
  cfg.noise_eta = 0.0;  // isolate the clip
  Rng rng = Rng::keyed({99});

  Prototype p;
  p.user = 4;
  p.domain = 1;
  p.vector = {3.0, 4.0};  // norm 5 -> scaled by 1/5
  PrivatePrototype out = ldp_publish(p, cfg, rng);
  CHECK(out.user == 4);
  CHECK(out.domain == 1);
  CHECK(out.vector[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out.vector[1] == doctest::Approx(0.8).epsilon(1e-15));

  // Inside the ball: untouched.
  p.vector = {0.3, 0.4};
  out = ldp_publish(p, cfg, rng);
  CHECK(out.vector[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(out.vector[1] == doctest::Approx(0.4).epsilon(1e-15));

  // Clipping never leaves the ball, whatever the input scale.
  Rng big = Rng::keyed({100});
  for (int t = 0; t < 50; ++t) {
    Prototype q;
    q.vector = {big.normal(0, 10), big.normal(0, 10), big.normal(0, 10)};
    auto r = ldp_publish(q, cfg, rng);
    CHECK(nrm2(r.vector) <= 1.0 + 1e-12);
  }

  PrivacyConfig invalid;
  invalid.clip_c = -1.0;
  CHECK_THROWS_AS(ldp_publish(p, invalid, rng), std::invalid_argument);
}

TEST_CASE("publication adds per-coordinate Laplace noise after the clip") {
  PrivacyConfig cfg;  // C = 0.1, eta = 0.3
  Prototype p;
  p.user = 0;
  p.vector = {3.0, 4.0};

  // Replay the identical stream: published = clipped + laplace draws.
  Rng rng = Rng::keyed({7, 1});
  Rng twin = Rng::keyed({7, 1});
  PrivatePrototype out = ldp_publish(p, cfg, rng);
  Vec clipped = {0.06, 0.08};  // (3,4)/5 * 0.1
  for (std::size_t i = 0; i < out.vector.size(); ++i)
    CHECK(out.vector[i] == doctest::Approx(clipped[i] + twin.laplace(0.3)).epsilon(1e-15));

  // Noise moments: E|X| = eta with enough coordinates.
  Prototype wide;
  wide.vector.assign(20000, 0.0);
  Rng r2 = Rng::keyed({7, 2});
  PrivatePrototype noisy = ldp_publish(wide, cfg, r2);
  double mean_abs = 0.0;
  for (double x : noisy.vector) mean_abs += std::abs(x);
  mean_abs /= static_cast<double>(noisy.vector.size());
  CHECK(mean_abs == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("aggregation weights contributions by interaction counts") {
  std::vector<std::vector<PrivatePrototype>> uploads(2);
  uploads[0].push_back({7, 0, {1.0, 0.0}});
  uploads[1].push_back({7, 1, {0.0, 1.0}});
  std::vector<std::map<int, long long>> counts(2);
  counts[0][7] = 30;
  counts[1][7] = 10;

  GlobalPrototypeSet g = aggregate_global(uploads, counts, AggregationMode::weighted, 3);
  CHECK(g.round == 3);
  REQUIRE(g.entries.count(7) == 1);
  const Vec& v = g.entries.at(7);
  CHECK(v[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(v[0] + v[1] == doctest::Approx(1.0).epsilon(1e-12));  // weights sum to 1

  // Average ignores counts; sum stacks raw vectors.
  g = aggregate_global(uploads, counts, AggregationMode::average, 0);
  CHECK(g.entries.at(7)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.entries.at(7)[1] == doctest::Approx(0.5).epsilon(1e-12));
  g = aggregate_global(uploads, counts, AggregationMode::sum, 0);
  CHECK(g.entries.at(7)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.entries.at(7)[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregation invariants") {
  // Identical uploads: weighted and average both return that vector.
  std::vector<std::vector<PrivatePrototype>> uploads(3);
  for (int d = 0; d < 3; ++d) uploads[d].push_back({2, d, {0.4, -0.2, 0.1}});
  std::vector<std::map<int, long long>> counts(3);
  counts[0][2] = 5;
  counts[1][2] = 50;
  counts[2][2] = 500;
  for (auto mode : {AggregationMode::weighted, AggregationMode::average}) {
    auto g = aggregate_global(uploads, counts, mode, 0);
    CHECK(g.entries.at(2)[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(g.entries.at(2)[1] == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(g.entries.at(2)[2] == doctest::Approx(0.1).epsilon(1e-12));
  }

  // Uniform counts: weighted coincides with average.
  std::vector<std::vector<PrivatePrototype>> mixed(2);
  mixed[0].push_back({2, 0, {1.0, 0.0, 0.0}});
  mixed[1].push_back({2, 1, {0.0, 0.0, 2.0}});
  std::vector<std::map<int, long long>> uniform(2);
  uniform[0][2] = 9;
  uniform[1][2] = 9;
  auto w = aggregate_global(mixed, uniform, AggregationMode::weighted, 0);
  auto a = aggregate_global(mixed, uniform, AggregationMode::average, 0);
  for (int i = 0; i < 3; ++i)
    CHECK(w.entries.at(2)[i] == doctest::Approx(a.entries.at(2)[i]).epsilon(1e-12));

  // A user present in one domain only keeps their vector (weight 1).
  std::vector<std::vector<PrivatePrototype>> lone(2);
  lone[0].push_back({11, 0, {0.5, 0.5}});
  std::vector<std::map<int, long long>> lone_counts(2);
  lone_counts[0][11] = 4;
  auto lg = aggregate_global(lone, lone_counts, AggregationMode::weighted, 0);
  CHECK(lg.entries.at(11)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lg.entries.size() == 1);
}

TEST_CASE("aggregation rejects malformed inputs") {
  std::vector<std::vector<PrivatePrototype>> uploads(2);
  uploads[0].push_back({1, 0, {1.0}});
  std::vector<std::map<int, long long>> counts(1);
  CHECK_THROWS_AS(aggregate_global(uploads, counts, AggregationMode::weighted, 0),
                  std::invalid_argument);

  counts.resize(2);  // count for user 1 missing entirely
  CHECK_THROWS_WITH_AS(aggregate_global(uploads, counts, AggregationMode::weighted, 0),
                       doctest::Contains("missing interaction count"),
                       std::runtime_error);

  counts[0][1] = 0;  // present but zero total
  CHECK_THROWS_WITH_AS(aggregate_global(uploads, counts, AggregationMode::weighted, 0),
                       doctest::Contains("total interaction count is 0"),
                       std::runtime_error);

  // Sum mode does not divide by the total, so a zero count is acceptable.
  CHECK_NOTHROW(aggregate_global(uploads, counts, AggregationMode::sum, 0));
}

TEST_CASE("upload wire format carries quantized prototypes and counts") {
  UploadMessage m;
  m.round = 5;
  m.domain_id = 2;
  m.entries.push_back({3, 2, {0.1234567890123, -1.5}});
  m.entries.push_back({9, 2, {2.25, 0.0}});
  m.counts = {{3, 17}, {9, 4}};

  const std::string text = upload_to_json(m);
  const json j = json::parse(text);
  CHECK(j.at("round") == 5);
  CHECK(j.at("domain_id") == 2);
  REQUIRE(j.at("entries").size() == 2);
  CHECK(j.at("entries")[0].at("user") == 3);
  REQUIRE(j.at("counts").size() == 2);
  CHECK(j.at("counts")[0].at("user") == 3);
  CHECK(j.at("counts")[0].at("n") == 17);

  UploadMessage back = upload_from_json(text);
  CHECK(back.round == m.round);
  CHECK(back.domain_id == m.domain_id);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].user == 3);
  CHECK(back.entries[0].domain == 2);  // domain restored from the envelope
  CHECK(back.counts == m.counts);

  // Vectors survive at float32 resolution: equal to the quantized original.
  for (std::size_t e = 0; e < m.entries.size(); ++e)
    for (std::size_t i = 0; i < m.entries[e].vector.size(); ++i) {
      const double quantized = static_cast<double>(static_cast<float>(m.entries[e].vector[i]));
      CHECK(back.entries[e].vector[i] == quantized);
    }

  // Quantization is idempotent: a second round trip is byte-identical.
  CHECK(upload_to_json(back) == upload_to_json(upload_from_json(upload_to_json(back))));
}

TEST_CASE("broadcast wire format mirrors the global prototype set") {
  BroadcastMessage m;
  m.round = 2;
  m.entries[4] = {0.5, -0.25};
  m.entries[8] = {1.0 / 3.0};

  const std::string text = broadcast_to_json(m);
  const json j = json::parse(text);
  CHECK(j.at("round") == 2);
  REQUIRE(j.at("entries").size() == 2);

  BroadcastMessage back = broadcast_from_json(text);
  CHECK(back.round == 2);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries.at(4)[0] == 0.5);  // exactly representable
  CHECK(back.entries.at(4)[1] == -0.25);
  CHECK(back.entries.at(8)[0] ==
        static_cast<double>(static_cast<float>(1.0 / 3.0)));
}
