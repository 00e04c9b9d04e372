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

#include <cmath>
#include <map>
#include <vector>

#include "protorec/losses.hpp"
#include "protorec/model.hpp"
#include "protorec/rng.hpp"

using namespace protorec;

namespace {

constexpr double kLog2 = 0.6931471805599453;

Vec randvec(Rng& rng, int d, double sd = 1.0) {
  Vec v(d);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

std::vector<std::span<const double>> spans(const std::vector<Vec>& vs) {
  std::vector<std::span<const double>> out;
  for (const auto& v : vs) out.emplace_back(v);
  return out;
}

// Direct softmax-CE evaluation used as the independent oracle for infonce.
double infonce_oracle(const Vec& a, const Vec& p, const std::vector<Vec>& negs,
                      double tau) {
  double fp = scaled_cosine(a, p, tau);
  double denom = std::exp(fp);
  for (const auto& n : negs) denom += std::exp(scaled_cosine(a, n, tau));
  return -std::log(std::exp(fp) / denom);
}

}  // namespace

TEST_CASE("scaled_cosine basics and worked value") {
  Vec x{1.0, 2.0};
  Vec y{3.0, 4.0};
  CHECK(scaled_cosine(x, y, 0.5) == doctest::Approx(1.9677398201998149).epsilon(1e-14));

  // Self-similarity is exactly 1/tau regardless of scale.
  Vec z{0.3, -0.7, 2.0};
  CHECK(scaled_cosine(z, z, 0.1) == doctest::Approx(10.0).epsilon(1e-12));

  Vec e1{1.0, 0.0};
  Vec e2{0.0, 5.0};
  CHECK(scaled_cosine(e1, e2, 0.7) == doctest::Approx(0.0));

  Vec zero{0.0, 0.0};
  CHECK_THROWS_AS(scaled_cosine(zero, y, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(scaled_cosine(x, y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(scaled_cosine(x, y, -1.0), std::invalid_argument);
  Vec short1{1.0};
  CHECK_THROWS_AS(scaled_cosine(short1, y, 0.5), std::invalid_argument);
}

TEST_CASE("scaled_cosine_grad_x matches finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = randvec(rng, 6);
    Vec y = randvec(rng, 6);
    Vec g = scaled_cosine_grad_x(x, y, 0.3);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Vec xu = x, xd = x;
      xu[i] += h;
      xd[i] -= h;
      double fd = (scaled_cosine(xu, y, 0.3) - scaled_cosine(xd, y, 0.3)) / (2 * h);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("bce clamps and differentiates") {
  CHECK(bce(0.5, 1.0).loss == doctest::Approx(kLog2).epsilon(1e-12));
  CHECK(bce(0.5, 0.0).loss == doctest::Approx(kLog2).epsilon(1e-12));

  // Perfect predictions approach zero loss.
  CHECK(bce(1.0 - 1e-9, 1.0).loss < 1e-6);
  CHECK(bce(1e-9, 0.0).loss < 1e-6);

  // Extreme probabilities are clamped: finite loss, zero gradient outside.
  BceResult r = bce(1e-12, 1.0);
  CHECK(std::isfinite(r.loss));
  CHECK(r.dldy == 0.0);

  // Inside the clamp the gradient matches d/dy of the loss.
  const double y = 0.73, h = 1e-7;
  double fd = (bce(y + h, 1.0).loss - bce(y - h, 1.0).loss) / (2 * h);
  CHECK(bce(y, 1.0).dldy == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("infonce: symmetric logits give log 2") {
  Vec a{1.0, 0.5, -0.2};
  Vec p{0.3, 1.0, 0.1};
  std::vector<Vec> negs{p};  // negative identical to positive
  double loss = infonce(a, p, spans(negs), 0.1, nullptr);
  CHECK(loss == doctest::Approx(kLog2).epsilon(1e-12));
}

TEST_CASE("infonce matches the direct oracle and its gradients check out") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 8;
    Vec a = randvec(rng, d);
    Vec p = randvec(rng, d);
    std::vector<Vec> negs;
    for (int k = 0; k < 3; ++k) negs.push_back(randvec(rng, d));
    const double tau = 0.2;

    InfoNceGrads grads;
    double loss = infonce(a, p, spans(negs), tau, &grads);
    CHECK(loss == doctest::Approx(infonce_oracle(a, p, negs, tau)).epsilon(1e-12));
    CHECK(loss >= 0.0);

    const double h = 1e-5;
    // Anchor gradient.
    for (int i = 0; i < d; ++i) {
      Vec au = a, ad = a;
      au[i] += h;
      ad[i] -= h;
      double fd = (infonce_oracle(au, p, negs, tau) - infonce_oracle(ad, p, negs, tau)) / (2 * h);
      CHECK(grads.danchor[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    // Positive gradient.
    for (int i = 0; i < d; ++i) {
      Vec pu = p, pd = p;
      pu[i] += h;
      pd[i] -= h;
      double fd = (infonce_oracle(a, pu, negs, tau) - infonce_oracle(a, pd, negs, tau)) / (2 * h);
      CHECK(grads.dpositive[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    // Every negative's gradient.
    for (std::size_t k = 0; k < negs.size(); ++k) {
      for (int i = 0; i < d; ++i) {
        std::vector<Vec> nu = negs, nd = negs;
        nu[k][i] += h;
        nd[k][i] -= h;
        double fd = (infonce_oracle(a, p, nu, tau) - infonce_oracle(a, p, nd, tau)) / (2 * h);
        CHECK(grads.dnegatives[k][i] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("infonce decreases when the positive aligns better") {
  Vec a{1.0, 0.0};
  std::vector<Vec> negs{Vec{0.0, 1.0}};
  Vec p_far{0.5, 0.5};
  Vec p_near{0.9, 0.1};
  double far_loss = infonce(a, p_far, spans(negs), 0.2, nullptr);
  double near_loss = infonce(a, p_near, spans(negs), 0.2, nullptr);
  CHECK(near_loss < far_loss);
}

TEST_CASE("infonce is invariant to rescaling any single input by 7.3") {
  Rng rng(23);
  const int d = 8;
  Vec a = randvec(rng, d);
  Vec p = randvec(rng, d);
  std::vector<Vec> negs{randvec(rng, d), randvec(rng, d)};
  const double tau = 0.1;
  const double base = infonce(a, p, spans(negs), tau, nullptr);

  Vec a2 = a;
  for (double& v : a2) v *= 7.3;
  CHECK(std::fabs(infonce(a2, p, spans(negs), tau, nullptr) - base) < 1e-9);

  Vec p2 = p;
  for (double& v : p2) v *= 7.3;
  CHECK(std::fabs(infonce(a, p2, spans(negs), tau, nullptr) - base) < 1e-9);

  std::vector<Vec> negs2 = negs;
  for (double& v : negs2[1]) v *= 7.3;
  CHECK(std::fabs(infonce(a, p, spans(negs2), tau, nullptr) - base) < 1e-9);
}

TEST_CASE("infonce requires at least one negative") {
  Vec a{1.0, 0.0};
  Vec p{0.5, 0.5};
  std::vector<Vec> none;
  CHECK_THROWS_AS(infonce(a, p, spans(none), 0.1, nullptr), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// intra_losses

namespace {

// Builds a tiny model whose review matrices we control directly.
struct IntraFixture {
  ModelParams p;
  Mat user_review;
  Mat item_review;

  IntraFixture(int n_users, int n_items, int d, std::uint64_t seed)
      : p(init_params(n_users, n_items, d, seed, {})),
        user_review(n_users, d),
        item_review(n_items, d) {
    Rng rng(seed + 1000);
    for (double& v : user_review.a) v = rng.normal(0.0, 1.0);
    for (double& v : item_review.a) v = rng.normal(0.0, 1.0);
  }
};

// Direct per-anchor softmax-CE oracle for the user side of intra_losses.
double intra_user_oracle(const ModelParams& p, const Mat& user_review,
                         const std::vector<int>& users, double tau) {
  double total = 0.0;
  for (int u : users) {
    Vec a{p.user_emb.row_span(u).begin(), p.user_emb.row_span(u).end()};
    Vec pos{user_review.row_span(u).begin(), user_review.row_span(u).end()};
    std::vector<Vec> negs;
    for (int w : users)
      if (w != u)
        negs.push_back(Vec{user_review.row_span(w).begin(), user_review.row_span(w).end()});
    total += infonce_oracle(a, pos, negs, tau);
  }
  return total / static_cast<double>(users.size());
}

}  // namespace

TEST_CASE("intra_losses: two users with identical review rows give log 2") {
  IntraFixture f(2, 2, 4, 7);
  for (int c = 0; c < 4; ++c) f.user_review.at(1, c) = f.user_review.at(0, c);

  LossConfig cfg;
  GradAccum g = GradAccum::like(f.p);
  IntraResult r = intra_losses(f.p, f.user_review, f.item_review, {0, 1}, {0, 1},
                               cfg, 1.0, g);
  CHECK(r.user_side_ran);
  CHECK(r.l_u == doctest::Approx(kLog2).epsilon(1e-12));
}

TEST_CASE("intra_losses matches the direct summation oracle on 4 users") {
  IntraFixture f(4, 4, 6, 11);
  LossConfig cfg;
  cfg.tau = 0.15;
  std::vector<int> users{0, 1, 2, 3};
  std::vector<int> items{0, 1, 2, 3};

  GradAccum g = GradAccum::like(f.p);
  IntraResult r = intra_losses(f.p, f.user_review, f.item_review, users, items,
                               cfg, 1.0, g);
  CHECK(r.l_u == doctest::Approx(intra_user_oracle(f.p, f.user_review, users, cfg.tau))
                     .epsilon(1e-10));
  CHECK(r.l_u >= 0.0);
  CHECK(r.l_v >= 0.0);
}

TEST_CASE("intra_losses gradient w.r.t. a user embedding matches finite differences") {
  IntraFixture f(3, 3, 5, 13);
  LossConfig cfg;
  std::vector<int> users{0, 1, 2};
  std::vector<int> items{0, 1, 2};

  GradAccum g = GradAccum::like(f.p);
  intra_losses(f.p, f.user_review, f.item_review, users, items, cfg, 1.0, g);
  REQUIRE(g.user_rows.count(1) == 1);

  const double h = 1e-6;
  for (int c = 0; c < 5; ++c) {
    IntraFixture fu = f, fd_ = f;
    fu.p.user_emb.at(1, c) += h;
    fd_.p.user_emb.at(1, c) -= h;
    double up = intra_user_oracle(fu.p, f.user_review, users, cfg.tau);
    double dn = intra_user_oracle(fd_.p, f.user_review, users, cfg.tau);
    CHECK(g.user_rows.at(1)[c] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
  }

  // Gradients land on ID embeddings only; nothing flows into review rows
  // (there is no review-side accumulator at all), and the scale knob is honored.
  GradAccum g2 = GradAccum::like(f.p);
  intra_losses(f.p, f.user_review, f.item_review, users, items, cfg, 0.5, g2);
  for (const auto& [u, row] : g2.user_rows)
    for (int c = 0; c < 5; ++c)
      CHECK(row[c] == doctest::Approx(0.5 * g.user_rows.at(u)[c]).epsilon(1e-12));
}

TEST_CASE("intra_losses rejects single-member batches") {
  IntraFixture f(3, 3, 4, 17);
  LossConfig cfg;
  GradAccum g = GradAccum::like(f.p);
  CHECK_THROWS_AS(
      intra_losses(f.p, f.user_review, f.item_review, {0}, {0, 1}, cfg, 1.0, g),
      std::invalid_argument);
  CHECK_THROWS_AS(
      intra_losses(f.p, f.user_review, f.item_review, {0, 1}, {2}, cfg, 1.0, g),
      std::invalid_argument);
  // Duplicates collapse: {0,0} has one distinct user.
  CHECK_THROWS_AS(
      intra_losses(f.p, f.user_review, f.item_review, {0, 0}, {0, 1}, cfg, 1.0, g),
      std::invalid_argument);
}

TEST_CASE("intra_losses excludes zero review rows and counts them") {
  IntraFixture f(4, 4, 4, 19);
  for (int c = 0; c < 4; ++c) f.user_review.at(2, c) = 0.0;

  LossConfig cfg;
  GradAccum g = GradAccum::like(f.p);
  IntraResult r = intra_losses(f.p, f.user_review, f.item_review, {0, 1, 2, 3},
                               {0, 1, 2, 3}, cfg, 1.0, g);
  CHECK(r.skipped_users == 1);
  CHECK(r.user_side_ran);
  CHECK(g.user_rows.count(2) == 0);  // excluded anchor receives no gradient
  CHECK(r.l_u == doctest::Approx(intra_user_oracle(f.p, f.user_review, {0, 1, 3},
                                                   cfg.tau))
                     .epsilon(1e-10));

  // All-zero side: fewer than 2 survivors, side skipped without error.
  IntraFixture f2(2, 2, 4, 23);
  for (double& v : f2.user_review.a) v = 0.0;
  GradAccum g2 = GradAccum::like(f2.p);
  IntraResult r2 = intra_losses(f2.p, f2.user_review, f2.item_review, {0, 1},
                                {0, 1}, cfg, 1.0, g2);
  CHECK_FALSE(r2.user_side_ran);
  CHECK(r2.l_u == 0.0);
  CHECK(r2.skipped_users == 2);
  CHECK(r2.item_side_ran);
}

// ---------------------------------------------------------------------------
// inter_loss

TEST_CASE("inter_loss: identical prototypes give log(batch)") {
  ModelParams p = init_params(5, 3, 4, 29, {});
  std::map<int, Vec> protos;
  Vec proto{0.5, -0.2, 0.1, 0.9};
  for (int u = 0; u < 5; ++u) protos[u] = proto;

  LossConfig cfg;
  GradAccum g = GradAccum::like(p);
  std::vector<int> users{0, 1, 2, 3, 4};
  double loss = inter_loss(p, protos, users, cfg, 1.0, g);
  CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("inter_loss matches a direct 3-user oracle and only moves user rows") {
  ModelParams p = init_params(3, 3, 4, 31, {});
  Rng rng(101);
  std::map<int, Vec> protos;
  for (int u = 0; u < 3; ++u) protos[u] = randvec(rng, 4);

  LossConfig cfg;
  cfg.tau = 0.25;
  std::vector<int> users{0, 1, 2};
  GradAccum g = GradAccum::like(p);
  double loss = inter_loss(p, protos, users, cfg, 1.0, g);

  // Oracle: anchor e_u, positive g_u, negatives g_{u'} for the other users.
  double expect = 0.0;
  for (int u : users) {
    Vec a{p.user_emb.row_span(u).begin(), p.user_emb.row_span(u).end()};
    std::vector<Vec> negs;
    for (int w : users)
      if (w != u) negs.push_back(protos.at(w));
    expect += infonce_oracle(a, protos.at(u), negs, cfg.tau);
  }
  expect /= 3.0;
  CHECK(loss == doctest::Approx(expect).epsilon(1e-10));

  CHECK(g.item_rows.empty());
  bool any_w = false;
  for (const auto& m : g.w)
    for (double v : m.a) any_w |= (v != 0.0);
  CHECK_FALSE(any_w);

  // Finite-difference check through the oracle on user 0.
  const double h = 1e-6;
  for (int c = 0; c < 4; ++c) {
    ModelParams pu = p, pd = p;
    pu.user_emb.at(0, c) += h;
    pd.user_emb.at(0, c) -= h;
    auto eval = [&](const ModelParams& pp) {
      double s = 0.0;
      for (int u : users) {
        Vec a{pp.user_emb.row_span(u).begin(), pp.user_emb.row_span(u).end()};
        std::vector<Vec> negs;
        for (int w : users)
          if (w != u) negs.push_back(protos.at(w));
        s += infonce_oracle(a, protos.at(u), negs, cfg.tau);
      }
      return s / 3.0;
    };
    CHECK(g.user_rows.at(0)[c] ==
          doctest::Approx((eval(pu) - eval(pd)) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("inter_loss names the user missing a prototype") {
  ModelParams p = init_params(3, 3, 4, 37, {});
  std::map<int, Vec> protos;
  protos[0] = Vec{1.0, 0.0, 0.0, 0.0};
  protos[2] = Vec{0.0, 1.0, 0.0, 0.0};

  LossConfig cfg;
  GradAccum g = GradAccum::like(p);
  try {
    inter_loss(p, protos, {0, 1, 2}, cfg, 1.0, g);
    FAIL("expected runtime_error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  CHECK_THROWS_AS(inter_loss(p, protos, {0}, cfg, 1.0, g), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// prediction_loss

TEST_CASE("prediction_loss is log 2 when the predictor is stuck at 0.5") {
  // Zero weights and biases make the sigmoid output exactly 0.5 everywhere.
  ModelParams p = init_params(2, 3, 4, 41, {6});
  for (auto& l : p.layers) {
    for (double& v : l.W.a) v = 0.0;
    for (double& v : l.b) v = 0.0;
  }
  std::vector<PredTriple> triples{
      {0, MixedVec::single(0), MixedVec::single(1)},
      {1, MixedVec::single(2), MixedVec::single(0)},
  };
  GradAccum g = GradAccum::like(p);
  double loss = prediction_loss(p, triples, g);
  CHECK(loss == doctest::Approx(kLog2).epsilon(1e-12));
}

TEST_CASE("prediction_loss gradients match finite differences everywhere") {
  ModelParams p = init_params(3, 5, 8, 43, {10});
  Rng rng(77);
  // Nontrivial mixtures so gradients fan out over item rows.
  std::vector<PredTriple> triples{
      {0, MixedVec{{{0, 0.7}, {2, 0.3}}}, MixedVec{{{1, 0.6}, {3, 0.2}, {4, 0.2}}}},
      {2, MixedVec{{{4, 1.0}}}, MixedVec{{{0, 0.5}, {1, 0.5}}}},
  };

  GradAccum g = GradAccum::like(p);
  double base = prediction_loss(p, triples, g);
  CHECK(base > 0.0);

  auto eval = [&](const ModelParams& pp) {
    GradAccum tmp = GradAccum::like(pp);
    return prediction_loss(pp, triples, tmp);
  };

  const double h = 1e-6;
  // User rows.
  for (int u : {0, 2}) {
    for (int c = 0; c < 8; ++c) {
      ModelParams pu = p, pd = p;
      pu.user_emb.at(u, c) += h;
      pd.user_emb.at(u, c) -= h;
      double fd = (eval(pu) - eval(pd)) / (2 * h);
      CHECK(g.user_rows.at(u)[c] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
  // Item rows appearing in mixtures (chain rule through the coefficients).
  for (int v : {0, 1, 2, 3, 4}) {
    REQUIRE(g.item_rows.count(v) == 1);
    for (int c = 0; c < 8; ++c) {
      ModelParams pu = p, pd = p;
      pu.item_emb.at(v, c) += h;
      pd.item_emb.at(v, c) -= h;
      double fd = (eval(pu) - eval(pd)) / (2 * h);
      CHECK(g.item_rows.at(v)[c] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
  // A weight matrix entry per layer.
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    ModelParams pu = p, pd = p;
    pu.layers[l].W.a[0] += h;
    pd.layers[l].W.a[0] -= h;
    double fd = (eval(pu) - eval(pd)) / (2 * h);
    CHECK(g.w[l].a[0] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("prediction_loss approaches zero for a confident correct predictor") {
  // Train a tiny model briefly on two fixed triples; loss must fall.
  ModelParams p = init_params(2, 2, 4, 47, {6});
  OptimizerState opt = OptimizerState::like(p);
  std::vector<PredTriple> triples{
      {0, MixedVec::single(0), MixedVec::single(1)},
      {1, MixedVec::single(1), MixedVec::single(0)},
  };
  GradAccum g0 = GradAccum::like(p);
  double first = prediction_loss(p, triples, g0);
  for (int it = 0; it < 400; ++it) {
    GradAccum g = GradAccum::like(p);
    prediction_loss(p, triples, g);
    adam_step(p, opt, g, 0.05);
  }
  GradAccum g1 = GradAccum::like(p);
  double last = prediction_loss(p, triples, g1);
  CHECK(last < first);
  CHECK(last < 0.05);
}

// ---------------------------------------------------------------------------
// combine

TEST_CASE("combine applies the objective weights exactly") {
  LossConfig cfg;
  cfg.gamma = 0.2;
  cfg.alpha = 0.05;
  LossBreakdown b = combine(0.9, 0.4, 0.3, 1.2, cfg);
  CHECK(b.l_prd == 0.9);
  CHECK(b.l_intra_u == 0.4);
  CHECK(b.l_intra_v == 0.3);
  CHECK(b.l_inter == 1.2);
  CHECK(std::fabs(b.total - (0.9 + 0.2 * (0.4 + 0.3) + 0.05 * 1.2)) < 1e-12);

  LossConfig zero;
  zero.gamma = 0.0;
  zero.alpha = 0.0;
  CHECK(combine(0.77, 5.0, 5.0, 5.0, zero).total == doctest::Approx(0.77).epsilon(1e-15));
}

TEST_CASE("total gradient is the weighted sum of the parts (linearity)") {
  IntraFixture f(4, 6, 5, 53);
  LossConfig cfg;
  cfg.tau = 0.2;
  cfg.gamma = 0.2;
  cfg.alpha = 0.05;
  std::vector<int> users{0, 1, 2, 3};
  std::vector<int> items{0, 1, 2, 3};
  std::map<int, Vec> protos;
  Rng rng(54);
  for (int u = 0; u < 4; ++u) protos[u] = randvec(rng, 5);
  std::vector<PredTriple> triples{
      {0, MixedVec::single(0), MixedVec::single(1)},
      {3, MixedVec::single(4), MixedVec::single(5)},
  };

  // Accumulate everything into one buffer with the objective weights...
  GradAccum g_all = GradAccum::like(f.p);
  prediction_loss(f.p, triples, g_all, 1.0);
  intra_losses(f.p, f.user_review, f.item_review, users, items, cfg, cfg.gamma, g_all);
  inter_loss(f.p, protos, users, cfg, cfg.alpha, g_all);

  // ...and separately with unit weights, combining by hand.
  GradAccum g_prd = GradAccum::like(f.p);
  GradAccum g_intra = GradAccum::like(f.p);
  GradAccum g_inter = GradAccum::like(f.p);
  prediction_loss(f.p, triples, g_prd, 1.0);
  intra_losses(f.p, f.user_review, f.item_review, users, items, cfg, 1.0, g_intra);
  inter_loss(f.p, protos, users, cfg, 1.0, g_inter);

  for (const auto& [u, row] : g_all.user_rows) {
    for (int c = 0; c < 5; ++c) {
      double manual = 0.0;
      if (g_prd.user_rows.count(u)) manual += g_prd.user_rows.at(u)[c];
      if (g_intra.user_rows.count(u)) manual += cfg.gamma * g_intra.user_rows.at(u)[c];
      if (g_inter.user_rows.count(u)) manual += cfg.alpha * g_inter.user_rows.at(u)[c];
      CHECK(row[c] == doctest::Approx(manual).epsilon(1e-12));
    }
  }
}

TEST_CASE("LossBreakdown totals are internally consistent") {
  // Property over random parts: total reconstructs from the stored terms.
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    LossConfig cfg;
    cfg.gamma = rng.uniform();
    cfg.alpha = rng.uniform();
    double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(), d = rng.uniform();
    LossBreakdown lb = combine(a, b, c, d, cfg);
    CHECK(std::fabs(lb.total - (lb.l_prd + cfg.gamma * (lb.l_intra_u + lb.l_intra_v) +
                                cfg.alpha * lb.l_inter)) < 1e-9);
    CHECK(lb.total >= 0.0);
    CHECK(std::isfinite(lb.total));
  }
}
