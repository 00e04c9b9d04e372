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

#include "protorec/losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace protorec {

namespace {

constexpr double kProbFloor = 1e-7;
constexpr double kProbCeil = 1.0 - 1e-7;

// Softmax cross-entropy for one anchor over the logits f(anchor, target[j])
// for j in denom (denom[0] is the positive). Optionally accumulates the
// gradient with respect to the anchor, scaled by `gscale`.
double anchor_softmax_ce(std::span<const double> anchor,
                         const std::vector<std::span<const double>>& targets,
                         const std::vector<int>& denom, double tau, double gscale,
                         Vec* danchor) {
  const int n = static_cast<int>(denom.size());
  Vec logits(n);
  for (int j = 0; j < n; ++j)
    logits[j] = scaled_cosine(anchor, targets[denom[j]], tau);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double s : logits) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  const double loss = lse - logits[0];

  if (danchor) {
    for (int j = 0; j < n; ++j) {
      const double q = std::exp(logits[j] - lse);
      const double coeff = (q - (j == 0 ? 1.0 : 0.0)) * gscale;
      if (coeff == 0.0) continue;
      Vec df = scaled_cosine_grad_x(anchor, targets[denom[j]], tau);
      axpy(coeff, df, *danchor);
    }
  }
  return loss;
}

// Denominator index lists per anchor: position i is the positive, followed by
// up to `cap` other members (all of them when cap <= 0), walked cyclically so
// every anchor sees a deterministic, evenly drawn negative set.
std::vector<int> denom_for(int i, int n, int cap) {
  std::vector<int> denom{i};
  const int avail = n - 1;
  const int take = cap <= 0 ? avail : std::min(cap, avail);
  for (int step = 1; step <= take; ++step) denom.push_back((i + step) % n);
  return denom;
}

}  // namespace

LossBreakdown combine(double l_prd, double l_intra_u, double l_intra_v,
                      double l_inter, const LossConfig& cfg) {
  LossBreakdown b;
  b.l_prd = l_prd;
  b.l_intra_u = l_intra_u;
  b.l_intra_v = l_intra_v;
  b.l_inter = l_inter;
  b.total = l_prd + cfg.gamma * (l_intra_u + l_intra_v) + cfg.alpha * l_inter;
  return b;
}

double scaled_cosine(std::span<const double> x, std::span<const double> y,
                     double tau) {
  if (tau <= 0.0) throw std::invalid_argument("scaled_cosine: tau must be > 0");
  if (x.size() != y.size())
    throw std::invalid_argument("scaled_cosine: dimension mismatch");
  const double nx = nrm2(x);
  const double ny = nrm2(y);
  if (nx == 0.0 || ny == 0.0)
    throw std::invalid_argument("scaled_cosine: zero-norm input");
  return dot(x, y) / (nx * ny * tau);
}

Vec scaled_cosine_grad_x(std::span<const double> x, std::span<const double> y,
                         double tau) {
  if (tau <= 0.0) throw std::invalid_argument("scaled_cosine: tau must be > 0");
  if (x.size() != y.size())
    throw std::invalid_argument("scaled_cosine: dimension mismatch");
  const double nx = nrm2(x);
  const double ny = nrm2(y);
  if (nx == 0.0 || ny == 0.0)
    throw std::invalid_argument("scaled_cosine: zero-norm input");
  const double inv = 1.0 / (nx * ny * tau);
  const double proj = dot(x, y) / (nx * nx);
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = inv * (y[i] - proj * x[i]);
  return g;
}

BceResult bce(double y_hat, double label) {
  const double yc = std::clamp(y_hat, kProbFloor, kProbCeil);
  BceResult r;
  r.loss = -(label * std::log(yc) + (1.0 - label) * std::log(1.0 - yc));
  // Outside the clamp window the evaluated loss is flat in y_hat.
  if (y_hat < kProbFloor || y_hat > kProbCeil)
    r.dldy = 0.0;
  else
    r.dldy = (yc - label) / (yc * (1.0 - yc));
  return r;
}

double infonce(std::span<const double> anchor, std::span<const double> positive,
               const std::vector<std::span<const double>>& negatives, double tau,
               InfoNceGrads* grads) {
  if (negatives.empty())
    throw std::invalid_argument("infonce: at least one negative required");

  const int n = static_cast<int>(negatives.size());
  Vec logits(n + 1);
  logits[0] = scaled_cosine(anchor, positive, tau);
  for (int k = 0; k < n; ++k)
    logits[k + 1] = scaled_cosine(anchor, negatives[k], tau);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double s : logits) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  const double loss = lse - logits[0];

  if (grads) {
    grads->danchor.assign(anchor.size(), 0.0);
    grads->dpositive.assign(anchor.size(), 0.0);
    grads->dnegatives.assign(n, Vec(anchor.size(), 0.0));
    const double qp = std::exp(logits[0] - lse);
    axpy(qp - 1.0, scaled_cosine_grad_x(anchor, positive, tau), grads->danchor);
    axpy(qp - 1.0, scaled_cosine_grad_x(positive, anchor, tau), grads->dpositive);
    for (int k = 0; k < n; ++k) {
      const double qn = std::exp(logits[k + 1] - lse);
      axpy(qn, scaled_cosine_grad_x(anchor, negatives[k], tau), grads->danchor);
      axpy(qn, scaled_cosine_grad_x(negatives[k], anchor, tau),
           grads->dnegatives[k]);
    }
  }
  return loss;
}

namespace {

// Shared core of the intra/inter batch losses: anchors are embedding-table
// rows identified by `rows`; target vectors are aligned with `rows`.
double batch_alignment(const Mat& anchor_table, const std::vector<int>& rows,
                       const std::vector<std::span<const double>>& targets,
                       const LossConfig& cfg, double weight,
                       const std::function<void(int, std::span<const double>)>& sink) {
  const int n = static_cast<int>(rows.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec danchor(anchor_table.cols, 0.0);
    total += anchor_softmax_ce(anchor_table.row_span(rows[i]), targets,
                               denom_for(i, n, cfg.batch_negatives), cfg.tau,
                               weight / n, &danchor);
    sink(rows[i], danchor);
  }
  return total / n;
}

std::vector<int> dedup(const std::vector<int>& xs) {
  std::vector<int> out(xs);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool zero_row(const Mat& m, int r) { return nrm2(m.row_span(r)) == 0.0; }

}  // namespace

IntraResult intra_losses(const ModelParams& p, const Mat& user_review,
                         const Mat& item_review, const std::vector<int>& users,
                         const std::vector<int>& items, const LossConfig& cfg,
                         double weight, GradAccum& g) {
  const std::vector<int> uu = dedup(users);
  const std::vector<int> vv = dedup(items);
  if (uu.size() < 2 || vv.size() < 2)
    throw std::invalid_argument(
        "intra_losses: batch must contain at least 2 distinct users and items");

  IntraResult res;

  auto run_side = [&](const Mat& anchor_table, const Mat& review,
                      const std::vector<int>& batch, int& skipped, double& loss,
                      bool& ran, auto add_row) {
    std::vector<int> keep;
    for (int r : batch) {
      if (zero_row(review, r))
        ++skipped;  // no text signal for this entity; it cannot anchor or serve
      else
        keep.push_back(r);
    }
    if (keep.size() < 2) return;

    std::vector<std::span<const double>> targets;
    std::vector<int> anchor_rows = keep;
    if (cfg.full_set_negatives) {
      // Negatives span every entity with review signal; anchors keep their
      // batch positions, so re-map anchor i to its full-set index.
      std::vector<int> full;
      for (int r = 0; r < review.rows; ++r)
        if (!zero_row(review, r)) full.push_back(r);
      targets.reserve(full.size());
      for (int r : full) targets.push_back(review.row_span(r));
      double total = 0.0;
      for (int r : keep) {
        const int self =
            static_cast<int>(std::lower_bound(full.begin(), full.end(), r) -
                             full.begin());
        std::vector<int> denom{self};
        for (int j = 0; j < static_cast<int>(full.size()); ++j)
          if (j != self) denom.push_back(j);
        Vec danchor(anchor_table.cols, 0.0);
        total += anchor_softmax_ce(anchor_table.row_span(r), targets, denom,
                                   cfg.tau, weight / keep.size(), &danchor);
        add_row(r, danchor);
      }
      loss = total / keep.size();
    } else {
      targets.reserve(keep.size());
      for (int r : keep) targets.push_back(review.row_span(r));
      loss = batch_alignment(anchor_table, anchor_rows, targets, cfg, weight,
                             add_row);
    }
    ran = true;
  };

  run_side(p.user_emb, user_review, uu, res.skipped_users, res.l_u,
           res.user_side_ran,
           [&](int r, std::span<const double> dg) { g.add_user_row(r, dg); });
  run_side(p.item_emb, item_review, vv, res.skipped_items, res.l_v,
           res.item_side_ran,
           [&](int r, std::span<const double> dg) { g.add_item_row(r, dg); });
  return res;
}

double inter_loss(const ModelParams& p, const std::map<int, Vec>& prototypes,
                  const std::vector<int>& users, const LossConfig& cfg,
                  double weight, GradAccum& g) {
  const std::vector<int> uu = dedup(users);
  if (uu.size() < 2)
    throw std::invalid_argument(
        "inter_loss: batch must contain at least 2 distinct users");

  std::vector<std::span<const double>> targets;
  targets.reserve(uu.size());
  for (int u : uu) {
    auto it = prototypes.find(u);
    if (it == prototypes.end())
      throw std::runtime_error("inter_loss: no prototype for user " +
                               std::to_string(u));
    targets.push_back(it->second);
  }
  return batch_alignment(p.user_emb, uu, targets, cfg, weight,
                         [&](int r, std::span<const double> dg) {
                           g.add_user_row(r, dg);
                         });
}

double prediction_loss(const ModelParams& p, const std::vector<PredTriple>& triples,
                       GradAccum& g, double weight) {
  if (triples.empty())
    throw std::invalid_argument("prediction_loss: empty batch");
  const double denom = 2.0 * static_cast<double>(triples.size());
  double total = 0.0;

  auto one_term = [&](int user, const MixedVec& mv, double label) {
    Vec input;
    input.reserve(2 * p.d);
    const double* urow = p.user_emb.row(user);
    input.insert(input.end(), urow, urow + p.d);
    const Vec item = resolve(p.item_emb, mv);
    input.insert(input.end(), item.begin(), item.end());

    ForwardCache cache;
    const double y = mlp_forward(p, input, &cache);
    const BceResult r = bce(y, label);
    total += r.loss;

    const double dy = r.dldy * weight / denom;
    if (dy != 0.0) {
      Vec dinput = mlp_backward(p, cache, dy, g);
      std::span<const double> duser(dinput.data(), p.d);
      std::span<const double> ditem(dinput.data() + p.d, p.d);
      g.add_user_row(user, duser);
      for (const auto& [row, coeff] : mv.parts) g.add_item_row(row, ditem, coeff);
    }
  };

  for (const auto& t : triples) {
    one_term(t.user, t.pos, 1.0);
    one_term(t.user, t.neg, 0.0);
  }
  return total / denom;
}

}  // namespace protorec
