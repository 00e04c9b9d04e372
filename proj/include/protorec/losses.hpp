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

#ifndef PROTOREC_LOSSES_HPP_
#define PROTOREC_LOSSES_HPP_

#include <map>
#include <span>
#include <vector>

#include "protorec/la.hpp"
#include "protorec/model.hpp"

namespace protorec {

// Weights and knobs for the composite training objective:
//   total = prediction + gamma*(user_align + item_align) + alpha*cross_align
struct LossConfig {
  double tau = 0.1;    // temperature for scaled-cosine similarities
  double gamma = 0.2;  // weight of the intra-domain alignment terms
  double alpha = 0.05; // weight of the cross-domain prototype term
  // Cap on in-batch negatives per anchor; <= 0 means every other batch
  // member serves as a negative.
  int batch_negatives = 0;
  // Small-fixture mode: negatives are all rows of the target table rather
  // than just the current batch.
  bool full_set_negatives = false;
};

struct LossBreakdown {
  double l_prd = 0.0;
  double l_intra_u = 0.0;
  double l_intra_v = 0.0;
  double l_inter = 0.0;
  double total = 0.0;
};

LossBreakdown combine(double l_prd, double l_intra_u, double l_intra_v,
                      double l_inter, const LossConfig& cfg);

// Temperature-scaled cosine similarity: (x . y) / (|x| |y| tau).
// Throws std::invalid_argument on zero vectors or tau <= 0.
double scaled_cosine(std::span<const double> x, std::span<const double> y, double tau);

// d scaled_cosine(x, y) / dx, with y held fixed.
Vec scaled_cosine_grad_x(std::span<const double> x, std::span<const double> y,
                         double tau);

// Binary cross-entropy on a probability. Predictions are clamped to
// [1e-7, 1 - 1e-7]; the gradient is zero in the clamped region so it stays
// consistent with the loss actually evaluated.
struct BceResult {
  double loss = 0.0;
  double dldy = 0.0;
};
BceResult bce(double y_hat, double label);

// Softmax cross-entropy over scaled-cosine logits for one anchor:
//   -log[ exp f(a,p) / (exp f(a,p) + sum_n exp f(a,n)) ]
// Exact gradients with respect to the anchor, the positive, and every
// negative. Requires >= 1 negative and no zero vectors.
struct InfoNceGrads {
  Vec danchor;
  Vec dpositive;
  std::vector<Vec> dnegatives;
};
double infonce(std::span<const double> anchor, std::span<const double> positive,
               const std::vector<std::span<const double>>& negatives, double tau,
               InfoNceGrads* grads);

// In-batch alignment of ID embeddings with fixed review embeddings, user and
// item side. Anchors are de-duplicated batch indices; entries whose review
// row is all-zero are excluded (counted in skipped_*). Gradients, scaled by
// `weight`, flow to ID embedding rows only. Throws std::invalid_argument if
// a side has fewer than 2 distinct anchors before exclusion; after exclusion
// a side with < 2 survivors is skipped (side_ran flag false, loss 0).
struct IntraResult {
  double l_u = 0.0;
  double l_v = 0.0;
  int skipped_users = 0;
  int skipped_items = 0;
  bool user_side_ran = false;
  bool item_side_ran = false;
};
IntraResult intra_losses(const ModelParams& p, const Mat& user_review,
                         const Mat& item_review, const std::vector<int>& users,
                         const std::vector<int>& items, const LossConfig& cfg,
                         double weight, GradAccum& g);

// In-batch alignment of user ID embeddings with fixed aggregated prototypes
// (keyed by local user index). Gradients, scaled by `weight`, flow to user
// embeddings only. Throws std::runtime_error naming the user if a batch user
// has no prototype; std::invalid_argument if fewer than 2 distinct users.
double inter_loss(const ModelParams& p, const std::map<int, Vec>& prototypes,
                  const std::vector<int>& users, const LossConfig& cfg,
                  double weight, GradAccum& g);

// One training example: a user with one observed and one sampled item, both
// as mixtures over item-embedding rows.
struct PredTriple {
  int user = 0;
  MixedVec pos;
  MixedVec neg;
};

// Mean binary cross-entropy over 2*|triples| scored pairs (labels 1 and 0),
// with exact backprop through the MLP into the user row and each item row of
// the mixtures. Gradients are scaled by `weight`.
double prediction_loss(const ModelParams& p, const std::vector<PredTriple>& triples,
                       GradAccum& g, double weight = 1.0);

}  // namespace protorec

#endif  // PROTOREC_LOSSES_HPP_
