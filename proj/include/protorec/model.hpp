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

#ifndef PROTOREC_MODEL_HPP_
#define PROTOREC_MODEL_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "protorec/la.hpp"

namespace protorec {

// Fully-connected layer; hidden layers use ReLU, the final layer sigmoid.
struct DenseLayer {
  Mat W;  // (in x out)
  Vec b;  // (out)
};

// Per-client scoring model: ID embedding tables plus an MLP that maps the
// concatenated (user, item) pair to an interaction probability.
struct ModelParams {
  int d = 0;
  Mat user_emb;  // (n_users x d)
  Mat item_emb;  // (n_items x d)
  std::vector<DenseLayer> layers;  // dims: 2d -> hidden... -> 1
};

// Post-activation values per layer; x[0] is the MLP input.
struct ForwardCache {
  std::vector<Vec> x;
};

// A sparse convex combination of item-embedding rows. Keeping the recipe
// (rather than the resolved vector) lets gradients flow back into each
// contributing row with its coefficient.
struct MixedVec {
  std::vector<std::pair<int, double>> parts;  // (item row, coefficient)

  static MixedVec single(int row) { return {{{row, 1.0}}}; }
};

// Materialize a mixture against the current item-embedding table.
Vec resolve(const Mat& item_emb, const MixedVec& mv);

// Sparse embedding-row gradients plus dense layer gradients.
struct GradAccum {
  std::map<int, Vec> user_rows;
  std::map<int, Vec> item_rows;
  std::vector<Mat> w;
  std::vector<Vec> b;

  static GradAccum like(const ModelParams& p);
  void add_user_row(int u, std::span<const double> g, double scale = 1.0);
  void add_item_row(int v, std::span<const double> g, double scale = 1.0);
  void scale(double s);
};

// Adam moments; embedding rows are updated lazily (only touched rows per
// step), with bias correction driven by the global step count.
struct OptimizerState {
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Mat m_user, v_user, m_item, v_item;
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;

  static OptimizerState like(const ModelParams& p);
};

// Embeddings ~ N(0, 0.01^2); layer weights Glorot-uniform; biases zero.
ModelParams init_params(int n_users, int n_items, int d, std::uint64_t seed,
                        const std::vector<int>& hidden);

// Forward pass through the MLP. `input` must have size 2d. If `cache` is
// non-null it is filled for a later backward pass. Returns a value in (0,1).
double mlp_forward(const ModelParams& p, std::span<const double> input,
                   ForwardCache* cache);

// Backward pass. `dy` is dLoss/d(output). Accumulates layer gradients into
// `g` and returns dLoss/d(input) of size 2d.
Vec mlp_backward(const ModelParams& p, const ForwardCache& cache, double dy,
                 GradAccum& g);

// Convenience: concatenate user/item vectors and run the MLP.
double predict(const ModelParams& p, std::span<const double> user_vec,
               std::span<const double> item_vec);

// One Adam step over everything `g` touches. Throws std::runtime_error naming
// the parameter if any gradient is non-finite.
void adam_step(ModelParams& p, OptimizerState& opt, const GradAccum& g, double lr);

// Binary checkpoint: magic "PRCKPT01", little-endian u32 manifest length, a
// JSON manifest, then each array as raw little-endian float32. `extra` is
// merged into the manifest. Saving a loaded checkpoint reproduces the bytes.
void save_checkpoint(const ModelParams& p, const std::string& path,
                     const std::string& extra_json = "{}");
ModelParams load_checkpoint(const std::string& path, std::string* extra_json = nullptr);

}  // namespace protorec

#endif  // PROTOREC_MODEL_HPP_
