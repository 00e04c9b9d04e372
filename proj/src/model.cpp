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

#include "protorec/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "protorec/rng.hpp"

namespace protorec {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'P', 'R', 'C', 'K', 'P', 'T', '0', '1'};

void check_finite(std::span<const double> g, const std::string& name) {
  if (!all_finite(g))
    throw std::runtime_error("adam_step: non-finite gradient for " + name);
}

}  // namespace

GradAccum GradAccum::like(const ModelParams& p) {
  GradAccum g;
  g.w.reserve(p.layers.size());
  g.b.reserve(p.layers.size());
  for (const auto& layer : p.layers) {
    g.w.emplace_back(layer.W.rows, layer.W.cols);
    g.b.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

void GradAccum::add_user_row(int u, std::span<const double> grad, double s) {
  auto& row = user_rows[u];
  if (row.empty()) row.assign(grad.size(), 0.0);
  axpy(s, grad, row);
}

void GradAccum::add_item_row(int v, std::span<const double> grad, double s) {
  auto& row = item_rows[v];
  if (row.empty()) row.assign(grad.size(), 0.0);
  axpy(s, grad, row);
}

void GradAccum::scale(double s) {
  for (auto& [u, row] : user_rows) scale_inplace(s, row);
  for (auto& [v, row] : item_rows) scale_inplace(s, row);
  for (auto& m : w) scale_inplace(s, m.a);
  for (auto& vb : b) scale_inplace(s, vb);
}

OptimizerState OptimizerState::like(const ModelParams& p) {
  OptimizerState o;
  o.m_user = Mat(p.user_emb.rows, p.user_emb.cols);
  o.v_user = Mat(p.user_emb.rows, p.user_emb.cols);
  o.m_item = Mat(p.item_emb.rows, p.item_emb.cols);
  o.v_item = Mat(p.item_emb.rows, p.item_emb.cols);
  for (const auto& layer : p.layers) {
    o.m_w.emplace_back(layer.W.rows, layer.W.cols);
    o.v_w.emplace_back(layer.W.rows, layer.W.cols);
    o.m_b.emplace_back(layer.b.size(), 0.0);
    o.v_b.emplace_back(layer.b.size(), 0.0);
  }
  return o;
}

ModelParams init_params(int n_users, int n_items, int d, std::uint64_t seed,
                        const std::vector<int>& hidden) {
  if (n_users <= 0 || n_items <= 0 || d <= 0)
    throw std::invalid_argument("init_params: sizes must be positive");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("init_params: hidden sizes must be positive");

  ModelParams p;
  p.d = d;
  p.user_emb = Mat(n_users, d);
  p.item_emb = Mat(n_items, d);
  for (int u = 0; u < n_users; ++u) {
    Rng rng = Rng::keyed({seed, 0x75656d62ULL, static_cast<std::uint64_t>(u)});
    for (int j = 0; j < d; ++j) p.user_emb.at(u, j) = rng.normal(0.0, 0.01);
  }
  for (int v = 0; v < n_items; ++v) {
    Rng rng = Rng::keyed({seed, 0x76656d62ULL, static_cast<std::uint64_t>(v)});
    for (int j = 0; j < d; ++j) p.item_emb.at(v, j) = rng.normal(0.0, 0.01);
  }

  std::vector<int> dims;
  dims.push_back(2 * d);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.W = Mat(dims[l], dims[l + 1]);
    layer.b.assign(dims[l + 1], 0.0);
    Rng rng = Rng::keyed({seed, 0x6c61796572ULL, static_cast<std::uint64_t>(l)});
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
    for (double& x : layer.W.a) x = (2.0 * rng.uniform() - 1.0) * limit;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

double mlp_forward(const ModelParams& p, std::span<const double> input,
                   ForwardCache* cache) {
  if (static_cast<int>(input.size()) != 2 * p.d)
    throw std::invalid_argument("mlp_forward: input size " +
                                std::to_string(input.size()) + " != 2*d = " +
                                std::to_string(2 * p.d));
  Vec x(input.begin(), input.end());
  if (cache) {
    cache->x.clear();
    cache->x.push_back(x);
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Vec z(layer.b);
    for (int i = 0; i < layer.W.rows; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wrow = layer.W.row(i);
      for (int j = 0; j < layer.W.cols; ++j) z[j] += xi * wrow[j];
    }
    const bool last = (l + 1 == p.layers.size());
    for (double& v : z)
      v = last ? 1.0 / (1.0 + std::exp(-v)) : (v > 0.0 ? v : 0.0);
    x = std::move(z);
    if (cache) cache->x.push_back(x);
  }
  return x[0];
}

Vec mlp_backward(const ModelParams& p, const ForwardCache& cache, double dy,
                 GradAccum& g) {
  if (cache.x.size() != p.layers.size() + 1)
    throw std::invalid_argument("mlp_backward: cache does not match model");
  const int L = static_cast<int>(p.layers.size());
  // dLoss/dz at the sigmoid output.
  const double y = cache.x[L][0];
  Vec grad = {dy * y * (1.0 - y)};
  for (int l = L - 1; l >= 0; --l) {
    const auto& layer = p.layers[l];
    const Vec& xin = cache.x[l];
    Mat& gw = g.w[l];
    Vec& gb = g.b[l];
    for (int j = 0; j < layer.W.cols; ++j) gb[j] += grad[j];
    Vec dxin(layer.W.rows, 0.0);
    for (int i = 0; i < layer.W.rows; ++i) {
      const double* wrow = layer.W.row(i);
      double* gwrow = gw.row(i);
      const double xi = xin[i];
      double acc = 0.0;
      for (int j = 0; j < layer.W.cols; ++j) {
        gwrow[j] += xi * grad[j];
        acc += wrow[j] * grad[j];
      }
      dxin[i] = acc;
    }
    if (l > 0) {
      // ReLU gate: post-activation is positive iff pre-activation was.
      for (int i = 0; i < layer.W.rows; ++i)
        if (xin[i] <= 0.0) dxin[i] = 0.0;
    }
    grad = std::move(dxin);
  }
  return grad;
}

Vec resolve(const Mat& item_emb, const MixedVec& mv) {
  Vec out(item_emb.cols, 0.0);
  for (const auto& [row, coeff] : mv.parts) axpy(coeff, item_emb.row_span(row), out);
  return out;
}

double predict(const ModelParams& p, std::span<const double> user_vec,
               std::span<const double> item_vec) {
  if (static_cast<int>(user_vec.size()) != p.d ||
      static_cast<int>(item_vec.size()) != p.d)
    throw std::invalid_argument(
        "predict: user/item vector sizes must equal embedding dim " +
        std::to_string(p.d));
  Vec input;
  input.reserve(2 * p.d);
  input.insert(input.end(), user_vec.begin(), user_vec.end());
  input.insert(input.end(), item_vec.begin(), item_vec.end());
  return mlp_forward(p, input, nullptr);
}

void adam_step(ModelParams& p, OptimizerState& opt, const GradAccum& g, double lr) {
  if (g.w.size() != p.layers.size())
    throw std::invalid_argument("adam_step: gradient does not match model");
  ++opt.t;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));

  auto update = [&](double& theta, double& m, double& v, double grad) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad * grad;
    theta -= lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
  };

  for (const auto& [u, row] : g.user_rows) {
    check_finite(row, "user embedding row " + std::to_string(u));
    for (int j = 0; j < p.d; ++j)
      update(p.user_emb.at(u, j), opt.m_user.at(u, j), opt.v_user.at(u, j), row[j]);
  }
  for (const auto& [v, row] : g.item_rows) {
    check_finite(row, "item embedding row " + std::to_string(v));
    for (int j = 0; j < p.d; ++j)
      update(p.item_emb.at(v, j), opt.m_item.at(v, j), opt.v_item.at(v, j), row[j]);
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    check_finite(g.w[l].a, "layer " + std::to_string(l) + " weights");
    check_finite(g.b[l], "layer " + std::to_string(l) + " biases");
    for (std::size_t i = 0; i < p.layers[l].W.a.size(); ++i)
      update(p.layers[l].W.a[i], opt.m_w[l].a[i], opt.v_w[l].a[i], g.w[l].a[i]);
    for (std::size_t i = 0; i < p.layers[l].b.size(); ++i)
      update(p.layers[l].b[i], opt.m_b[l][i], opt.v_b[l][i], g.b[l][i]);
  }
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, double x) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 3])) << 24);
}

}  // namespace

void save_checkpoint(const ModelParams& p, const std::string& path,
                     const std::string& extra_json) {
  json manifest;
  manifest["version"] = 1;
  manifest["d"] = p.d;
  manifest["n_users"] = p.user_emb.rows;
  manifest["n_items"] = p.item_emb.rows;
  std::vector<int> hidden;
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l)
    hidden.push_back(p.layers[l].W.cols);
  manifest["hidden"] = hidden;
  json arrays = json::array();
  arrays.push_back({{"name", "user_emb"}, {"rows", p.user_emb.rows}, {"cols", p.d}});
  arrays.push_back({{"name", "item_emb"}, {"rows", p.item_emb.rows}, {"cols", p.d}});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    arrays.push_back({{"name", "layer" + std::to_string(l) + "_w"},
                      {"rows", p.layers[l].W.rows},
                      {"cols", p.layers[l].W.cols}});
    arrays.push_back({{"name", "layer" + std::to_string(l) + "_b"},
                      {"rows", 1},
                      {"cols", static_cast<int>(p.layers[l].b.size())}});
  }
  manifest["arrays"] = arrays;
  manifest["extra"] = json::parse(extra_json);

  std::string blob(kMagic, sizeof(kMagic));
  const std::string mtext = manifest.dump();
  put_u32(blob, static_cast<std::uint32_t>(mtext.size()));
  blob += mtext;
  for (double x : p.user_emb.a) put_f32(blob, x);
  for (double x : p.item_emb.a) put_f32(blob, x);
  for (const auto& layer : p.layers) {
    for (double x : layer.W.a) put_f32(blob, x);
    for (double x : layer.b) put_f32(blob, x);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path, std::string* extra_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string blob = ss.str();

  if (blob.size() < sizeof(kMagic) + 4 ||
      std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + ": bad checkpoint magic");
  const std::uint32_t mlen = get_u32(blob, sizeof(kMagic));
  std::size_t off = sizeof(kMagic) + 4;
  if (blob.size() < off + mlen)
    throw std::runtime_error(path + ": truncated checkpoint manifest");
  json manifest;
  try {
    manifest = json::parse(blob.substr(off, mlen));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": corrupt checkpoint manifest: " + e.what());
  }
  off += mlen;

  ModelParams p;
  p.d = manifest.at("d").get<int>();
  const int n_users = manifest.at("n_users").get<int>();
  const int n_items = manifest.at("n_items").get<int>();
  const auto hidden = manifest.at("hidden").get<std::vector<int>>();
  p.user_emb = Mat(n_users, p.d);
  p.item_emb = Mat(n_items, p.d);
  std::vector<int> dims;
  dims.push_back(2 * p.d);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.W = Mat(dims[l], dims[l + 1]);
    layer.b.assign(dims[l + 1], 0.0);
    p.layers.push_back(std::move(layer));
  }

  auto read_array = [&](std::span<double> dst, const std::string& name) {
    if (blob.size() < off + 4 * dst.size())
      throw std::runtime_error(path + ": truncated checkpoint array " + name);
    for (double& x : dst) {
      x = static_cast<double>(std::bit_cast<float>(get_u32(blob, off)));
      off += 4;
    }
  };
  read_array(p.user_emb.a, "user_emb");
  read_array(p.item_emb.a, "item_emb");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    read_array(p.layers[l].W.a, "layer" + std::to_string(l) + "_w");
    read_array(p.layers[l].b, "layer" + std::to_string(l) + "_b");
  }
  if (off != blob.size())
    throw std::runtime_error(path + ": trailing bytes in checkpoint");

  if (extra_json)
    *extra_json = manifest.contains("extra") ? manifest["extra"].dump() : "{}";
  return p;
}

}  // namespace protorec
