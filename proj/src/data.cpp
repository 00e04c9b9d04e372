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

#include "protorec/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "protorec/rng.hpp"

namespace protorec {

namespace {

using json = nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// RFC-4180 record reader: quoted fields may contain commas, escaped quotes,
// and newlines. Returns records with the 1-based line each record starts on.
struct CsvRecord {
  std::vector<std::string> fields;
  int line = 0;
};

std::vector<CsvRecord> parse_csv(const std::string& text) {
  std::vector<CsvRecord> records;
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  bool field_started = false;
  int line = 1;
  int record_line = 1;

  auto end_field = [&] {
    fields.push_back(cur);
    cur.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back({std::move(fields), record_line});
    fields = {};
    record_line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cur.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && cur.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          cur.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        record_line = line;
        break;
      default:
        field_started = true;
        cur.push_back(c);
        break;
    }
  }
  if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
  if (!cur.empty() || !fields.empty()) end_record();
  return records;
}

std::vector<Interaction> read_interactions_csv(const std::string& path) {
  auto records = parse_csv(read_file(path));
  if (records.empty()) throw std::runtime_error(path + ": missing header");
  const std::vector<std::string> wanted = {"user_id", "item_id", "rating",
                                           "review_text", "timestamp"};
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < records[0].fields.size(); ++i)
    col[records[0].fields[i]] = static_cast<int>(i);
  for (const auto& name : wanted)
    if (!col.count(name))
      throw std::runtime_error(path + ": header missing column '" + name + "'");

  std::vector<Interaction> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error(path + ":" + std::to_string(rec.line) + ": " + msg);
    };
    if (rec.fields.size() != records[0].fields.size())
      fail("expected " + std::to_string(records[0].fields.size()) + " fields, got " +
           std::to_string(rec.fields.size()));
    Interaction it;
    it.user_id = rec.fields[col["user_id"]];
    it.item_id = rec.fields[col["item_id"]];
    if (it.user_id.empty()) fail("empty user_id");
    if (it.item_id.empty()) fail("empty item_id");
    try {
      std::size_t pos = 0;
      it.rating = std::stod(rec.fields[col["rating"]], &pos);
      if (pos != rec.fields[col["rating"]].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("bad rating '" + rec.fields[col["rating"]] + "'");
    }
    it.review_text = rec.fields[col["review_text"]];
    const std::string& ts = rec.fields[col["timestamp"]];
    if (ts.empty()) {
      it.timestamp = 0;
    } else {
      try {
        std::size_t pos = 0;
        it.timestamp = std::stoll(ts, &pos);
        if (pos != ts.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail("bad timestamp '" + ts + "'");
      }
    }
    rows.push_back(std::move(it));
  }
  return rows;
}

std::vector<Interaction> read_interactions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<Interaction> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(std::string("json parse error: ") + e.what());
    }
    Interaction it;
    if (!j.contains("user_id") || !j["user_id"].is_string()) fail("missing user_id");
    if (!j.contains("item_id") || !j["item_id"].is_string()) fail("missing item_id");
    if (!j.contains("rating") || !j["rating"].is_number()) fail("missing rating");
    it.user_id = j["user_id"].get<std::string>();
    it.item_id = j["item_id"].get<std::string>();
    if (it.user_id.empty()) fail("empty user_id");
    if (it.item_id.empty()) fail("empty item_id");
    it.rating = j["rating"].get<double>();
    if (j.contains("review_text")) it.review_text = j["review_text"].get<std::string>();
    if (j.contains("timestamp")) it.timestamp = j["timestamp"].get<long long>();
    rows.push_back(std::move(it));
  }
  return rows;
}

// Iterative filtering to a fixed point: users need >= 5 distinct items,
// items >= 10 distinct users. Removing users can drop items below the floor
// and vice versa, so iterate until stable.
void filter_pairs(std::set<std::pair<std::string, std::string>>& pairs) {
  for (;;) {
    std::map<std::string, int> user_deg, item_deg;
    for (const auto& [u, v] : pairs) {
      ++user_deg[u];
      ++item_deg[v];
    }
    std::set<std::string> bad_users, bad_items;
    for (const auto& [u, n] : user_deg)
      if (n < 5) bad_users.insert(u);
    for (const auto& [v, n] : item_deg)
      if (n < 10) bad_items.insert(v);
    if (bad_users.empty() && bad_items.empty()) return;
    for (auto it = pairs.begin(); it != pairs.end();) {
      if (bad_users.count(it->first) || bad_items.count(it->second))
        it = pairs.erase(it);
      else
        ++it;
    }
  }
}

DomainDataset build_dataset(const std::vector<Interaction>& rows, bool filter) {
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : rows)
    if (r.rating > 0.0) pairs.insert({r.user_id, r.item_id});

  if (filter) filter_pairs(pairs);
  if (pairs.empty())
    throw std::runtime_error(filter ? "dataset empty after filtering"
                                    : "dataset has no positive interactions");

  std::set<std::string> users, items;
  for (const auto& [u, v] : pairs) {
    users.insert(u);
    items.insert(v);
  }

  DomainDataset ds;
  ds.user_ids.assign(users.begin(), users.end());
  ds.item_ids.assign(items.begin(), items.end());
  std::unordered_map<std::string, int> uidx, iidx;
  for (int i = 0; i < ds.n_users(); ++i) uidx[ds.user_ids[i]] = i;
  for (int i = 0; i < ds.n_items(); ++i) iidx[ds.item_ids[i]] = i;

  ds.user_items.assign(ds.n_users(), {});
  for (const auto& [u, v] : pairs) ds.user_items[uidx[u]].push_back(iidx[v]);
  for (auto& vs : ds.user_items) std::sort(vs.begin(), vs.end());

  for (const auto& r : rows)
    if (r.rating > 0.0 && pairs.count({r.user_id, r.item_id})) ds.raw.push_back(r);

  ds.user_global.resize(ds.n_users());
  for (int i = 0; i < ds.n_users(); ++i) ds.user_global[i] = i;
  return ds;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (c < 128 && std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint64_t fnv1a64_seeded(std::uint64_t seed, const std::string& token) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Feature-hash token counts into dim buckets, weight by smooth IDF over the
// entity corpus, L2-normalize. Empty documents stay all-zero.
Mat hash_tfidf(const std::vector<std::string>& docs, int dim, std::uint64_t seed,
               ExecPolicy exec) {
  const int n = static_cast<int>(docs.size());
  Mat tf(n, dim);
  par_for(exec, n, [&](int i) {
    for (const auto& tok : tokenize(docs[i]))
      tf.at(i, static_cast<int>(fnv1a64_seeded(seed, tok) % dim)) += 1.0;
  });

  std::vector<int> df(dim, 0);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < dim; ++b)
      if (tf.at(i, b) > 0.0) ++df[b];
  Vec idf(dim);
  for (int b = 0; b < dim; ++b)
    idf[b] = std::log((1.0 + n) / (1.0 + df[b])) + 1.0;

  par_for(exec, n, [&](int i) {
    for (int b = 0; b < dim; ++b) tf.at(i, b) *= idf[b];
    l2_normalize(tf.row_span(i));
  });
  return tf;
}

struct PrecomputedTable {
  int dim = 0;
  std::unordered_map<std::string, Vec> rows;
};

PrecomputedTable read_precomputed(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  PrecomputedTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
    throw std::runtime_error(path + ": first line must be 'dim=<d>'");
  t.dim = std::stoi(line.substr(4));
  if (t.dim <= 0) throw std::runtime_error(path + ": bad dim");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing tab");
    std::string id = line.substr(0, tab);
    Vec v;
    std::istringstream ss(line.substr(tab + 1));
    double x;
    while (ss >> x) v.push_back(x);
    if (static_cast<int>(v.size()) != t.dim)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.dim) + " values, got " +
                               std::to_string(v.size()));
    t.rows[id] = std::move(v);
  }
  return t;
}

Mat rows_from_table(const PrecomputedTable& t, const std::vector<std::string>& ids,
                    int dim, std::uint64_t seed, bool allow_projection,
                    const std::string& path) {
  std::vector<std::string> missing;
  for (const auto& id : ids)
    if (!t.rows.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = path + ": missing embeddings for ids:";
    for (const auto& id : missing) msg += " " + id;
    throw std::runtime_error(msg);
  }

  Mat proj;
  if (t.dim != dim) {
    if (!allow_projection)
      throw std::runtime_error(path + ": embedding dim " + std::to_string(t.dim) +
                               " does not match requested dim " + std::to_string(dim));
    proj = Mat(t.dim, dim);
    Rng rng = Rng::keyed({seed, 0x70726f6aULL});  // "proj"
    const double sd = 1.0 / std::sqrt(static_cast<double>(t.dim));
    for (double& w : proj.a) w = rng.normal(0.0, sd);
  }

  Mat out(static_cast<int>(ids.size()), dim);
  for (int i = 0; i < out.rows; ++i) {
    const Vec& src = t.rows.at(ids[i]);
    if (t.dim == dim) {
      std::copy(src.begin(), src.end(), out.row(i));
    } else {
      for (int j = 0; j < dim; ++j) {
        double s = 0.0;
        for (int k = 0; k < t.dim; ++k) s += src[k] * proj.at(k, j);
        out.at(i, j) = s;
      }
    }
    if (!all_finite(out.row_span(i)))
      throw std::runtime_error(path + ": non-finite embedding for id " + ids[i]);
    l2_normalize(out.row_span(i));
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

bool DomainDataset::user_interacted(int u, int v) const {
  const auto& vs = user_items[u];
  return std::binary_search(vs.begin(), vs.end(), v);
}

DomainDataset load_domain(const std::string& path, FileFormat format, bool filter) {
  auto rows = format == FileFormat::csv ? read_interactions_csv(path)
                                        : read_interactions_jsonl(path);
  return build_dataset(rows, filter);
}

void embed_reviews(DomainDataset& ds, EmbedMode mode, int dim, std::uint64_t seed,
                   const std::string& path, bool allow_projection, ExecPolicy exec) {
  if (dim <= 0) throw std::invalid_argument("embed_reviews: dim must be > 0");
  if (mode == EmbedMode::hashing) {
    std::vector<std::string> user_docs(ds.n_users()), item_docs(ds.n_items());
    std::unordered_map<std::string, int> uidx, iidx;
    for (int i = 0; i < ds.n_users(); ++i) uidx[ds.user_ids[i]] = i;
    for (int i = 0; i < ds.n_items(); ++i) iidx[ds.item_ids[i]] = i;
    for (const auto& r : ds.raw) {
      if (r.review_text.empty()) continue;
      auto ui = uidx.find(r.user_id);
      auto ii = iidx.find(r.item_id);
      if (ui != uidx.end()) {
        if (!user_docs[ui->second].empty()) user_docs[ui->second] += ' ';
        user_docs[ui->second] += r.review_text;
      }
      if (ii != iidx.end()) {
        if (!item_docs[ii->second].empty()) item_docs[ii->second] += ' ';
        item_docs[ii->second] += r.review_text;
      }
    }
    ds.user_review_emb = hash_tfidf(user_docs, dim, seed, exec);
    ds.item_review_emb = hash_tfidf(item_docs, dim, seed, exec);
  } else {
    auto table = read_precomputed(path);
    ds.user_review_emb =
        rows_from_table(table, ds.user_ids, dim, seed, allow_projection, path);
    ds.item_review_emb =
        rows_from_table(table, ds.item_ids, dim, seed, allow_projection, path);
  }
}

void split_leave_one_out(DomainDataset& ds, std::uint64_t seed) {
  ds.train_pairs.clear();
  ds.test_pairs.clear();
  ds.eval_negatives.clear();
  ds.train_items_per_user.assign(ds.n_users(), {});
  ds.split_skipped_users = 0;

  // Latest timestamp per (user, item), 0 when absent.
  std::map<std::pair<int, int>, long long> ts;
  if (!ds.raw.empty()) {
    std::unordered_map<std::string, int> uidx, iidx;
    for (int i = 0; i < ds.n_users(); ++i) uidx[ds.user_ids[i]] = i;
    for (int i = 0; i < ds.n_items(); ++i) iidx[ds.item_ids[i]] = i;
    for (const auto& r : ds.raw) {
      auto ui = uidx.find(r.user_id);
      auto ii = iidx.find(r.item_id);
      if (ui == uidx.end() || ii == iidx.end()) continue;
      auto key = std::make_pair(ui->second, ii->second);
      auto it = ts.find(key);
      if (it == ts.end() || r.timestamp > it->second) ts[key] = r.timestamp;
    }
  }

  for (int u = 0; u < ds.n_users(); ++u) {
    const auto& items = ds.user_items[u];
    if (items.size() < 2) {
      ++ds.split_skipped_users;
      for (int v : items) {
        ds.train_pairs.emplace_back(u, v);
        ds.train_items_per_user[u].push_back(v);
      }
      continue;
    }

    long long best_ts = 0;
    for (int v : items) {
      auto it = ts.find({u, v});
      if (it != ts.end() && it->second > best_ts) best_ts = it->second;
    }
    std::vector<int> candidates;
    if (best_ts > 0) {
      for (int v : items) {
        auto it = ts.find({u, v});
        if (it != ts.end() && it->second == best_ts) candidates.push_back(v);
      }
    } else {
      candidates = items;
    }
    Rng pick = Rng::keyed({seed, 0x73706c6974ULL, static_cast<std::uint64_t>(u)});
    int test_item = candidates.size() == 1
                        ? candidates[0]
                        : candidates[pick.uniform_int(candidates.size())];

    ds.test_pairs.emplace_back(u, test_item);
    for (int v : items)
      if (v != test_item) {
        ds.train_pairs.emplace_back(u, v);
        ds.train_items_per_user[u].push_back(v);
      }

    std::vector<int> pool;
    pool.reserve(ds.n_items() - items.size());
    for (int v = 0; v < ds.n_items(); ++v)
      if (!ds.user_interacted(u, v)) pool.push_back(v);
    if (pool.size() < 99)
      throw std::runtime_error("user " + ds.user_ids[u] +
                               ": fewer than 99 negative candidates (" +
                               std::to_string(pool.size()) + ")");
    Rng neg = Rng::keyed({seed, 0x6e656773ULL, static_cast<std::uint64_t>(u)});
    std::vector<int> negs(99);
    for (int k = 0; k < 99; ++k) {
      std::size_t j = k + neg.uniform_int(pool.size() - k);
      std::swap(pool[k], pool[j]);
      negs[k] = pool[k];
    }
    ds.eval_negatives.push_back(std::move(negs));
  }
}

std::vector<TrainTriple> sample_training_negatives(const DomainDataset& ds,
                                                   std::uint64_t seed, int epoch) {
  std::vector<TrainTriple> out(ds.train_pairs.size());
  for (std::size_t i = 0; i < ds.train_pairs.size(); ++i) {
    auto [u, v] = ds.train_pairs[i];
    const auto& interacted = ds.user_items[u];
    const std::size_t n_candidates = ds.n_items() - interacted.size();
    if (n_candidates == 0)
      throw std::runtime_error("user " + ds.user_ids[u] + ": no negative candidates");
    Rng rng = Rng::keyed({seed, 0x747261696e6e6567ULL, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(i)});
    // k-th non-interacted item, walking the sorted interacted set.
    int pos = static_cast<int>(rng.uniform_int(n_candidates));
    for (int w : interacted) {
      if (w <= pos)
        ++pos;
      else
        break;
    }
    out[i] = {u, v, pos};
  }
  return out;
}

std::vector<DomainDataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_users < 1 || spec.n_items_per_domain < 1 || spec.n_domains < 1 ||
      spec.latent_dim < 1 || spec.review_dim < 1)
    throw std::invalid_argument("generate_synthetic: counts must be >= 1");
  if (!(spec.density > 0.0 && spec.density < 1.0))
    throw std::invalid_argument("generate_synthetic: density must be in (0,1)");
  if (!(spec.overlap_fraction > 0.0 && spec.overlap_fraction <= 1.0))
    throw std::invalid_argument("generate_synthetic: overlap_fraction must be in (0,1]");
  if (!(spec.sharpness > 0.0))
    throw std::invalid_argument("generate_synthetic: sharpness must be > 0");
  if (!std::isfinite(spec.affinity_offset))
    throw std::invalid_argument("generate_synthetic: affinity_offset must be finite");
  if (spec.density * spec.n_items_per_domain < 2.0)
    throw std::invalid_argument(
        "generate_synthetic: parameters imply fewer than 2 interactions per user");

  const int n_users = spec.n_users;
  const int n_items = spec.n_items_per_domain;
  const int K = spec.n_domains;
  const int cap = n_items - 101;  // headroom for 99 eval negatives + margin
  if (cap < 2)
    throw std::invalid_argument(
        "generate_synthetic: need at least 103 items per domain for eval negatives");

  // Shared user latents drive cross-domain structure.
  Mat z(n_users, spec.latent_dim);
  for (int u = 0; u < n_users; ++u) {
    Rng rng = Rng::keyed({spec.seed, 0x7a75ULL, static_cast<std::uint64_t>(u)});
    for (int k2 = 0; k2 < spec.latent_dim; ++k2) z.at(u, k2) = rng.normal();
  }

  const int n_overlap =
      std::min(n_users, static_cast<int>(std::ceil(spec.overlap_fraction * n_users)));

  char idbuf[32];
  std::vector<std::string> all_user_ids(n_users);
  for (int u = 0; u < n_users; ++u) {
    std::snprintf(idbuf, sizeof(idbuf), "u%05d", u);
    all_user_ids[u] = idbuf;
  }

  std::vector<DomainDataset> out;
  for (int k = 0; k < K; ++k) {
    DomainDataset ds;
    ds.domain_id = k;

    std::vector<int> members;
    for (int u = 0; u < n_users; ++u)
      if (u < n_overlap || (u - n_overlap) % K == k) members.push_back(u);

    ds.user_ids.resize(members.size());
    ds.user_global = members;
    for (std::size_t i = 0; i < members.size(); ++i)
      ds.user_ids[i] = all_user_ids[members[i]];

    ds.item_ids.resize(n_items);
    for (int v = 0; v < n_items; ++v) {
      std::snprintf(idbuf, sizeof(idbuf), "d%d_i%05d", k, v);
      ds.item_ids[v] = idbuf;
    }

    Mat w(n_items, spec.latent_dim);
    for (int v = 0; v < n_items; ++v) {
      Rng rng = Rng::keyed({spec.seed, 0x7776ULL, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(v)});
      for (int k2 = 0; k2 < spec.latent_dim; ++k2) w.at(v, k2) = rng.normal();
    }

    const int nu = static_cast<int>(members.size());
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
    Mat prob(nu, n_items);
    double prob_sum = 0.0;
    for (int i = 0; i < nu; ++i) {
      for (int v = 0; v < n_items; ++v) {
        double s = sigmoid(spec.sharpness *
                           (inv_sqrt * dot(z.row_span(members[i]), w.row_span(v)) -
                            spec.affinity_offset));
        prob.at(i, v) = s;
        prob_sum += s;
      }
    }
    const double target = spec.density * nu * n_items;
    const double factor = target / prob_sum;

    ds.user_items.assign(nu, {});
    for (int i = 0; i < nu; ++i) {
      Rng rng = Rng::keyed({spec.seed, 0x79ULL, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(members[i])});
      for (int v = 0; v < n_items; ++v)
        if (rng.uniform() < std::min(1.0, prob.at(i, v) * factor))
          ds.user_items[i].push_back(v);

      auto& items = ds.user_items[i];
      if (static_cast<int>(items.size()) > cap) {
        // drop lowest-probability picks first
        std::stable_sort(items.begin(), items.end(), [&](int a, int b) {
          return prob.at(i, a) > prob.at(i, b);
        });
        items.resize(cap);
      }
      while (static_cast<int>(items.size()) < 2) {
        int best = -1;
        double best_p = -1.0;
        for (int v = 0; v < n_items; ++v) {
          if (std::find(items.begin(), items.end(), v) != items.end()) continue;
          if (prob.at(i, v) > best_p) {
            best_p = prob.at(i, v);
            best = v;
          }
        }
        items.push_back(best);
      }
      std::sort(items.begin(), items.end());
    }

    // Review embeddings: noisy projections of the latents, so review
    // similarity tracks co-preference.
    Mat proj(spec.latent_dim, spec.review_dim);
    {
      Rng rng = Rng::keyed({spec.seed, 0x70726f6aULL, static_cast<std::uint64_t>(k)});
      for (double& x : proj.a) x = rng.normal(0.0, inv_sqrt);
    }
    auto project_noisy = [&](std::span<const double> latent, Rng& rng, double* dst) {
      for (int j = 0; j < spec.review_dim; ++j) {
        double s = 0.0;
        for (int k2 = 0; k2 < spec.latent_dim; ++k2) s += latent[k2] * proj.at(k2, j);
        dst[j] = s + spec.review_noise * rng.normal();
      }
    };
    ds.user_review_emb = Mat(nu, spec.review_dim);
    for (int i = 0; i < nu; ++i) {
      Rng rng = Rng::keyed({spec.seed, 0x6875ULL, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(members[i])});
      project_noisy(z.row_span(members[i]), rng, ds.user_review_emb.row(i));
      l2_normalize(ds.user_review_emb.row_span(i));
    }
    ds.item_review_emb = Mat(n_items, spec.review_dim);
    for (int v = 0; v < n_items; ++v) {
      Rng rng = Rng::keyed({spec.seed, 0x6876ULL, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(v)});
      project_noisy(w.row_span(v), rng, ds.item_review_emb.row(v));
      l2_normalize(ds.item_review_emb.row_span(v));
    }

    out.push_back(std::move(ds));
  }
  return out;
}

void apply_density(DomainDataset& ds, double m, std::uint64_t seed) {
  if (!(m > 0.0 && m <= 1.0)) throw std::invalid_argument("apply_density: m must be in (0,1]");
  if (ds.train_items_per_user.empty())
    throw std::runtime_error("apply_density: split must run first");

  ds.train_pairs.clear();
  for (int u = 0; u < ds.n_users(); ++u) {
    auto items = ds.train_items_per_user[u];
    const int n_u = static_cast<int>(items.size());
    if (n_u == 0) continue;
    int keep = std::max(1, static_cast<int>(std::ceil(m * n_u)));
    if (keep < n_u) {
      Rng rng = Rng::keyed({seed, 0x64656e73697479ULL, static_cast<std::uint64_t>(u)});
      for (int k = 0; k < keep; ++k) {
        std::size_t j = k + rng.uniform_int(items.size() - k);
        std::swap(items[k], items[j]);
      }
      items.resize(keep);
      std::sort(items.begin(), items.end());
    }
    ds.train_items_per_user[u] = items;
    for (int v : items) ds.train_pairs.emplace_back(u, v);
  }
}

void assign_global_user_indices(std::vector<DomainDataset>& domains) {
  std::set<std::string> ids;
  for (const auto& ds : domains) ids.insert(ds.user_ids.begin(), ds.user_ids.end());
  std::unordered_map<std::string, int> index;
  int next = 0;
  for (const auto& id : ids) index[id] = next++;
  for (auto& ds : domains) {
    ds.user_global.resize(ds.n_users());
    for (int u = 0; u < ds.n_users(); ++u) ds.user_global[u] = index[ds.user_ids[u]];
  }
}

std::string dataset_digest(const DomainDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_str = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  auto mix_int = [&](long long x) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  };
  for (const auto& s : ds.user_ids) mix_str(s);
  for (const auto& s : ds.item_ids) mix_str(s);
  for (int u = 0; u < ds.n_users(); ++u)
    for (int v : ds.user_items[u]) {
      mix_int(u);
      mix_int(v);
    }
  // The split itself: different held-out items, negative samples, or thinned
  // train sets must not collide even when the sizes agree.
  mix_int(static_cast<long long>(ds.train_pairs.size()));
  for (const auto& [u, v] : ds.train_pairs) {
    mix_int(u);
    mix_int(v);
  }
  mix_int(static_cast<long long>(ds.test_pairs.size()));
  for (std::size_t i = 0; i < ds.test_pairs.size(); ++i) {
    mix_int(ds.test_pairs[i].first);
    mix_int(ds.test_pairs[i].second);
    if (i < ds.eval_negatives.size())
      for (int v : ds.eval_negatives[i]) mix_int(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.a = j.at("data").get<std::vector<double>>();
  if (m.a.size() != static_cast<std::size_t>(m.rows) * m.cols)
    throw std::runtime_error("dataset file: matrix shape mismatch");
  return m;
}

}  // namespace

void save_dataset(const DomainDataset& ds, const std::string& path) {
  json j;
  j["version"] = 1;
  j["domain_id"] = ds.domain_id;
  j["user_ids"] = ds.user_ids;
  j["item_ids"] = ds.item_ids;
  j["user_global"] = ds.user_global;
  j["user_items"] = ds.user_items;
  j["user_review_emb"] = mat_to_json(ds.user_review_emb);
  j["item_review_emb"] = mat_to_json(ds.item_review_emb);
  j["train_pairs"] = ds.train_pairs;
  j["test_pairs"] = ds.test_pairs;
  j["eval_negatives"] = ds.eval_negatives;
  j["train_items_per_user"] = ds.train_items_per_user;
  j["split_skipped_users"] = ds.split_skipped_users;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump();
}

DomainDataset load_dataset(const std::string& path) {
  json j = json::parse(read_file(path));
  DomainDataset ds;
  ds.domain_id = j.at("domain_id").get<int>();
  ds.user_ids = j.at("user_ids").get<std::vector<std::string>>();
  ds.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  ds.user_global = j.at("user_global").get<std::vector<int>>();
  ds.user_items = j.at("user_items").get<std::vector<std::vector<int>>>();
  ds.user_review_emb = mat_from_json(j.at("user_review_emb"));
  ds.item_review_emb = mat_from_json(j.at("item_review_emb"));
  ds.train_pairs = j.at("train_pairs").get<std::vector<std::pair<int, int>>>();
  ds.test_pairs = j.at("test_pairs").get<std::vector<std::pair<int, int>>>();
  ds.eval_negatives = j.at("eval_negatives").get<std::vector<std::vector<int>>>();
  ds.train_items_per_user =
      j.at("train_items_per_user").get<std::vector<std::vector<int>>>();
  ds.split_skipped_users = j.at("split_skipped_users").get<int>();
  return ds;
}

}  // namespace protorec
