/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "vrdial/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vrdial/error.hpp"

namespace vrdial::eval {

namespace {

using Counts = std::unordered_map<std::string, int>;

// n-grams keyed by their tokens joined with a separator that cannot occur
// inside a whitespace token.
Counts ngrams(const Sentence& s, int n) {
  Counts c;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    std::string key = s[i];
    for (int k = 1; k < n; ++k) key += '\n' + s[i + k];
    ++c[key];
  }
  return c;
}

int total(const Counts& c) {
  int t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

int clipped_overlap(const Counts& hyp, const Counts& ref) {
  int m = 0;
  for (const auto& [g, v] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(v, it->second);
  }
  return m;
}

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": hypothesis and reference counts differ");
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::vector<const std::vector<double>*> vectors_of(const Sentence& s, const EmbeddingTable& t) {
  std::vector<const std::vector<double>*> out;
  for (const auto& tok : s) {
    if (const auto* v = t.find(tok)) out.push_back(v);
  }
  return out;
}

double greedy(const std::vector<const std::vector<double>*>& from,
              const std::vector<const std::vector<double>*>& to) {
  if (from.empty() || to.empty()) return 0.0;
  double acc = 0.0;
  for (const auto* a : from) {
    double best = -1.0;
    for (const auto* b : to) best = std::max(best, cosine(*a, *b));
    acc += best;
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double bleu2(std::span<const Sentence> hyps, std::span<const Sentence> refs, double eps) {
  check_aligned(hyps.size(), refs.size(), "bleu2");
  if (hyps.empty()) throw ValidationError("bleu2: empty input");
  double matches[2] = {0, 0};
  double counts[2] = {0, 0};
  double c = 0, r = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    c += static_cast<double>(hyps[i].size());
    r += static_cast<double>(refs[i].size());
    for (int n = 1; n <= 2; ++n) {
      const Counts h = ngrams(hyps[i], n);
      matches[n - 1] += clipped_overlap(h, ngrams(refs[i], n));
      counts[n - 1] += total(h);
    }
  }
  double log_p = 0.0;
  for (int n = 0; n < 2; ++n) {
    const double p = counts[n] == 0 ? eps : (matches[n] == 0 ? eps : matches[n]) / counts[n];
    log_p += 0.5 * std::log(p);
  }
  const double bp = (c == 0 || c >= r) ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p);
}

double rouge2(std::span<const Sentence> hyps, std::span<const Sentence> refs, double beta) {
  check_aligned(hyps.size(), refs.size(), "rouge2");
  if (hyps.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const Counts h = ngrams(hyps[i], 2);
    const Counts g = ngrams(refs[i], 2);
    const int nh = total(h);
    const int ng = total(g);
    if (nh == 0 || ng == 0) {
      sum += hyps[i] == refs[i] ? 1.0 : 0.0;
      continue;
    }
    const double m = clipped_overlap(h, g);
    if (m == 0) continue;
    const double p = m / nh;
    const double rec = m / ng;
    const double b2 = beta * beta;
    sum += (1.0 + b2) * p * rec / (rec + b2 * p);
  }
  return sum / static_cast<double>(hyps.size());
}

double distinct_n(std::span<const Sentence> hyps, int n) {
  if (n < 1) throw ValidationError("distinct_n: n must be positive");
  std::set<std::vector<std::string>> seen;
  std::size_t count = 0;
  for (const auto& s : hyps) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      seen.emplace(s.begin() + i, s.begin() + i + n);
      ++count;
    }
  }
  return count == 0 ? 0.0 : static_cast<double>(seen.size()) / static_cast<double>(count);
}

EntityScores entity_prf(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                        const kg::KnowledgeGraph& kg) {
  check_aligned(hyps.size(), refs.size(), "entity_prf");
  double tp[kg::kEntityTypeCount] = {};
  double pred[kg::kEntityTypeCount] = {};
  double gold[kg::kEntityTypeCount] = {};
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto p = kg::link_entities(hyps[i], kg);
    const auto g = kg::link_entities(refs[i], kg);
    for (int e : p) {
      const int type = static_cast<int>(kg.entity(e).type);
      pred[type] += 1;
      if (std::binary_search(g.begin(), g.end(), e)) tp[type] += 1;
    }
    for (int e : g) gold[static_cast<int>(kg.entity(e).type)] += 1;
  }
  auto ratio = [](double a, double b) { return b > 0 ? 100.0 * a / b : 0.0; };
  EntityScores s;
  double all_tp = 0, all_pred = 0, all_gold = 0;
  int types = 0;
  for (int k = 0; k < kg::kEntityTypeCount; ++k) {
    all_tp += tp[k];
    all_pred += pred[k];
    all_gold += gold[k];
    if (pred[k] == 0 && gold[k] == 0) continue;
    ++types;
    s.ma_p += ratio(tp[k], pred[k]);
    s.ma_r += ratio(tp[k], gold[k]);
  }
  if (types > 0) {
    s.ma_p /= types;
    s.ma_r /= types;
  }
  s.ma_f1 = harmonic(s.ma_p, s.ma_r);
  s.mi_p = ratio(all_tp, all_pred);
  s.mi_r = ratio(all_tp, all_gold);
  s.mi_f1 = harmonic(s.mi_p, s.mi_r);
  return s;
}

void EmbeddingTable::add(std::string token, std::vector<double> vec) {
  vectors_[std::move(token)] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file '" + path + "'");
  EmbeddingTable t;
  std::string line;
  std::size_t width = 0;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) throw ParseError("embedding value is not a number", n);
    if (width == 0) width = v.size();
    if (v.empty() || v.size() != width) throw ParseError("embedding width differs", n);
    t.add(tok, std::move(v));
  }
  return t;
}

EmbeddingScores embedding_metrics(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                                  const EmbeddingTable& table) {
  check_aligned(hyps.size(), refs.size(), "embedding_metrics");
  EmbeddingScores s;
  if (hyps.empty()) return s;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = vectors_of(hyps[i], table);
    const auto r = vectors_of(refs[i], table);
    if (!h.empty() && !r.empty()) {
      std::vector<double> mh(h[0]->size(), 0.0);
      std::vector<double> mr(r[0]->size(), 0.0);
      for (const auto* v : h) {
        for (std::size_t k = 0; k < mh.size(); ++k) mh[k] += (*v)[k];
      }
      for (const auto* v : r) {
        for (std::size_t k = 0; k < mr.size(); ++k) mr[k] += (*v)[k];
      }
      s.ea += cosine(mh, mr);
    }
    s.eg += 0.5 * (greedy(h, r) + greedy(r, h));
  }
  s.ea /= static_cast<double>(hyps.size());
  s.eg /= static_cast<double>(hyps.size());
  return s;
}

EvalReport score(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                 const kg::KnowledgeGraph& kg, const EmbeddingTable& table) {
  EvalReport r;
  r.b2 = bleu2(hyps, refs);
  r.r2 = rouge2(hyps, refs);
  r.d1 = distinct_n(hyps, 1);
  r.d2 = distinct_n(hyps, 2);
  const auto e = entity_prf(hyps, refs, kg);
  r.ma_p = e.ma_p;
  r.ma_r = e.ma_r;
  r.ma_f1 = e.ma_f1;
  r.mi_p = e.mi_p;
  r.mi_r = e.mi_r;
  r.mi_f1 = e.mi_f1;
  const auto m = embedding_metrics(hyps, refs, table);
  r.ea = m.ea;
  r.eg = m.eg;
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["b2"] = r.b2;
  j["r2"] = r.r2;
  j["d1"] = r.d1;
  j["d2"] = r.d2;
  j["ma_p"] = r.ma_p;
  j["ma_r"] = r.ma_r;
  j["ma_f1"] = r.ma_f1;
  j["mi_p"] = r.mi_p;
  j["mi_r"] = r.mi_r;
  j["mi_f1"] = r.mi_f1;
  j["ea"] = r.ea;
  j["eg"] = r.eg;
  return j;
}

}  // namespace vrdial::eval
