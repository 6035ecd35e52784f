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

#include "vrdial/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "vrdial/error.hpp"

namespace vrdial::nn {

void init_uniform(ParamStore& store, Rng& rng) {
  for (int p = 0; p < store.size(); ++p) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(store.cols(p)));
    for (double& x : store.value(p)) x = (2.0 * uniform_open(rng) - 1.0) * scale;
  }
}

// --- Linear ----------------------------------------------------------------

Linear Linear::make(ParamStore& store, const std::string& name, int in, int out, bool bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w = store.add(name + ".w", out, in);
  if (bias) l.b = store.add(name + ".b", out, 1);
  return l;
}

Var Linear::operator()(Tape& t, Var x) const {
  return t.affine(t.param(w), x, b >= 0 ? t.param(b) : Var{});
}

Var rowwise(Tape& t, const Linear& layer, Var x) {
  Var y = t.matmul_nt(x, t.param(layer.w));
  if (layer.b >= 0) y = t.add_row(y, t.param(layer.b));
  return y;
}

// --- GRU -------------------------------------------------------------------

GruCell GruCell::make(ParamStore& store, const std::string& name, int in, int hidden) {
  GruCell c;
  c.in = in;
  c.hidden = hidden;
  c.wx = store.add(name + ".wx", 3 * hidden, in);
  c.wh = store.add(name + ".wh", 3 * hidden, hidden);
  c.bx = store.add(name + ".bx", 3 * hidden, 1);
  c.bh = store.add(name + ".bh", 3 * hidden, 1);
  return c;
}

Var GruCell::step(Tape& t, Var prev_hidden, Var input) const {
  return t.gru(input, prev_hidden, t.param(wx), t.param(wh), t.param(bx), t.param(bh));
}

// --- MLP -------------------------------------------------------------------

Mlp Mlp::make(ParamStore& store, const std::string& name, int in, int hidden, int out) {
  return Mlp{Linear::make(store, name + ".hidden", in, hidden),
             Linear::make(store, name + ".out", hidden, out)};
}

Var Mlp::operator()(Tape& t, Var x) const { return output(t, t.tanh(hidden(t, x))); }

// --- Attention -------------------------------------------------------------

Attention Attention::make(ParamStore& store, const std::string& name, int key_width,
                          int query_width, int width) {
  Attention a;
  a.key_width = key_width;
  a.query_width = query_width;
  a.width = width;
  a.wk = store.add(name + ".wk", width, key_width);
  a.wq = store.add(name + ".wq", width, query_width);
  a.b = store.add(name + ".b", width, 1);
  a.v = store.add(name + ".v", width, 1);
  return a;
}

Attention::Keys Attention::prepare(Tape& t, Var keys) const {
  if (t.cols(keys) != key_width) throw ShapeError("attention: key width mismatch");
  return Keys{keys, t.matmul_nt(keys, t.param(wk)), t.rows(keys)};
}

Attention::Result Attention::attend(Tape& t, Var query, const Keys& keys) const {
  Var u = t.affine(t.param(wq), query, t.param(b));
  Var hidden = t.tanh(t.add_row(keys.proj, u));
  Var scores = t.matvec(hidden, t.param(v));
  Var weights = t.softmax(scores);
  return Result{t.matvec_t(keys.keys, weights), weights};
}

// --- Encoders --------------------------------------------------------------

BiGruEncoder BiGruEncoder::make(ParamStore& store, const std::string& name, int in,
                                int hidden) {
  BiGruEncoder e;
  e.hidden = hidden;
  e.forward = GruCell::make(store, name + ".fwd", in, hidden);
  e.backward = GruCell::make(store, name + ".bwd", in, hidden);
  e.reader = Attention::make(store, name + ".read", hidden, hidden, hidden);
  e.combine = Linear::make(store, name + ".combine", 2 * hidden, hidden);
  return e;
}

SequenceEncoding BiGruEncoder::encode(Tape& t, std::span<const Var> inputs,
                                      Var initial_summary) const {
  if (inputs.empty()) throw ValidationError("encode_sequence: empty input");
  if (t.size(initial_summary) != hidden) throw ShapeError("encode_sequence: summary width");
  const int n = static_cast<int>(inputs.size());
  std::vector<Var> fwd(n);
  std::vector<Var> bwd(n);
  Var h = initial_summary;
  for (int i = 0; i < n; ++i) fwd[i] = h = forward.step(t, h, inputs[i]);
  h = initial_summary;
  for (int i = n - 1; i >= 0; --i) bwd[i] = h = backward.step(t, h, inputs[i]);
  std::vector<Var> rows(n);
  for (int i = 0; i < n; ++i) rows[i] = t.add(fwd[i], bwd[i]);
  SequenceEncoding enc;
  enc.length = n;
  enc.per_token = t.stack(rows);
  enc.last = rows.back();
  auto keys = reader.prepare(t, enc.per_token);
  auto read = reader.attend(t, enc.last, keys);
  const Var both[] = {enc.last, read.context};
  enc.summary = t.tanh(combine(t, t.concat(both)));
  return enc;
}

GruEncoder GruEncoder::make(ParamStore& store, const std::string& name, int in, int hidden) {
  return GruEncoder{GruCell::make(store, name, in, hidden), hidden};
}

SpanEncoding GruEncoder::encode(Tape& t, std::span<const Var> inputs) const {
  if (inputs.empty()) throw ValidationError("span encoder: empty input");
  std::vector<Var> rows;
  rows.reserve(inputs.size());
  Var h = t.zeros(hidden);
  for (Var x : inputs) rows.push_back(h = cell.step(t, h, x));
  return SpanEncoding{t.stack(rows), rows.back(), static_cast<int>(rows.size())};
}

// --- RGAT ------------------------------------------------------------------

Rgat Rgat::make(ParamStore& store, const std::string& name, int features, int hidden, int out,
                int relations) {
  Rgat g;
  g.relations = relations;
  g.hidden = hidden;
  g.out = out;
  g.input = Linear::make(store, name + ".in", features, hidden);
  g.q = store.add(name + ".q", hidden, hidden);
  for (int r = 0; r < relations; ++r) {
    g.k.push_back(store.add(name + ".k" + std::to_string(r), hidden, hidden));
    g.m.push_back(store.add(name + ".m" + std::to_string(r), hidden, hidden));
  }
  g.bias = store.add(name + ".bias", hidden, 1);
  g.output = Linear::make(store, name + ".out", hidden, out);
  return g;
}

Rgat::Result Rgat::encode(Tape& t, Var features, int node_count,
                          std::span<const GraphEdge> edges, int rounds) const {
  Result res;
  if (node_count == 0) return res;
  if (t.rows(features) != node_count) throw ShapeError("rgat: feature rows != node count");

  // Message edges grouped by destination, self-loop first.
  std::vector<std::vector<GraphEdge>> incoming(node_count);
  for (int i = 0; i < node_count; ++i) incoming[i].push_back(GraphEdge{i, i, 0});
  for (const auto& e : edges) {
    if (e.src < 0 || e.src >= node_count || e.dst < 0 || e.dst >= node_count) {
      throw ShapeError("rgat: edge endpoint out of range");
    }
    if (e.relation <= 0 || e.relation >= relations) throw ShapeError("rgat: bad relation id");
    incoming[e.dst].push_back(e);
  }
  std::vector<int> used_relations;
  std::vector<int> block(relations, -1);
  for (const auto& in : incoming) {
    for (const auto& e : in) {
      if (block[e.relation] < 0) {
        block[e.relation] = static_cast<int>(used_relations.size());
        used_relations.push_back(e.relation);
      }
    }
  }
  std::vector<int> offsets{0};
  std::vector<int> rows;
  for (const auto& in : incoming) {
    for (const auto& e : in) {
      rows.push_back(block[e.relation] * node_count + e.src);
      res.edge_dst.push_back(e.dst);
    }
    offsets.push_back(static_cast<int>(rows.size()));
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  Var h = t.tanh(rowwise(t, input, features));
  for (int round = 0; round < rounds; ++round) {
    Var qh = t.matmul_nt(h, t.param(q));
    std::vector<Var> ks;
    std::vector<Var> ms;
    for (int r : used_relations) {
      ks.push_back(t.matmul_nt(h, t.param(k[r])));
      ms.push_back(t.matmul_nt(h, t.param(m[r])));
    }
    Var kall = t.vstack(ks);
    Var mall = t.vstack(ms);
    Var agg = t.graph_attend(qh, kall, mall, offsets, rows, scale);
    auto alpha = t.aux(agg);
    res.attention.emplace_back(alpha.begin(), alpha.end());
    h = t.tanh(t.add_row(agg, t.param(bias)));
  }
  res.nodes = t.tanh(rowwise(t, output, h));
  return res;
}

}  // namespace vrdial::nn
