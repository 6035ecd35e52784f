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

// Differentiable building blocks. Each layer only records parameter indices
// into a ParamStore; all computation happens on a Tape, so layers are
// immutable values that can be shared by concurrent tapes.

#ifndef VRDIAL_NN_LAYERS_HPP_
#define VRDIAL_NN_LAYERS_HPP_

#include <span>
#include <string>
#include <vector>

#include "vrdial/nn/random.hpp"
#include "vrdial/nn/tape.hpp"

namespace vrdial::nn {

// Fills every parameter with U(-scale, scale), scale = 1/sqrt(cols).
void init_uniform(ParamStore& store, Rng& rng);

struct Linear {
  int w = -1;
  int b = -1;
  int in = 0;
  int out = 0;

  static Linear make(ParamStore& store, const std::string& name, int in, int out,
                     bool bias = true);
  Var operator()(Tape& t, Var x) const;
};

struct GruCell {
  int wx = -1;
  int wh = -1;
  int bx = -1;
  int bh = -1;
  int in = 0;
  int hidden = 0;

  static GruCell make(ParamStore& store, const std::string& name, int in, int hidden);
  // One recurrent transition; throws ShapeError on width mismatch.
  Var step(Tape& t, Var prev_hidden, Var input) const;
};

// One tanh hidden layer followed by an affine output.
struct Mlp {
  Linear hidden;
  Linear output;

  static Mlp make(ParamStore& store, const std::string& name, int in, int hidden, int out);
  Var operator()(Tape& t, Var x) const;
};

// Additive attention: score_j = v . tanh(Wk k_j + Wq q + b).
struct Attention {
  int wk = -1;
  int wq = -1;
  int b = -1;
  int v = -1;
  int key_width = 0;
  int query_width = 0;
  int width = 0;

  struct Keys {
    Var keys;  // (n x key_width)
    Var proj;  // (n x width) = keys Wk^T
    int count = 0;
  };
  struct Result {
    Var context;  // key_width
    Var weights;  // n, non-negative, sums to 1
  };

  static Attention make(ParamStore& store, const std::string& name, int key_width,
                        int query_width, int width);
  Keys prepare(Tape& t, Var keys) const;
  Result attend(Tape& t, Var query, const Keys& keys) const;
};

struct SequenceEncoding {
  Var per_token;  // (n x hidden)
  Var summary;    // hidden
  Var last;       // final row of per_token
  int length = 0;
};

// Bidirectional GRU whose per-position output is the sum of both directions;
// both directions start from `initial_summary`. The summary is
// tanh(W [last ; attend(last, per_token)] + b).
struct BiGruEncoder {
  GruCell forward;
  GruCell backward;
  Attention reader;
  Linear combine;
  int hidden = 0;

  static BiGruEncoder make(ParamStore& store, const std::string& name, int in, int hidden);
  // Throws ValidationError on empty input.
  SequenceEncoding encode(Tape& t, std::span<const Var> inputs, Var initial_summary) const;
};

struct SpanEncoding {
  Var per_token;  // (n x hidden)
  Var final;      // hidden
  int length = 0;
};

// Unidirectional GRU encoder starting from the zero state.
struct GruEncoder {
  GruCell cell;
  int hidden = 0;

  static GruEncoder make(ParamStore& store, const std::string& name, int in, int hidden);
  SpanEncoding encode(Tape& t, std::span<const Var> inputs) const;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  int relation = 0;  // 0 is reserved for self-loops
};

// Relation-aware graph attention. Per relation r there is a key projection
// K_r and a message projection M_r; every node additionally receives a
// self-loop (relation 0). Each round computes
//   h_i' = tanh(b + sum_{(j -> i, r)} alpha_ij M_r h_j),
//   alpha_i. = softmax_j((Q h_i) . (K_r h_j) / sqrt(d)).
struct Rgat {
  Linear input;  // features -> graph hidden (applied row-wise)
  int q = -1;
  std::vector<int> k;  // per relation
  std::vector<int> m;  // per relation
  int bias = -1;
  Linear output;  // graph hidden -> graph out
  int relations = 0;
  int hidden = 0;
  int out = 0;

  struct Result {
    Var nodes;  // (n x out); invalid when the graph is empty
    std::vector<std::vector<double>> attention;  // per round, per edge in offsets order
    std::vector<int> edge_dst;                   // destination of each attention entry
  };

  static Rgat make(ParamStore& store, const std::string& name, int features, int hidden,
                   int out, int relations);
  Result encode(Tape& t, Var features, int node_count, std::span<const GraphEdge> edges,
                int rounds) const;
};

// Row-wise affine map of a matrix: X W^T + b.
Var rowwise(Tape& t, const Linear& layer, Var x);

}  // namespace vrdial::nn

#endif  // VRDIAL_NN_LAYERS_HPP_
