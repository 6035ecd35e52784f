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

// Reverse-mode automatic differentiation over double-precision tensors.
//
// A Tape records a computation as a flat list of nodes. Every node is a
// row-major matrix; vectors are (n x 1) and scalars (1 x 1). Parameters live
// in a ParamStore shared by all tapes; a tape only reads them and keeps its
// own gradient buffers, so several tapes may run concurrently against one
// store. Tapes are reusable: reset() keeps node storage to avoid
// re-allocation between training steps.

#ifndef VRDIAL_NN_TAPE_HPP_
#define VRDIAL_NN_TAPE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vrdial::nn {

class ParamStore {
 public:
  int add(std::string name, int rows, int cols);

  int size() const { return static_cast<int>(entries_.size()); }
  int find(std::string_view name) const;
  const std::string& name(int p) const { return entries_[p].name; }
  int rows(int p) const { return entries_[p].rows; }
  int cols(int p) const { return entries_[p].cols; }
  std::span<double> value(int p) { return entries_[p].value; }
  std::span<const double> value(int p) const { return entries_[p].value; }
  std::size_t total_size() const;

  // Flat views over every parameter in registration order.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

 private:
  struct Entry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

// Per-parameter gradient accumulator shaped like a ParamStore.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamStore& store);

  std::span<double> grad(int p) { return grads_[p]; }
  std::span<const double> grad(int p) const { return grads_[p]; }
  int size() const { return static_cast<int>(grads_.size()); }
  void zero();
  void add(const GradBuffer& other);
  void scale(double s);

 private:
  std::vector<std::vector<double>> grads_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  kParam,
  kConst,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddConst,
  kAddScalar,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kMatVec,
  kMatVecT,
  kMatMulNT,
  kAffine,
  kAddRow,
  kConcat,
  kSlice,
  kRow,
  kEmbedRow,
  kSoftmax,
  kSum,
  kDot,
  kSumAt,
  kFold,
  kStraightThrough,
  kGru,
  kKl,
  kGraphAttend,
};

class Tape {
 public:
  explicit Tape(const ParamStore& store);

  void reset();
  const ParamStore& store() const { return *store_; }
  int node_count() const { return used_; }

  // Leaves.
  Var param(int p);
  Var constant(std::span<const double> values, int rows, int cols = 1);
  Var zeros(int rows, int cols = 1);
  Var scalar_const(double v);

  // Elementwise; operands must have equal size.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_const(Var a, std::span<const double> c);
  Var add_scalar(Var a, Var s);  // a + s for a (1 x 1) s
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);

  // Linear algebra.
  Var matvec(Var w, Var x);    // W x
  Var matvec_t(Var w, Var x);  // W^T x
  Var matmul_nt(Var a, Var b); // A B^T
  Var affine(Var w, Var x, Var b);  // W x + b (b may be invalid)
  Var add_row(Var m, Var v);        // add v to every row of m

  // Structure.
  Var concat(std::span<const Var> parts);  // flat concatenation -> vector
  Var stack(std::span<const Var> rows);    // equal-length vectors -> matrix
  Var vstack(std::span<const Var> mats);   // equal-width matrices -> matrix
  Var slice(Var v, int offset, int length);
  Var row(Var m, int r);
  Var embed_row(Var table, int r);

  // Reductions and distributions.
  Var softmax(Var a);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var sum_at(Var a, std::span<const int> indices);
  Var fold(Var a, std::span<const int> map, int out_size);
  // Forward value is the one-hot of `index`; gradient passes to `soft`.
  Var straight_through(Var soft, int index);
  // Categorical KL(q || p) restricted to `support`; q and p same size.
  Var kl(Var q, Var p, std::span<const int> support);

  // Fused gated recurrent unit step:
  //   r = s(Wx_r x + bx_r + Wh_r h + bh_r), z likewise,
  //   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n)),  h' = (1 - z) n + z h.
  Var gru(Var x, Var h, Var wx, Var wh, Var bx, Var bh);

  // Fused edge attention. q: (n x d) queries, k and m: (e_rows x d) keys and
  // messages. `offsets` (n + 1 entries) groups `rows` by destination node:
  // destination i attends over rows[offsets[i] .. offsets[i+1]). Output row i
  // is sum_e softmax_e(scale * q_i . k_rows[e]) m_rows[e].
  Var graph_attend(Var q, Var k, Var m, std::span<const int> offsets,
                   std::span<const int> rows, double scale);

  void backward(Var loss);

  int rows(Var v) const { return nodes_[v.id].rows; }
  int cols(Var v) const { return nodes_[v.id].cols; }
  int size(Var v) const { return nodes_[v.id].rows * nodes_[v.id].cols; }
  bool requires_grad(Var v) const { return nodes_[v.id].rg; }
  std::span<const double> value(Var v) const;
  double item(Var v) const { return value(v)[0]; }
  std::span<const double> grad(Var v) const;
  // Auxiliary forward results (attention weights for kGraphAttend).
  std::span<const double> aux(Var v) const { return nodes_[v.id].aux; }

  // Gradient buffer for parameter p (empty if p never entered this tape).
  std::span<const double> param_grad(int p) const;
  void accumulate_into(GradBuffer& out, double weight = 1.0) const;

 private:
  struct Node {
    Op op = Op::kConst;
    int rows = 0;
    int cols = 0;
    bool rg = false;
    int in[6] = {-1, -1, -1, -1, -1, -1};
    int iaux = 0;
    double daux = 0.0;
    std::vector<int> list;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<double> aux;
  };

  Node& push(Op op, int rows, int cols);
  const double* v(int id) const;
  double* g(int id);
  bool rg(int id) const { return id >= 0 && nodes_[id].rg; }
  void backprop(int id);
  void check_same(Var a, Var b, const char* what) const;

  const ParamStore* store_;
  std::vector<Node> nodes_;
  int used_ = 0;
  std::vector<int> param_node_;
  std::vector<std::vector<double>> pgrad_;
  std::vector<int> touched_;
};

}  // namespace vrdial::nn

#endif  // VRDIAL_NN_TAPE_HPP_
