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

#include "vrdial/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vrdial/error.hpp"
#include "vrdial/nn/kernels.hpp"

namespace vrdial::nn {

// ---------------------------------------------------------------------------
// ParamStore / GradBuffer

int ParamStore::add(std::string name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) {
    throw ShapeError("parameter '" + name + "' must have positive shape");
  }
  if (index_.count(name) != 0) {
    throw ValidationError("duplicate parameter name '" + name + "'");
  }
  const int id = size();
  index_.emplace(name, id);
  entries_.push_back(Entry{std::move(name), rows, cols,
                           std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)});
  return id;
}

int ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? -1 : it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& e : entries_) flat.insert(flat.end(), e.value.begin(), e.value.end());
  return flat;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != total_size()) throw ShapeError("flat parameter size mismatch");
  std::size_t off = 0;
  for (auto& e : entries_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), e.value.size(), e.value.begin());
    off += e.value.size();
  }
}

GradBuffer::GradBuffer(const ParamStore& store) {
  grads_.resize(store.size());
  for (int p = 0; p < store.size(); ++p) grads_[p].assign(store.value(p).size(), 0.0);
}

void GradBuffer::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto& dst = grads_[p];
    const auto& src = other.grads_[p];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void GradBuffer::scale(double s) {
  for (auto& g : grads_) {
    for (double& x : g) x *= s;
  }
}

// ---------------------------------------------------------------------------
// Tape: construction

Tape::Tape(const ParamStore& store) : store_(&store) {
  param_node_.assign(store.size(), -1);
  pgrad_.resize(store.size());
}

void Tape::reset() {
  used_ = 0;
  for (int p : touched_) {
    param_node_[p] = -1;
    std::fill(pgrad_[p].begin(), pgrad_[p].end(), 0.0);
  }
  touched_.clear();
}

Tape::Node& Tape::push(Op op, int rows, int cols) {
  if (used_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
  Node& n = nodes_[used_++];
  n.op = op;
  n.rows = rows;
  n.cols = cols;
  n.rg = false;
  std::fill(std::begin(n.in), std::end(n.in), -1);
  n.iaux = 0;
  n.daux = 0.0;
  n.list.clear();
  n.aux.clear();
  if (op == Op::kParam) {
    n.val.clear();
    n.grad.clear();
  } else {
    const std::size_t sz = static_cast<std::size_t>(rows) * cols;
    n.val.assign(sz, 0.0);
    n.grad.assign(sz, 0.0);
  }
  return n;
}

const double* Tape::v(int id) const {
  const Node& n = nodes_[id];
  if (n.op == Op::kParam) return store_->value(n.iaux).data();
  return n.val.data();
}

double* Tape::g(int id) {
  Node& n = nodes_[id];
  if (n.op == Op::kParam) return pgrad_[n.iaux].data();
  return n.grad.data();
}

std::span<const double> Tape::value(Var x) const {
  const Node& n = nodes_[x.id];
  return {v(x.id), static_cast<std::size_t>(n.rows) * n.cols};
}

std::span<const double> Tape::grad(Var x) const {
  const Node& n = nodes_[x.id];
  if (n.op == Op::kParam) return pgrad_[n.iaux];
  return n.grad;
}

std::span<const double> Tape::param_grad(int p) const {
  if (param_node_[p] < 0) return {};
  return pgrad_[p];
}

void Tape::accumulate_into(GradBuffer& out, double weight) const {
  for (int p : touched_) {
    auto dst = out.grad(p);
    const auto& src = pgrad_[p];
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += weight * src[i];
  }
}

void Tape::check_same(Var a, Var b, const char* what) const {
  if (size(a) != size(b)) {
    throw ShapeError(std::string(what) + ": operand sizes " + std::to_string(size(a)) +
                     " and " + std::to_string(size(b)) + " differ");
  }
}

Var Tape::param(int p) {
  if (p < 0 || p >= store_->size()) throw ShapeError("unknown parameter index");
  if (param_node_[p] >= 0) return Var{param_node_[p]};
  if (pgrad_[p].size() != store_->value(p).size()) {
    pgrad_[p].assign(store_->value(p).size(), 0.0);
  }
  Node& n = push(Op::kParam, store_->rows(p), store_->cols(p));
  n.iaux = p;
  n.rg = true;
  param_node_[p] = used_ - 1;
  touched_.push_back(p);
  return Var{used_ - 1};
}

Var Tape::constant(std::span<const double> values, int rows, int cols) {
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("constant: value count does not match shape");
  }
  Node& n = push(Op::kConst, rows, cols);
  std::copy(values.begin(), values.end(), n.val.begin());
  return Var{used_ - 1};
}

Var Tape::zeros(int rows, int cols) {
  push(Op::kConst, rows, cols);
  return Var{used_ - 1};
}

Var Tape::scalar_const(double x) {
  Node& n = push(Op::kConst, 1, 1);
  n.val[0] = x;
  return Var{used_ - 1};
}

// ---------------------------------------------------------------------------
// Forward ops

Var Tape::add(Var a, Var b) {
  check_same(a, b, "add");
  Node& n = push(Op::kAdd, rows(a), cols(a));
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.rg = rg(a.id) || rg(b.id);
  const double* x = v(a.id);
  const double* y = v(b.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x[i] + y[i];
  return Var{used_ - 1};
}

Var Tape::sub(Var a, Var b) {
  check_same(a, b, "sub");
  Node& n = push(Op::kSub, rows(a), cols(a));
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.rg = rg(a.id) || rg(b.id);
  const double* x = v(a.id);
  const double* y = v(b.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x[i] - y[i];
  return Var{used_ - 1};
}

Var Tape::mul(Var a, Var b) {
  check_same(a, b, "mul");
  Node& n = push(Op::kMul, rows(a), cols(a));
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.rg = rg(a.id) || rg(b.id);
  const double* x = v(a.id);
  const double* y = v(b.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x[i] * y[i];
  return Var{used_ - 1};
}

Var Tape::scale(Var a, double s) {
  Node& n = push(Op::kScale, rows(a), cols(a));
  n.in[0] = a.id;
  n.daux = s;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = s * x[i];
  return Var{used_ - 1};
}

Var Tape::add_const(Var a, std::span<const double> c) {
  if (c.size() != static_cast<std::size_t>(size(a))) throw ShapeError("add_const: size mismatch");
  Node& n = push(Op::kAddConst, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x[i] + c[i];
  return Var{used_ - 1};
}

Var Tape::add_scalar(Var a, Var s) {
  if (size(s) != 1) throw ShapeError("add_scalar: second operand must be 1x1");
  Node& n = push(Op::kAddScalar, rows(a), cols(a));
  n.in[0] = a.id;
  n.in[1] = s.id;
  n.rg = rg(a.id) || rg(s.id);
  const double* x = v(a.id);
  const double sv = v(s.id)[0];
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x[i] + sv;
  return Var{used_ - 1};
}

Var Tape::tanh(Var a) {
  Node& n = push(Op::kTanh, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(x[i]);
  return Var{used_ - 1};
}

Var Tape::sigmoid(Var a) {
  Node& n = push(Op::kSigmoid, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return Var{used_ - 1};
}

Var Tape::exp(Var a) {
  Node& n = push(Op::kExp, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(x[i]);
  return Var{used_ - 1};
}

Var Tape::log(Var a) {
  Node& n = push(Op::kLog, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(x[i]);
  return Var{used_ - 1};
}

Var Tape::matvec(Var w, Var x) {
  const int r = rows(w);
  const int c = cols(w);
  if (size(x) != c) {
    throw ShapeError("matvec: matrix has " + std::to_string(c) + " columns, vector has " +
                     std::to_string(size(x)) + " entries");
  }
  Node& n = push(Op::kMatVec, r, 1);
  n.in[0] = w.id;
  n.in[1] = x.id;
  n.rg = rg(w.id) || rg(x.id);
  kernels::matvec(v(w.id), r, c, v(x.id), n.val.data());
  return Var{used_ - 1};
}

Var Tape::matvec_t(Var w, Var x) {
  const int r = rows(w);
  const int c = cols(w);
  if (size(x) != r) throw ShapeError("matvec_t: size mismatch");
  Node& n = push(Op::kMatVecT, c, 1);
  n.in[0] = w.id;
  n.in[1] = x.id;
  n.rg = rg(w.id) || rg(x.id);
  kernels::matvec_t(v(w.id), r, c, v(x.id), n.val.data());
  return Var{used_ - 1};
}

Var Tape::matmul_nt(Var a, Var b) {
  const int na = rows(a);
  const int k = cols(a);
  const int mb = rows(b);
  if (cols(b) != k) throw ShapeError("matmul_nt: inner dimensions differ");
  Node& n = push(Op::kMatMulNT, na, mb);
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.rg = rg(a.id) || rg(b.id);
  kernels::matmul_nt(v(a.id), v(b.id), na, mb, k, n.val.data());
  return Var{used_ - 1};
}

Var Tape::affine(Var w, Var x, Var b) {
  const int r = rows(w);
  const int c = cols(w);
  if (size(x) != c) {
    throw ShapeError("affine: matrix has " + std::to_string(c) + " columns, input has " +
                     std::to_string(size(x)) + " entries");
  }
  if (b.valid() && size(b) != r) throw ShapeError("affine: bias size mismatch");
  Node& n = push(Op::kAffine, r, 1);
  n.in[0] = w.id;
  n.in[1] = x.id;
  n.in[2] = b.id;
  n.rg = rg(w.id) || rg(x.id) || rg(b.id);
  if (b.valid()) std::copy_n(v(b.id), r, n.val.begin());
  kernels::matvec(v(w.id), r, c, v(x.id), n.val.data());
  return Var{used_ - 1};
}

Var Tape::add_row(Var m, Var vec) {
  const int r = rows(m);
  const int c = cols(m);
  if (size(vec) != c) throw ShapeError("add_row: row width mismatch");
  Node& n = push(Op::kAddRow, r, c);
  n.in[0] = m.id;
  n.in[1] = vec.id;
  n.rg = rg(m.id) || rg(vec.id);
  const double* x = v(m.id);
  const double* y = v(vec.id);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) n.val[i * c + j] = x[i * c + j] + y[j];
  }
  return Var{used_ - 1};
}

Var Tape::concat(std::span<const Var> parts) {
  int total = 0;
  for (Var p : parts) total += size(p);
  Node& n = push(Op::kConcat, total, 1);
  int off = 0;
  for (Var p : parts) {
    n.list.push_back(p.id);
    n.rg = n.rg || rg(p.id);
    const int s = size(p);
    std::copy_n(v(p.id), s, n.val.begin() + off);
    off += s;
  }
  return Var{used_ - 1};
}

Var Tape::stack(std::span<const Var> rws) {
  if (rws.empty()) throw ShapeError("stack: no rows");
  const int c = size(rws[0]);
  for (Var r : rws) {
    if (size(r) != c) throw ShapeError("stack: rows have different lengths");
  }
  Var out = concat(rws);
  nodes_[out.id].rows = static_cast<int>(rws.size());
  nodes_[out.id].cols = c;
  return out;
}

Var Tape::vstack(std::span<const Var> mats) {
  if (mats.empty()) throw ShapeError("vstack: no matrices");
  const int c = cols(mats[0]);
  int r = 0;
  for (Var m : mats) {
    if (cols(m) != c) throw ShapeError("vstack: widths differ");
    r += rows(m);
  }
  Var out = concat(mats);
  nodes_[out.id].rows = r;
  nodes_[out.id].cols = c;
  return out;
}

Var Tape::slice(Var a, int offset, int length) {
  if (offset < 0 || length < 0 || offset + length > size(a)) throw ShapeError("slice out of range");
  Node& n = push(Op::kSlice, length, 1);
  n.in[0] = a.id;
  n.iaux = offset;
  n.rg = rg(a.id);
  std::copy_n(v(a.id) + offset, length, n.val.begin());
  return Var{used_ - 1};
}

Var Tape::row(Var m, int r) {
  if (r < 0 || r >= rows(m)) throw ShapeError("row index out of range");
  const int c = cols(m);
  Node& n = push(Op::kRow, c, 1);
  n.in[0] = m.id;
  n.iaux = r;
  n.rg = rg(m.id);
  std::copy_n(v(m.id) + static_cast<std::size_t>(r) * c, c, n.val.begin());
  return Var{used_ - 1};
}

Var Tape::embed_row(Var table, int r) {
  if (r < 0 || r >= rows(table)) {
    throw ShapeError("embedding id " + std::to_string(r) + " outside table of " +
                     std::to_string(rows(table)) + " rows");
  }
  Var out = row(table, r);
  nodes_[out.id].op = Op::kEmbedRow;
  return out;
}

Var Tape::softmax(Var a) {
  Node& n = push(Op::kSoftmax, rows(a), cols(a));
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  const std::size_t s = n.val.size();
  if (s == 0) return Var{used_ - 1};
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    n.val[i] = std::exp(x[i] - mx);
    z += n.val[i];
  }
  for (std::size_t i = 0; i < s; ++i) n.val[i] /= z;
  return Var{used_ - 1};
}

Var Tape::sum(Var a) {
  Node& n = push(Op::kSum, 1, 1);
  n.in[0] = a.id;
  n.rg = rg(a.id);
  const double* x = v(a.id);
  double acc = 0.0;
  for (int i = 0; i < size(a); ++i) acc += x[i];
  nodes_[used_ - 1].val[0] = acc;
  return Var{used_ - 1};
}

Var Tape::dot(Var a, Var b) {
  check_same(a, b, "dot");
  Node& n = push(Op::kDot, 1, 1);
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.rg = rg(a.id) || rg(b.id);
  const double* x = v(a.id);
  const double* y = v(b.id);
  double acc = 0.0;
  for (int i = 0; i < size(a); ++i) acc += x[i] * y[i];
  nodes_[used_ - 1].val[0] = acc;
  return Var{used_ - 1};
}

Var Tape::sum_at(Var a, std::span<const int> indices) {
  const int s = size(a);
  Node& n = push(Op::kSumAt, 1, 1);
  n.in[0] = a.id;
  n.rg = rg(a.id);
  n.list.assign(indices.begin(), indices.end());
  const double* x = v(a.id);
  double acc = 0.0;
  for (int i : indices) {
    if (i < 0 || i >= s) throw ShapeError("sum_at index out of range");
    acc += x[i];
  }
  n.val[0] = acc;
  return Var{used_ - 1};
}

Var Tape::fold(Var a, std::span<const int> map, int out_size) {
  if (map.size() != static_cast<std::size_t>(size(a))) throw ShapeError("fold: map size mismatch");
  Node& n = push(Op::kFold, out_size, 1);
  n.in[0] = a.id;
  n.rg = rg(a.id);
  n.list.assign(map.begin(), map.end());
  const double* x = v(a.id);
  for (std::size_t j = 0; j < map.size(); ++j) {
    if (map[j] < 0 || map[j] >= out_size) throw ShapeError("fold target out of range");
    n.val[map[j]] += x[j];
  }
  return Var{used_ - 1};
}

Var Tape::straight_through(Var soft, int index) {
  if (index < 0 || index >= size(soft)) throw ShapeError("straight_through index out of range");
  Node& n = push(Op::kStraightThrough, rows(soft), cols(soft));
  n.in[0] = soft.id;
  n.iaux = index;
  n.rg = rg(soft.id);
  n.val[index] = 1.0;
  return Var{used_ - 1};
}

Var Tape::kl(Var q, Var p, std::span<const int> support) {
  check_same(q, p, "kl");
  Node& n = push(Op::kKl, 1, 1);
  n.in[0] = q.id;
  n.in[1] = p.id;
  n.rg = rg(q.id) || rg(p.id);
  n.list.assign(support.begin(), support.end());
  const double* qv = v(q.id);
  const double* pv = v(p.id);
  double acc = 0.0;
  for (int k : support) {
    if (qv[k] <= 0.0) continue;
    if (pv[k] <= 0.0) {
      acc = std::numeric_limits<double>::infinity();
      break;
    }
    acc += qv[k] * (std::log(qv[k]) - std::log(pv[k]));
  }
  n.val[0] = acc;
  return Var{used_ - 1};
}

Var Tape::gru(Var x, Var h, Var wx, Var wh, Var bx, Var bh) {
  const int hd = size(h);
  const int in = size(x);
  if (rows(wx) != 3 * hd || cols(wx) != in || rows(wh) != 3 * hd || cols(wh) != hd ||
      size(bx) != 3 * hd || size(bh) != 3 * hd) {
    throw ShapeError("gru: input width " + std::to_string(in) + " / hidden width " +
                     std::to_string(hd) + " do not match cell parameters");
  }
  Node& n = push(Op::kGru, hd, 1);
  n.in[0] = x.id;
  n.in[1] = h.id;
  n.in[2] = wx.id;
  n.in[3] = wh.id;
  n.in[4] = bx.id;
  n.in[5] = bh.id;
  n.rg = rg(x.id) || rg(h.id) || rg(wx.id) || rg(wh.id) || rg(bx.id) || rg(bh.id);
  // aux layout: r (hd) | z (hd) | n (hd) | gh_n (hd)
  n.aux.assign(static_cast<std::size_t>(4) * hd, 0.0);
  std::vector<double> gx(v(bx.id), v(bx.id) + 3 * hd);
  std::vector<double> gh(v(bh.id), v(bh.id) + 3 * hd);
  kernels::matvec(v(wx.id), 3 * hd, in, v(x.id), gx.data());
  kernels::matvec(v(wh.id), 3 * hd, hd, v(h.id), gh.data());
  const double* hv = v(h.id);
  double* r = n.aux.data();
  double* z = r + hd;
  double* nn = z + hd;
  double* ghn = nn + hd;
  for (int i = 0; i < hd; ++i) {
    r[i] = 1.0 / (1.0 + std::exp(-(gx[i] + gh[i])));
    z[i] = 1.0 / (1.0 + std::exp(-(gx[hd + i] + gh[hd + i])));
    ghn[i] = gh[2 * hd + i];
    nn[i] = std::tanh(gx[2 * hd + i] + r[i] * ghn[i]);
    n.val[i] = (1.0 - z[i]) * nn[i] + z[i] * hv[i];
  }
  return Var{used_ - 1};
}

Var Tape::graph_attend(Var q, Var k, Var m, std::span<const int> offsets,
                       std::span<const int> rws, double scale) {
  const int nq = rows(q);
  const int d = cols(q);
  if (cols(k) != d || cols(m) != d || rows(k) != rows(m)) {
    throw ShapeError("graph_attend: key/message shapes must match queries");
  }
  if (offsets.size() != static_cast<std::size_t>(nq) + 1 ||
      offsets.back() != static_cast<int>(rws.size())) {
    throw ShapeError("graph_attend: offsets do not describe the edge list");
  }
  Node& n = push(Op::kGraphAttend, nq, d);
  n.in[0] = q.id;
  n.in[1] = k.id;
  n.in[2] = m.id;
  n.daux = scale;
  n.rg = rg(q.id) || rg(k.id) || rg(m.id);
  n.iaux = nq;
  n.list.assign(offsets.begin(), offsets.end());
  n.list.insert(n.list.end(), rws.begin(), rws.end());
  n.aux.assign(rws.size(), 0.0);
  const double* qv = v(q.id);
  const double* kv = v(k.id);
  const double* mv = v(m.id);
  for (int i = 0; i < nq; ++i) {
    const int lo = offsets[i];
    const int hi = offsets[i + 1];
    if (lo == hi) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (int e = lo; e < hi; ++e) {
      const double* ke = kv + static_cast<std::size_t>(rws[e]) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += qv[i * d + t] * ke[t];
      n.aux[e] = s * scale;
      mx = std::max(mx, n.aux[e]);
    }
    double z = 0.0;
    for (int e = lo; e < hi; ++e) {
      n.aux[e] = std::exp(n.aux[e] - mx);
      z += n.aux[e];
    }
    for (int e = lo; e < hi; ++e) {
      n.aux[e] /= z;
      const double* me = mv + static_cast<std::size_t>(rws[e]) * d;
      for (int t = 0; t < d; ++t) n.val[i * d + t] += n.aux[e] * me[t];
    }
  }
  return Var{used_ - 1};
}

// ---------------------------------------------------------------------------
// Backward

void Tape::backward(Var loss) {
  if (size(loss) != 1) throw ShapeError("backward: loss must be a scalar");
  if (!nodes_[loss.id].rg) return;
  g(loss.id)[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (nodes_[id].rg) backprop(id);
  }
}

void Tape::backprop(int id) {
  Node& n = nodes_[id];
  const std::size_t sz = static_cast<std::size_t>(n.rows) * n.cols;
  const double* gy = n.op == Op::kParam ? nullptr : n.grad.data();
  const int a = n.in[0];
  const int b = n.in[1];
  switch (n.op) {
    case Op::kParam:
    case Op::kConst:
      break;
    case Op::kAdd: {
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      }
      if (rg(b)) {
        double* gb = g(b);
        for (std::size_t i = 0; i < sz; ++i) gb[i] += gy[i];
      }
      break;
    }
    case Op::kSub: {
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      }
      if (rg(b)) {
        double* gb = g(b);
        for (std::size_t i = 0; i < sz; ++i) gb[i] -= gy[i];
      }
      break;
    }
    case Op::kMul: {
      const double* x = v(a);
      const double* y = v(b);
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] * y[i];
      }
      if (rg(b)) {
        double* gb = g(b);
        for (std::size_t i = 0; i < sz; ++i) gb[i] += gy[i] * x[i];
      }
      break;
    }
    case Op::kScale: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += n.daux * gy[i];
      break;
    }
    case Op::kAddConst: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      break;
    }
    case Op::kAddScalar: {
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      }
      if (rg(b)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < sz; ++i) acc += gy[i];
        g(b)[0] += acc;
      }
      break;
    }
    case Op::kTanh: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] * (1.0 - n.val[i] * n.val[i]);
      break;
    }
    case Op::kSigmoid: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] * n.val[i] * (1.0 - n.val[i]);
      break;
    }
    case Op::kExp: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] * n.val[i];
      break;
    }
    case Op::kLog: {
      const double* x = v(a);
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] / x[i];
      break;
    }
    case Op::kMatVec:
    case Op::kAffine: {
      const Node& w = nodes_[a];
      const int r = w.rows;
      const int c = w.cols;
      if (rg(a)) kernels::add_outer(g(a), r, c, gy, v(b));
      if (rg(b)) kernels::matvec_t(v(a), r, c, gy, g(b));
      if (n.op == Op::kAffine && rg(n.in[2])) {
        double* gb = g(n.in[2]);
        for (int i = 0; i < r; ++i) gb[i] += gy[i];
      }
      break;
    }
    case Op::kMatVecT: {
      const Node& w = nodes_[a];
      const int r = w.rows;
      const int c = w.cols;
      if (rg(a)) kernels::add_outer(g(a), r, c, v(b), gy);
      if (rg(b)) kernels::matvec(v(a), r, c, gy, g(b));
      break;
    }
    case Op::kMatMulNT: {
      const int na = nodes_[a].rows;
      const int k = nodes_[a].cols;
      const int mb = nodes_[b].rows;
      if (rg(a)) kernels::matmul_nn(gy, v(b), na, mb, k, g(a));
      if (rg(b)) kernels::matmul_tn(gy, v(a), na, mb, k, g(b));
      break;
    }
    case Op::kAddRow: {
      const int r = n.rows;
      const int c = n.cols;
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      }
      if (rg(b)) {
        double* gb = g(b);
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < c; ++j) gb[j] += gy[i * c + j];
        }
      }
      break;
    }
    case Op::kConcat: {
      std::size_t off = 0;
      for (int src : n.list) {
        const std::size_t s = static_cast<std::size_t>(nodes_[src].rows) * nodes_[src].cols;
        if (rg(src)) {
          double* gs = g(src);
          for (std::size_t i = 0; i < s; ++i) gs[i] += gy[off + i];
        }
        off += s;
      }
      break;
    }
    case Op::kSlice: {
      double* ga = g(a) + n.iaux;
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      break;
    }
    case Op::kRow:
    case Op::kEmbedRow: {
      double* ga = g(a) + static_cast<std::size_t>(n.iaux) * sz;
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      break;
    }
    case Op::kSoftmax: {
      double dotp = 0.0;
      for (std::size_t i = 0; i < sz; ++i) dotp += gy[i] * n.val[i];
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += n.val[i] * (gy[i] - dotp);
      break;
    }
    case Op::kSum: {
      double* ga = g(a);
      const std::size_t s = static_cast<std::size_t>(nodes_[a].rows) * nodes_[a].cols;
      for (std::size_t i = 0; i < s; ++i) ga[i] += gy[0];
      break;
    }
    case Op::kDot: {
      const std::size_t s = static_cast<std::size_t>(nodes_[a].rows) * nodes_[a].cols;
      const double* x = v(a);
      const double* y = v(b);
      if (rg(a)) {
        double* ga = g(a);
        for (std::size_t i = 0; i < s; ++i) ga[i] += gy[0] * y[i];
      }
      if (rg(b)) {
        double* gb = g(b);
        for (std::size_t i = 0; i < s; ++i) gb[i] += gy[0] * x[i];
      }
      break;
    }
    case Op::kSumAt: {
      double* ga = g(a);
      for (int i : n.list) ga[i] += gy[0];
      break;
    }
    case Op::kFold: {
      double* ga = g(a);
      for (std::size_t j = 0; j < n.list.size(); ++j) ga[j] += gy[n.list[j]];
      break;
    }
    case Op::kStraightThrough: {
      double* ga = g(a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
      break;
    }
    case Op::kKl: {
      const double* qv = v(a);
      const double* pv = v(b);
      for (int k : n.list) {
        if (qv[k] <= 0.0 || pv[k] <= 0.0) continue;
        if (rg(a)) g(a)[k] += gy[0] * (std::log(qv[k]) - std::log(pv[k]) + 1.0);
        if (rg(b)) g(b)[k] -= gy[0] * qv[k] / pv[k];
      }
      break;
    }
    case Op::kGru: {
      const int hd = n.rows;
      const int x = n.in[0];
      const int h = n.in[1];
      const int wx = n.in[2];
      const int wh = n.in[3];
      const int bx = n.in[4];
      const int bh = n.in[5];
      const int in = nodes_[x].rows * nodes_[x].cols;
      const double* r = n.aux.data();
      const double* z = r + hd;
      const double* nn = z + hd;
      const double* ghn = nn + hd;
      const double* hv = v(h);
      std::vector<double> dgx(3 * hd, 0.0);
      std::vector<double> dgh(3 * hd, 0.0);
      double* gh_prev = rg(h) ? g(h) : nullptr;
      for (int i = 0; i < hd; ++i) {
        const double dy = gy[i];
        const double dn = dy * (1.0 - z[i]);
        const double dz = dy * (hv[i] - nn[i]);
        if (gh_prev != nullptr) gh_prev[i] += dy * z[i];
        const double dan = dn * (1.0 - nn[i] * nn[i]);
        const double dr = dan * ghn[i];
        const double dar = dr * r[i] * (1.0 - r[i]);
        const double daz = dz * z[i] * (1.0 - z[i]);
        dgx[i] = dar;
        dgx[hd + i] = daz;
        dgx[2 * hd + i] = dan;
        dgh[i] = dar;
        dgh[hd + i] = daz;
        dgh[2 * hd + i] = dan * r[i];
      }
      if (rg(wx)) kernels::add_outer(g(wx), 3 * hd, in, dgx.data(), v(x));
      if (rg(wh)) kernels::add_outer(g(wh), 3 * hd, hd, dgh.data(), hv);
      if (rg(bx)) {
        double* gb = g(bx);
        for (int i = 0; i < 3 * hd; ++i) gb[i] += dgx[i];
      }
      if (rg(bh)) {
        double* gb = g(bh);
        for (int i = 0; i < 3 * hd; ++i) gb[i] += dgh[i];
      }
      if (rg(x)) kernels::matvec_t(v(wx), 3 * hd, in, dgx.data(), g(x));
      if (gh_prev != nullptr) kernels::matvec_t(v(wh), 3 * hd, hd, dgh.data(), gh_prev);
      break;
    }
    case Op::kGraphAttend: {
      const int qn = n.in[0];
      const int kn = n.in[1];
      const int mn = n.in[2];
      const int nq = n.iaux;
      const int d = n.cols;
      const int* offsets = n.list.data();
      const int* rws = n.list.data() + nq + 1;
      const double* qv = v(qn);
      const double* kv = v(kn);
      const double* mv = v(mn);
      double* gq = rg(qn) ? g(qn) : nullptr;
      double* gk = rg(kn) ? g(kn) : nullptr;
      double* gm = rg(mn) ? g(mn) : nullptr;
      std::vector<double> dalpha;
      for (int i = 0; i < nq; ++i) {
        const int lo = offsets[i];
        const int hi = offsets[i + 1];
        if (lo == hi) continue;
        const double* gi = gy + static_cast<std::size_t>(i) * d;
        dalpha.assign(hi - lo, 0.0);
        double weighted = 0.0;
        for (int e = lo; e < hi; ++e) {
          const double* me = mv + static_cast<std::size_t>(rws[e]) * d;
          double s = 0.0;
          for (int t = 0; t < d; ++t) s += gi[t] * me[t];
          dalpha[e - lo] = s;
          weighted += n.aux[e] * s;
          if (gm != nullptr) {
            double* gme = gm + static_cast<std::size_t>(rws[e]) * d;
            for (int t = 0; t < d; ++t) gme[t] += n.aux[e] * gi[t];
          }
        }
        for (int e = lo; e < hi; ++e) {
          const double ds = n.aux[e] * (dalpha[e - lo] - weighted) * n.daux;
          const double* ke = kv + static_cast<std::size_t>(rws[e]) * d;
          if (gq != nullptr) {
            for (int t = 0; t < d; ++t) gq[i * d + t] += ds * ke[t];
          }
          if (gk != nullptr) {
            double* gke = gk + static_cast<std::size_t>(rws[e]) * d;
            for (int t = 0; t < d; ++t) gke[t] += ds * qv[i * d + t];
          }
        }
      }
      break;
    }
  }
}

}  // namespace vrdial::nn
