#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "textnorm/errors.hpp"
#include "textnorm/param_store.hpp"
#include "textnorm/rng.hpp"

namespace textnorm {

// Handle into a Tape. Cheap to copy; only meaningful together with the
// tape that produced it.
struct TensorRef {
  uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class Reduction { mean, sum };

inline size_t numel_of(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

namespace detail {

// c[m,n] += a[m,k] * b[k,n], all row-major. Inner loop over contiguous
// rows of b/c so the compiler can vectorize it.
template <typename Real>
void gemm_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k,
              size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * k;
    Real* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// da[m,k] += go[m,n] * b[k,n]^T  (dot of contiguous rows)
template <typename Real>
void gemm_acc_abt(const Real* go, const Real* b, Real* da, size_t m, size_t k,
                  size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const Real* grow = go + i * n;
    Real* darow = da + i * k;
    for (size_t p = 0; p < k; ++p) {
      const Real* brow = b + p * n;
      Real acc = Real(0);
      for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// db[k,n] += a[m,k]^T * go[m,n]
template <typename Real>
void gemm_acc_atb(const Real* a, const Real* go, Real* db, size_t m, size_t k,
                  size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * k;
    const Real* grow = go + i * n;
    for (size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      Real* dbrow = db + p * n;
      for (size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
    }
  }
}

}  // namespace detail

// Reverse-mode tape. Every operation appends one node holding the output
// value; backward() replays the recorded operations in exact reverse
// order. Gradients accumulate additively, so a tensor feeding several
// consumers receives the sum of their contributions.
template <typename Real>
class Tape {
 public:
  using Scalar = Real;

  // ---- leaves ----

  TensorRef leaf(std::vector<size_t> shape, std::vector<Real> data,
                 bool requires_grad = false) {
    if (data.size() != numel_of(shape)) {
      throw DimensionError("leaf: data size does not match shape");
    }
    Node n;
    n.shape = std::move(shape);
    n.storage = std::move(data);
    n.data = n.storage.data();
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  // Leaf whose values live outside the tape (parameter buffers). The
  // pointed-to memory must stay valid and unchanged for the tape's life.
  TensorRef leaf_ref(std::vector<size_t> shape, const Real* data,
                     bool requires_grad = false) {
    Node n;
    n.shape = std::move(shape);
    n.data = data;
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  // Leases a named parameter onto the tape. collect_param_grads() later
  // adds the accumulated gradient back into the store.
  TensorRef param(ParamStore<Real>& store, const std::string& name) {
    const auto& e = store.at(name);
    TensorRef r = leaf_ref(e.shape, e.value.data(), e.trainable);
    param_links_.push_back({r.id, name});
    return r;
  }

  // ---- shape / value access ----

  const std::vector<size_t>& shape(TensorRef r) const { return node(r).shape; }
  size_t numel(TensorRef r) const { return numel_of(node(r).shape); }
  std::span<const Real> value(TensorRef r) const {
    return {node(r).data, numel(r)};
  }
  // Gradient of a node after backward(); empty if nothing flowed into it.
  std::span<const Real> grad(TensorRef r) const {
    const Node& n = node(r);
    return {n.grad.data(), n.grad.size()};
  }
  bool requires_grad(TensorRef r) const { return node(r).requires_grad; }
  size_t size() const { return nodes_.size(); }

  // ---- operations ----

  TensorRef matmul(TensorRef ar, TensorRef br) {
    const Node& a = node(ar);
    const Node& b = node(br);
    if (a.shape.size() != 2 || b.shape.size() != 2) {
      throw DimensionError("matmul: operands must be 2-D");
    }
    const size_t m = a.shape[0], k = a.shape[1], k2 = b.shape[0],
                 n = b.shape[1];
    if (k != k2) throw DimensionError("matmul: inner dimensions differ");
    std::vector<Real> out(m * n, Real(0));
    detail::gemm_acc(a.data, b.data, out.data(), m, k, n);
    TensorRef r = make(
        {m, n}, std::move(out), a.requires_grad || b.requires_grad,
        [aid = ar.id, bid = br.id, m, k, n](Tape& t, uint32_t out_id) {
          const Real* go = t.nodes_[out_id].grad.data();
          if (Real* da = t.grad_accum(aid)) {
            detail::gemm_acc_abt(go, t.nodes_[bid].data, da, m, k, n);
          }
          if (Real* db = t.grad_accum(bid)) {
            detail::gemm_acc_atb(t.nodes_[aid].data, go, db, m, k, n);
          }
        });
    return r;
  }

  TensorRef add(TensorRef ar, TensorRef br) {
    return binary_pointwise(ar, br, "add",
                            [](Real x, Real y) { return x + y; },
                            /*da=*/[](Real, Real, Real g) { return g; },
                            /*db=*/[](Real, Real, Real g) { return g; });
  }

  TensorRef sub(TensorRef ar, TensorRef br) {
    return binary_pointwise(ar, br, "sub",
                            [](Real x, Real y) { return x - y; },
                            [](Real, Real, Real g) { return g; },
                            [](Real, Real, Real g) { return -g; });
  }

  TensorRef mul(TensorRef ar, TensorRef br) {
    return binary_pointwise(ar, br, "mul",
                            [](Real x, Real y) { return x * y; },
                            [](Real, Real y, Real g) { return g * y; },
                            [](Real x, Real, Real g) { return g * x; });
  }

  // mat[r,c] + row broadcast over rows; row shape [c] or [1,c].
  TensorRef add_rowwise(TensorRef mr, TensorRef rr) {
    const Node& m = node(mr);
    const Node& v = node(rr);
    if (m.shape.size() != 2) throw DimensionError("add_rowwise: matrix must be 2-D");
    const size_t rows = m.shape[0], cols = m.shape[1];
    if (numel_of(v.shape) != cols) {
      throw DimensionError("add_rowwise: row width mismatch");
    }
    std::vector<Real> out(rows * cols);
    for (size_t i = 0; i < rows; ++i) {
      for (size_t j = 0; j < cols; ++j) out[i * cols + j] = m.data[i * cols + j] + v.data[j];
    }
    return make({rows, cols}, std::move(out),
                m.requires_grad || v.requires_grad,
                [mid = mr.id, vid = rr.id, rows, cols](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  if (Real* dm = t.grad_accum(mid)) {
                    for (size_t i = 0; i < rows * cols; ++i) dm[i] += go[i];
                  }
                  if (Real* dv = t.grad_accum(vid)) {
                    for (size_t i = 0; i < rows; ++i) {
                      for (size_t j = 0; j < cols; ++j) dv[j] += go[i * cols + j];
                    }
                  }
                });
  }

  TensorRef tanh(TensorRef xr) {
    const Node& x = node(xr);
    std::vector<Real> out(numel_of(x.shape));
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data[i]);
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < o.grad.size(); ++i) {
                      dx[i] += (Real(1) - o.data[i] * o.data[i]) * o.grad[i];
                    }
                  }
                });
  }

  TensorRef sigmoid(TensorRef xr) {
    const Node& x = node(xr);
    std::vector<Real> out(numel_of(x.shape));
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = Real(1) / (Real(1) + std::exp(-x.data[i]));
    }
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < o.grad.size(); ++i) {
                      dx[i] += o.data[i] * (Real(1) - o.data[i]) * o.grad[i];
                    }
                  }
                });
  }

  TensorRef one_minus(TensorRef xr) {
    const Node& x = node(xr);
    std::vector<Real> out(numel_of(x.shape));
    for (size_t i = 0; i < out.size(); ++i) out[i] = Real(1) - x.data[i];
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < o.grad.size(); ++i) dx[i] -= o.grad[i];
                  }
                });
  }

  TensorRef scale(TensorRef xr, Real c) {
    const Node& x = node(xr);
    std::vector<Real> out(numel_of(x.shape));
    for (size_t i = 0; i < out.size(); ++i) out[i] = c * x.data[i];
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id, c](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < o.grad.size(); ++i) dx[i] += c * o.grad[i];
                  }
                });
  }

  TensorRef sum(TensorRef xr) {
    const Node& x = node(xr);
    Real s = Real(0);
    const size_t n = numel_of(x.shape);
    for (size_t i = 0; i < n; ++i) s += x.data[i];
    return make({1}, std::vector<Real>{s}, x.requires_grad,
                [xid = xr.id, n](Tape& t, uint32_t out_id) {
                  const Real g = t.nodes_[out_id].grad[0];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < n; ++i) dx[i] += g;
                  }
                });
  }

  // Softmax over the last axis, with max subtraction per row.
  TensorRef softmax(TensorRef xr) {
    const Node& x = node(xr);
    if (x.shape.empty()) throw DimensionError("softmax: rank-0 input");
    const size_t width = x.shape.back();
    if (width == 0) throw DimensionError("softmax: empty last axis");
    const size_t rows = numel_of(x.shape) / width;
    std::vector<Real> out(rows * width);
    for (size_t i = 0; i < rows; ++i) {
      const Real* row = x.data + i * width;
      Real* orow = out.data() + i * width;
      Real mx = row[0];
      for (size_t j = 1; j < width; ++j) mx = std::max(mx, row[j]);
      Real s = Real(0);
      for (size_t j = 0; j < width; ++j) {
        orow[j] = std::exp(row[j] - mx);
        s += orow[j];
      }
      const Real inv = Real(1) / s;
      for (size_t j = 0; j < width; ++j) orow[j] *= inv;
    }
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id, rows, width](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < rows; ++i) {
                      const Real* y = o.data + i * width;
                      const Real* gy = o.grad.data() + i * width;
                      Real dot = Real(0);
                      for (size_t j = 0; j < width; ++j) dot += gy[j] * y[j];
                      Real* dxr = dx + i * width;
                      for (size_t j = 0; j < width; ++j) {
                        dxr[j] += y[j] * (gy[j] - dot);
                      }
                    }
                  }
                });
  }

  TensorRef concat_cols(TensorRef ar, TensorRef br) {
    const Node& a = node(ar);
    const Node& b = node(br);
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[0] != b.shape[0]) {
      throw DimensionError("concat_cols: need 2-D operands with equal rows");
    }
    const size_t rows = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    std::vector<Real> out(rows * (ca + cb));
    for (size_t i = 0; i < rows; ++i) {
      std::copy(a.data + i * ca, a.data + (i + 1) * ca, out.begin() + i * (ca + cb));
      std::copy(b.data + i * cb, b.data + (i + 1) * cb,
                out.begin() + i * (ca + cb) + ca);
    }
    return make({rows, ca + cb}, std::move(out),
                a.requires_grad || b.requires_grad,
                [aid = ar.id, bid = br.id, rows, ca, cb](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  const size_t c = ca + cb;
                  if (Real* da = t.grad_accum(aid)) {
                    for (size_t i = 0; i < rows; ++i) {
                      for (size_t j = 0; j < ca; ++j) da[i * ca + j] += go[i * c + j];
                    }
                  }
                  if (Real* db = t.grad_accum(bid)) {
                    for (size_t i = 0; i < rows; ++i) {
                      for (size_t j = 0; j < cb; ++j) db[i * cb + j] += go[i * c + ca + j];
                    }
                  }
                });
  }

  TensorRef slice_cols(TensorRef ar, size_t c0, size_t c1) {
    const Node& a = node(ar);
    if (a.shape.size() != 2) throw DimensionError("slice_cols: need 2-D operand");
    const size_t rows = a.shape[0], cols = a.shape[1];
    if (c0 >= c1 || c1 > cols) throw DimensionError("slice_cols: bad column range");
    const size_t w = c1 - c0;
    std::vector<Real> out(rows * w);
    for (size_t i = 0; i < rows; ++i) {
      std::copy(a.data + i * cols + c0, a.data + i * cols + c1, out.begin() + i * w);
    }
    return make({rows, w}, std::move(out), a.requires_grad,
                [aid = ar.id, rows, cols, c0, w](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  if (Real* da = t.grad_accum(aid)) {
                    for (size_t i = 0; i < rows; ++i) {
                      for (size_t j = 0; j < w; ++j) da[i * cols + c0 + j] += go[i * w + j];
                    }
                  }
                });
  }

  // Gather rows of a [V,d] table; backward scatter-adds.
  TensorRef lookup_rows(TensorRef tr, std::vector<int> ids) {
    const Node& tab = node(tr);
    if (tab.shape.size() != 2) throw DimensionError("lookup_rows: table must be 2-D");
    const size_t v = tab.shape[0], d = tab.shape[1];
    for (int id : ids) {
      if (id < 0 || static_cast<size_t>(id) >= v) {
        throw std::out_of_range("lookup_rows: id " + std::to_string(id) +
                                " outside table of " + std::to_string(v));
      }
    }
    const size_t n = ids.size();
    std::vector<Real> out(n * d);
    for (size_t i = 0; i < n; ++i) {
      std::copy(tab.data + static_cast<size_t>(ids[i]) * d,
                tab.data + (static_cast<size_t>(ids[i]) + 1) * d, out.begin() + i * d);
    }
    return make({n, d}, std::move(out), tab.requires_grad,
                [tid = tr.id, ids = std::move(ids), d](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  if (Real* dt = t.grad_accum(tid)) {
                    for (size_t i = 0; i < ids.size(); ++i) {
                      Real* drow = dt + static_cast<size_t>(ids[i]) * d;
                      const Real* grow = go + i * d;
                      for (size_t j = 0; j < d; ++j) drow[j] += grow[j];
                    }
                  }
                });
  }

  TensorRef reshape(TensorRef xr, std::vector<size_t> shape) {
    const Node& x = node(xr);
    if (numel_of(shape) != numel_of(x.shape)) {
      throw DimensionError("reshape: element count mismatch");
    }
    std::vector<Real> out(x.data, x.data + numel_of(x.shape));
    const size_t n = out.size();
    return make(std::move(shape), std::move(out), x.requires_grad,
                [xid = xr.id, n](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < n; ++i) dx[i] += go[i];
                  }
                });
  }

  // Stacks T step tensors of shape [b,d] into [b,T,d].
  TensorRef stack_steps(const std::vector<TensorRef>& steps) {
    if (steps.empty()) throw DimensionError("stack_steps: no steps");
    const Node& first = node(steps[0]);
    if (first.shape.size() != 2) throw DimensionError("stack_steps: steps must be 2-D");
    const size_t b = first.shape[0], d = first.shape[1], T = steps.size();
    bool rg = false;
    std::vector<uint32_t> ids(T);
    for (size_t t = 0; t < T; ++t) {
      const Node& s = node(steps[t]);
      if (s.shape != first.shape) throw DimensionError("stack_steps: step shape mismatch");
      rg = rg || s.requires_grad;
      ids[t] = steps[t].id;
    }
    std::vector<Real> out(b * T * d);
    for (size_t t = 0; t < T; ++t) {
      const Real* src = node(steps[t]).data;
      for (size_t i = 0; i < b; ++i) {
        std::copy(src + i * d, src + (i + 1) * d, out.begin() + (i * T + t) * d);
      }
    }
    return make({b, T, d}, std::move(out), rg,
                [ids = std::move(ids), b, d](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  const size_t T = ids.size();
                  for (size_t s = 0; s < T; ++s) {
                    if (Real* ds = t.grad_accum(ids[s])) {
                      for (size_t i = 0; i < b; ++i) {
                        const Real* grow = go + (i * T + s) * d;
                        for (size_t j = 0; j < d; ++j) ds[i * d + j] += grow[j];
                      }
                    }
                  }
                });
  }

  // scores[i,t] = sum_k q[i,k] * enc[i,t,k]
  TensorRef attn_scores(TensorRef qr, TensorRef er) {
    const Node& q = node(qr);
    const Node& e = node(er);
    if (q.shape.size() != 2 || e.shape.size() != 3 || q.shape[0] != e.shape[0] ||
        q.shape[1] != e.shape[2]) {
      throw DimensionError("attn_scores: want q[b,d], enc[b,T,d]");
    }
    const size_t b = q.shape[0], T = e.shape[1], d = q.shape[1];
    if (T == 0) throw EmptySourceError("attn_scores: empty source");
    std::vector<Real> out(b * T);
    for (size_t i = 0; i < b; ++i) {
      const Real* qi = q.data + i * d;
      for (size_t t = 0; t < T; ++t) {
        const Real* et = e.data + (i * T + t) * d;
        Real acc = Real(0);
        for (size_t k = 0; k < d; ++k) acc += qi[k] * et[k];
        out[i * T + t] = acc;
      }
    }
    return make({b, T}, std::move(out), q.requires_grad || e.requires_grad,
                [qid = qr.id, eid = er.id, b, T, d](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  Real* dq = t.grad_accum(qid);
                  Real* de = t.grad_accum(eid);
                  const Real* qv = t.nodes_[qid].data;
                  const Real* ev = t.nodes_[eid].data;
                  for (size_t i = 0; i < b; ++i) {
                    for (size_t s = 0; s < T; ++s) {
                      const Real g = go[i * T + s];
                      if (g == Real(0)) continue;
                      const Real* es = ev + (i * T + s) * d;
                      if (dq) {
                        Real* dqi = dq + i * d;
                        for (size_t k = 0; k < d; ++k) dqi[k] += g * es[k];
                      }
                      if (de) {
                        Real* des = de + (i * T + s) * d;
                        const Real* qi = qv + i * d;
                        for (size_t k = 0; k < d; ++k) des[k] += g * qi[k];
                      }
                    }
                  }
                });
  }

  // Row-wise softmax over the first lengths[i] entries; the rest get 0.
  TensorRef masked_softmax(TensorRef sr, std::vector<size_t> lengths) {
    const Node& s = node(sr);
    if (s.shape.size() != 2) throw DimensionError("masked_softmax: need [b,T]");
    const size_t b = s.shape[0], T = s.shape[1];
    if (lengths.size() != b) throw DimensionError("masked_softmax: lengths size mismatch");
    std::vector<Real> out(b * T, Real(0));
    for (size_t i = 0; i < b; ++i) {
      const size_t len = lengths[i];
      if (len == 0 || len > T) throw EmptySourceError("masked_softmax: bad row length");
      const Real* row = s.data + i * T;
      Real* orow = out.data() + i * T;
      Real mx = row[0];
      for (size_t j = 1; j < len; ++j) mx = std::max(mx, row[j]);
      Real z = Real(0);
      for (size_t j = 0; j < len; ++j) {
        orow[j] = std::exp(row[j] - mx);
        z += orow[j];
      }
      const Real inv = Real(1) / z;
      for (size_t j = 0; j < len; ++j) orow[j] *= inv;
    }
    return make({b, T}, std::move(out), s.requires_grad,
                [sid = sr.id, lengths = std::move(lengths), T](Tape& t, uint32_t out_id) {
                  const Node& o = t.nodes_[out_id];
                  if (Real* dx = t.grad_accum(sid)) {
                    for (size_t i = 0; i < lengths.size(); ++i) {
                      const size_t len = lengths[i];
                      const Real* y = o.data + i * T;
                      const Real* gy = o.grad.data() + i * T;
                      Real dot = Real(0);
                      for (size_t j = 0; j < len; ++j) dot += gy[j] * y[j];
                      Real* dxr = dx + i * T;
                      for (size_t j = 0; j < len; ++j) dxr[j] += y[j] * (gy[j] - dot);
                    }
                  }
                });
  }

  // context[i,k] = sum_t w[i,t] * enc[i,t,k]
  TensorRef attn_context(TensorRef wr, TensorRef er) {
    const Node& w = node(wr);
    const Node& e = node(er);
    if (w.shape.size() != 2 || e.shape.size() != 3 || w.shape[0] != e.shape[0] ||
        w.shape[1] != e.shape[1]) {
      throw DimensionError("attn_context: want w[b,T], enc[b,T,d]");
    }
    const size_t b = w.shape[0], T = w.shape[1], d = e.shape[2];
    std::vector<Real> out(b * d, Real(0));
    for (size_t i = 0; i < b; ++i) {
      Real* oi = out.data() + i * d;
      for (size_t t = 0; t < T; ++t) {
        const Real wt = w.data[i * T + t];
        if (wt == Real(0)) continue;
        const Real* et = e.data + (i * T + t) * d;
        for (size_t k = 0; k < d; ++k) oi[k] += wt * et[k];
      }
    }
    return make({b, d}, std::move(out), w.requires_grad || e.requires_grad,
                [wid = wr.id, eid = er.id, b, T, d](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  Real* dw = t.grad_accum(wid);
                  Real* de = t.grad_accum(eid);
                  const Real* wv = t.nodes_[wid].data;
                  const Real* ev = t.nodes_[eid].data;
                  for (size_t i = 0; i < b; ++i) {
                    const Real* gi = go + i * d;
                    for (size_t s = 0; s < T; ++s) {
                      const Real* es = ev + (i * T + s) * d;
                      if (dw) {
                        Real acc = Real(0);
                        for (size_t k = 0; k < d; ++k) acc += gi[k] * es[k];
                        dw[i * T + s] += acc;
                      }
                      if (de) {
                        const Real wt = wv[i * T + s];
                        if (wt != Real(0)) {
                          Real* des = de + (i * T + s) * d;
                          for (size_t k = 0; k < d; ++k) des[k] += wt * gi[k];
                        }
                      }
                    }
                  }
                });
  }

  // out[i,:] = take_a[i] ? a[i,:] : b[i,:]
  TensorRef where_rows(std::vector<uint8_t> take_a, TensorRef ar, TensorRef br) {
    const Node& a = node(ar);
    const Node& b = node(br);
    if (a.shape != b.shape || a.shape.size() != 2) {
      throw DimensionError("where_rows: need equal 2-D shapes");
    }
    const size_t rows = a.shape[0], cols = a.shape[1];
    if (take_a.size() != rows) throw DimensionError("where_rows: mask size mismatch");
    std::vector<Real> out(rows * cols);
    for (size_t i = 0; i < rows; ++i) {
      const Real* src = take_a[i] ? a.data : b.data;
      std::copy(src + i * cols, src + (i + 1) * cols, out.begin() + i * cols);
    }
    return make({rows, cols}, std::move(out), a.requires_grad || b.requires_grad,
                [aid = ar.id, bid = br.id, take_a = std::move(take_a), cols](
                    Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  Real* da = t.grad_accum(aid);
                  Real* db = t.grad_accum(bid);
                  for (size_t i = 0; i < take_a.size(); ++i) {
                    Real* d = take_a[i] ? da : db;
                    if (!d) continue;
                    for (size_t j = 0; j < cols; ++j) d[i * cols + j] += go[i * cols + j];
                  }
                });
  }

  // Inverted dropout: surviving entries are scaled by 1/(1-p) during
  // training so inference is the identity.
  TensorRef dropout(TensorRef xr, Real p, Rng& rng, bool training) {
    if (p < Real(0) || p >= Real(1)) {
      throw ConfigError("dropout probability must be in [0,1)");
    }
    if (!training || p == Real(0)) return xr;
    const Node& x = node(xr);
    const size_t n = numel_of(x.shape);
    std::vector<Real> mask(n);
    const Real keep_scale = Real(1) / (Real(1) - p);
    for (size_t i = 0; i < n; ++i) {
      mask[i] = rng.bernoulli(static_cast<double>(p)) ? Real(0) : keep_scale;
    }
    std::vector<Real> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = x.data[i] * mask[i];
    return make(x.shape, std::move(out), x.requires_grad,
                [xid = xr.id, mask = std::move(mask)](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  if (Real* dx = t.grad_accum(xid)) {
                    for (size_t i = 0; i < mask.size(); ++i) dx[i] += go[i] * mask[i];
                  }
                });
  }

  // Cross entropy over rows of logits[N,V] with one target id per row.
  // Rows with mask[i]==0 are excluded. Log-sum-exp uses max subtraction.
  TensorRef cross_entropy_rows(TensorRef lr, std::vector<int> targets,
                               std::vector<uint8_t> mask, Reduction red) {
    const Node& l = node(lr);
    if (l.shape.size() != 2) throw DimensionError("cross_entropy: logits must be 2-D");
    const size_t n = l.shape[0], v = l.shape[1];
    if (targets.size() != n || mask.size() != n) {
      throw DimensionError("cross_entropy: targets/mask size mismatch");
    }
    size_t count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      ++count;
      if (targets[i] < 0 || static_cast<size_t>(targets[i]) >= v) {
        throw std::out_of_range("cross_entropy: target id out of range");
      }
    }
    if (count == 0) throw DataError("cross_entropy: no unmasked targets");
    std::vector<Real> lse(n, Real(0));
    Real total = Real(0);
    for (size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      const Real* row = l.data + i * v;
      Real mx = row[0];
      for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
      Real z = Real(0);
      for (size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
      lse[i] = mx + std::log(z);
      total += lse[i] - row[targets[i]];
    }
    if (red == Reduction::mean) total /= static_cast<Real>(count);
    return make({1}, std::vector<Real>{total}, l.requires_grad,
                [lid = lr.id, targets = std::move(targets), mask = std::move(mask),
                 lse = std::move(lse), v, count, red](Tape& t, uint32_t out_id) {
                  Real g = t.nodes_[out_id].grad[0];
                  if (red == Reduction::mean) g /= static_cast<Real>(count);
                  if (Real* dl = t.grad_accum(lid)) {
                    const Real* lv = t.nodes_[lid].data;
                    for (size_t i = 0; i < mask.size(); ++i) {
                      if (!mask[i]) continue;
                      const Real* row = lv + i * v;
                      Real* drow = dl + i * v;
                      for (size_t j = 0; j < v; ++j) {
                        Real p = std::exp(row[j] - lse[i]);
                        if (j == static_cast<size_t>(targets[i])) p -= Real(1);
                        drow[j] += g * p;
                      }
                    }
                  }
                });
  }

  // ---- backward ----

  // Seeds d(loss)/d(loss)=1 and replays recorded operations in exact
  // reverse order of recording.
  void backward(TensorRef loss) {
    const Node& ln = node(loss);
    if (numel_of(ln.shape) != 1) {
      throw UsageError("backward: loss must be a scalar");
    }
    if (!ln.requires_grad) return;  // constant loss: all gradients stay zero
    grad_accum(loss.id)[0] += Real(1);
    for (uint32_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backprop) continue;
      n.backprop(*this, i);
    }
  }

  void collect_param_grads(ParamStore<Real>& store) {
    for (const auto& [id, name] : param_links_) {
      const Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      auto& g = store.at(name).grad;
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  }

 private:
  struct Node {
    std::vector<size_t> shape;
    std::vector<Real> storage;          // owned values; empty for leaf_ref
    const Real* data = nullptr;         // points at storage or external memory
    std::vector<Real> grad;             // allocated lazily during backward
    bool requires_grad = false;
    std::function<void(Tape&, uint32_t)> backprop;  // null for leaves
  };

  Node& node(TensorRef r) {
    if (r.id >= nodes_.size()) throw UsageError("tensor ref not on this tape");
    return nodes_[r.id];
  }
  const Node& node(TensorRef r) const {
    if (r.id >= nodes_.size()) throw UsageError("tensor ref not on this tape");
    return nodes_[r.id];
  }

  TensorRef push(Node&& n) {
    nodes_.push_back(std::move(n));
    Node& stored = nodes_.back();
    if (!stored.storage.empty()) stored.data = stored.storage.data();
    return TensorRef{static_cast<uint32_t>(nodes_.size() - 1)};
  }

  TensorRef make(std::vector<size_t> shape, std::vector<Real> value, bool rg,
                 std::function<void(Tape&, uint32_t)> backprop) {
    Node n;
    n.shape = std::move(shape);
    n.storage = std::move(value);
    n.requires_grad = rg;
    if (rg) n.backprop = std::move(backprop);
    return push(std::move(n));
  }

  // Gradient buffer of a node, allocated and zeroed on first use.
  // Returns nullptr for nodes that do not require grad.
  Real* grad_accum(uint32_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad.assign(numel_of(n.shape), Real(0));
    return n.grad.data();
  }

  template <typename F, typename DA, typename DB>
  TensorRef binary_pointwise(TensorRef ar, TensorRef br, const char* name, F f,
                             DA da_f, DB db_f) {
    const Node& a = node(ar);
    const Node& b = node(br);
    if (a.shape != b.shape) {
      throw DimensionError(std::string(name) + ": shape mismatch");
    }
    const size_t n = numel_of(a.shape);
    std::vector<Real> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = f(a.data[i], b.data[i]);
    return make(a.shape, std::move(out), a.requires_grad || b.requires_grad,
                [aid = ar.id, bid = br.id, da_f, db_f, n](Tape& t, uint32_t out_id) {
                  const Real* go = t.nodes_[out_id].grad.data();
                  const Real* av = t.nodes_[aid].data;
                  const Real* bv = t.nodes_[bid].data;
                  if (Real* da = t.grad_accum(aid)) {
                    for (size_t i = 0; i < n; ++i) da[i] += da_f(av[i], bv[i], go[i]);
                  }
                  if (Real* db = t.grad_accum(bid)) {
                    for (size_t i = 0; i < n; ++i) db[i] += db_f(av[i], bv[i], go[i]);
                  }
                });
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<uint32_t, std::string>> param_links_;
};

// Mean cross entropy of a [T,V] logit matrix against a target id
// sequence; positions whose target equals pad_id are excluded.
template <typename Real>
TensorRef cross_entropy(Tape<Real>& tape, TensorRef logits,
                        const std::vector<int>& targets, int pad_id = 0) {
  std::vector<uint8_t> mask(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) mask[i] = targets[i] != pad_id;
  return tape.cross_entropy_rows(logits, targets, std::move(mask),
                                 Reduction::mean);
}

}  // namespace textnorm
