#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "textnorm/tensor.hpp"

namespace textnorm {

// One GRU layer's parameter names inside a ParamStore. Input-side weights
// for the three gates are packed column-wise as (z | r | candidate); the
// recurrent weights split into a packed (z | r) block and a separate
// candidate block because the candidate sees r*h instead of h.
struct GruLayerNames {
  std::string w_x;   // [d_in, 3*d_h]
  std::string u_zr;  // [d_h, 2*d_h]
  std::string u_h;   // [d_h, d_h]
  std::string bias;  // [3*d_h]
  size_t d_in = 0;
  size_t d_h = 0;
};

// References to a GRU layer's parameters leased onto a tape.
struct GruRefs {
  TensorRef w_x, u_zr, u_h, bias;
  size_t d_h = 0;
};

inline double xavier_bound(size_t fan_in, size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename Real>
GruLayerNames register_gru(ParamStore<Real>& store, const std::string& prefix,
                           size_t d_in, size_t d_h, Rng& rng) {
  GruLayerNames n;
  n.d_in = d_in;
  n.d_h = d_h;
  n.w_x = prefix + ".w_x";
  n.u_zr = prefix + ".u_zr";
  n.u_h = prefix + ".u_h";
  n.bias = prefix + ".bias";
  const double bx = xavier_bound(d_in, d_h);
  const double bh = xavier_bound(d_h, d_h);
  store.add_uniform(n.w_x, {d_in, 3 * d_h}, rng, -bx, bx);
  store.add_uniform(n.u_zr, {d_h, 2 * d_h}, rng, -bh, bh);
  store.add_uniform(n.u_h, {d_h, d_h}, rng, -bh, bh);
  store.add_zeros(n.bias, {3 * d_h});
  return n;
}

template <typename Real>
GruRefs lease_gru(Tape<Real>& tape, ParamStore<Real>& store,
                  const GruLayerNames& names) {
  return GruRefs{tape.param(store, names.w_x), tape.param(store, names.u_zr),
                 tape.param(store, names.u_h), tape.param(store, names.bias),
                 names.d_h};
}

// One GRU step over a batch:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W_c + (r*h) U_c + b_c)
//   h' = (1-z)*h + z*c
// x: [b, d_in], h: [b, d_h] -> [b, d_h]
template <typename Real>
TensorRef gru_step(Tape<Real>& tape, const GruRefs& p, TensorRef x, TensorRef h) {
  const size_t d = p.d_h;
  TensorRef xa = tape.add_rowwise(tape.matmul(x, p.w_x), p.bias);  // [b, 3d]
  TensorRef hu = tape.matmul(h, p.u_zr);                           // [b, 2d]
  TensorRef z = tape.sigmoid(tape.add(tape.slice_cols(xa, 0, d),
                                      tape.slice_cols(hu, 0, d)));
  TensorRef r = tape.sigmoid(tape.add(tape.slice_cols(xa, d, 2 * d),
                                      tape.slice_cols(hu, d, 2 * d)));
  TensorRef rh = tape.mul(r, h);
  TensorRef c = tape.tanh(tape.add(tape.slice_cols(xa, 2 * d, 3 * d),
                                   tape.matmul(rh, p.u_h)));
  return tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, c));
}

// Single-vector GRU cell: x may be [d_in] or [1,d_in], h likewise.
// Returns a [1, d_h] tensor.
template <typename Real>
TensorRef gru_cell(Tape<Real>& tape, const GruRefs& p, TensorRef x, TensorRef h) {
  TensorRef x2 = tape.shape(x).size() == 1
                     ? tape.reshape(x, {1, tape.shape(x)[0]})
                     : x;
  TensorRef h2 = tape.shape(h).size() == 1
                     ? tape.reshape(h, {1, tape.shape(h)[0]})
                     : h;
  return gru_step(tape, p, x2, h2);
}

struct AttentionResult {
  TensorRef context;   // [b, d]
  TensorRef attn_out;  // [b, d]
  TensorRef weights;   // [b, T]
};

// Bilinear attention with a combined output layer:
//   score_t = h_dec^T W_a enc_t
//   weights = softmax(scores)      (masked to each row's true length)
//   context = sum_t weights_t enc_t
//   attn_out = tanh(W_c [context; h_dec])
// h_dec: [b, d]; enc: [b, T, d]; w_a: [d, d]; w_c: [2d, d].
template <typename Real>
AttentionResult attention_step(Tape<Real>& tape, TensorRef h_dec, TensorRef enc,
                               const std::vector<size_t>& lengths, TensorRef w_a,
                               TensorRef w_c) {
  TensorRef q = tape.matmul(h_dec, w_a);
  TensorRef scores = tape.attn_scores(q, enc);
  TensorRef weights = tape.masked_softmax(scores, lengths);
  TensorRef context = tape.attn_context(weights, enc);
  TensorRef cat = tape.concat_cols(context, h_dec);
  TensorRef attn_out = tape.tanh(tape.matmul(cat, w_c));
  return {context, attn_out, weights};
}

// Single-sentence attention: h_dec [d] or [1,d]; enc [T,d].
template <typename Real>
AttentionResult luong_attention(Tape<Real>& tape, TensorRef h_dec, TensorRef enc,
                                TensorRef w_a, TensorRef w_c) {
  const auto& es = tape.shape(enc);
  if (es.size() != 2) throw DimensionError("luong_attention: enc must be [T,d]");
  const size_t T = es[0], d = es[1];
  if (T == 0) throw EmptySourceError("luong_attention: empty source");
  TensorRef h2 = tape.shape(h_dec).size() == 1
                     ? tape.reshape(h_dec, {1, tape.shape(h_dec)[0]})
                     : h_dec;
  TensorRef enc3 = tape.reshape(enc, {1, T, d});
  return attention_step(tape, h2, enc3, std::vector<size_t>{T}, w_a, w_c);
}

}  // namespace textnorm
