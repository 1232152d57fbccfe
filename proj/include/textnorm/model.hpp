#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "textnorm/batch.hpp"
#include "textnorm/embeddings.hpp"
#include "textnorm/layers.hpp"
#include "textnorm/tensor.hpp"
#include "textnorm/vocab.hpp"

namespace textnorm {

struct ModelConfig {
  size_t d_ce = 128;       // character embedding width
  size_t d = 256;          // hidden width
  size_t d_we = 0;         // word feature width; 0 disables word features
  // float so a checkpoint round trip reproduces the struct exactly
  float dropout_p = 0.1f;   // non-recurrent connections only
  float sampling_p = 0.35f; // scheduled sampling probability

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.d_ce == b.d_ce && a.d == b.d && a.d_we == b.d_we &&
           a.dropout_p == b.dropout_p && a.sampling_p == b.sampling_p;
  }
};

// Word features for one batch: row-major [b, t, dim], zero beyond each
// row's true length. dim == 0 when features are disabled.
struct FeatureBatch {
  size_t b = 0;
  size_t t = 0;
  size_t dim = 0;
  std::vector<float> data;
};

namespace ckpt {

constexpr char kMagic[8] = {'T', 'X', 'N', 'O', 'R', 'M', 'C', '1'};

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& out, float v) {
  uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw DataError("checkpoint truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint8_t>(buf[pos]) |
                 (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

struct Tensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<float> data;
};

struct File {
  ModelConfig cfg;
  std::vector<char32_t> chars;
  std::vector<Tensor> tensors;
};

inline File read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);
  if (r.bytes(8) != std::string(kMagic, 8)) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  File f;
  f.cfg.d_ce = r.u32();
  f.cfg.d = r.u32();
  f.cfg.d_we = r.u32();
  const uint32_t d_voc = r.u32();
  f.cfg.dropout_p = r.f32();
  f.cfg.sampling_p = r.f32();
  const uint32_t n_chars = r.u32();
  if (n_chars + Vocabulary::kReserved != d_voc) {
    throw DataError("checkpoint vocabulary size disagrees with header");
  }
  for (uint32_t i = 0; i < n_chars; ++i) f.chars.push_back(static_cast<char32_t>(r.u32()));
  const uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = r.bytes(r.u16());
    const uint32_t ndim = r.u32();
    size_t numel = 1;
    for (uint32_t k = 0; k < ndim; ++k) {
      t.shape.push_back(r.u32());
      numel *= t.shape.back();
    }
    t.data.resize(numel);
    for (size_t k = 0; k < numel; ++k) t.data[k] = r.f32();
    f.tensors.push_back(std::move(t));
  }
  if (r.pos != buf.size()) throw DataError("trailing bytes in checkpoint: " + path);
  return f;
}

}  // namespace ckpt

// Character-level encoder-decoder with bilinear attention.
//
// Encoder: two GRU layers over character embeddings concatenated with
// word-level features; the first layer is bidirectional with the two
// directions' outputs summed, the second runs left to right. An EOS
// column is appended to every source so attention sees a terminal marker.
//
// Decoder: two GRU layers over character embeddings, initial states from
// a per-layer tanh bridge off the encoder's first output; logits from a
// combined attention output layer.
template <typename Real>
class Model {
 public:
  Model(ModelConfig cfg, Vocabulary vocab, uint64_t seed,
        std::vector<float> whitespace = {})
      : cfg_(cfg), vocab_(std::move(vocab)) {
    if (cfg_.d_ce == 0 || cfg_.d == 0) throw ConfigError("model widths must be positive");
    Rng rng(seed);
    const size_t d = cfg_.d, d_ce = cfg_.d_ce, d_we = cfg_.d_we;
    const size_t d_voc = vocab_.size();
    const double emb_bound = std::sqrt(3.0);  // uniform, mean 0, variance 1
    params_.add_uniform("embed.char", {d_voc, d_ce}, rng, -emb_bound, emb_bound);
    enc1f_ = register_gru(params_, "enc.l1f", d_ce + d_we, d, rng);
    enc1b_ = register_gru(params_, "enc.l1b", d_ce + d_we, d, rng);
    enc2_ = register_gru(params_, "enc.l2", d, d, rng);
    dec1_ = register_gru(params_, "dec.l1", d_ce, d, rng);
    dec2_ = register_gru(params_, "dec.l2", d, d, rng);
    const double bb = xavier_bound(d, d);
    params_.add_uniform("bridge.l1.w", {d, d}, rng, -bb, bb);
    params_.add_zeros("bridge.l1.b", {d});
    params_.add_uniform("bridge.l2.w", {d, d}, rng, -bb, bb);
    params_.add_zeros("bridge.l2.b", {d});
    params_.add_uniform("attn.w_a", {d, d}, rng, -bb, bb);
    const double bc = xavier_bound(2 * d, d);
    params_.add_uniform("attn.w_c", {2 * d, d}, rng, -bc, bc);
    const double bo = xavier_bound(d, d_voc);
    params_.add_uniform("out.w", {d, d_voc}, rng, -bo, bo);
    params_.add_zeros("out.b", {d_voc});
    if (d_we > 0) {
      if (whitespace.size() != d_we) {
        throw DimensionError("whitespace vector must have width d_we");
      }
      std::vector<Real> w(d_we);
      for (size_t i = 0; i < d_we; ++i) w[i] = static_cast<Real>(whitespace[i]);
      params_.add("feat.w_", {d_we}, std::move(w), /*trainable=*/false);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore<Real>& params() { return params_; }
  const ParamStore<Real>& params() const { return params_; }
  size_t param_count() const { return params_.total_params(); }

  std::vector<float> whitespace_vec() const {
    std::vector<float> out;
    if (cfg_.d_we == 0) return out;
    const auto& e = params_.at("feat.w_");
    out.reserve(e.value.size());
    for (Real v : e.value) out.push_back(static_cast<float>(v));
    return out;
  }

  // ---- training forward ----

  // Mean cross entropy per non-PAD target position, including the EOS
  // prediction of every row. sampling_override >= 0 replaces the
  // configured scheduled-sampling probability.
  TensorRef forward_train(Tape<Real>& tape, const Batch& batch,
                          const FeatureBatch& feats, Rng& rng,
                          bool training = true,
                          double sampling_override = -1.0) const {
    check_features(batch, feats);
    const size_t b = batch.b;
    const size_t V = vocab_.size();
    size_t total_count = 0;
    for (size_t i = 0; i < b; ++i) {
      for (size_t t = 1; t < batch.t_tgt; ++t) {
        if (batch.tgt_at(i, t) != Vocabulary::kPad) ++total_count;
      }
    }
    if (total_count == 0) throw DataError("batch has no non-PAD targets");

    Leased lp = lease(tape);
    EncTape enc = encode_on_tape(tape, lp, batch, feats, rng, training);

    TensorRef s1 = bridge(tape, lp.bridge1_w, lp.bridge1_b, enc.first);
    TensorRef s2 = bridge(tape, lp.bridge2_w, lp.bridge2_b, enc.first);

    const double sampling =
        sampling_override >= 0.0 ? sampling_override : cfg_.sampling_p;
    std::vector<int> prev(b, Vocabulary::kSos);
    TensorRef total{};
    for (size_t t = 1; t < batch.t_tgt; ++t) {
      TensorRef x = tape.dropout(tape.lookup_rows(lp.embed, prev),
                                 static_cast<Real>(cfg_.dropout_p), rng, training);
      s1 = gru_step(tape, lp.dec1, x, s1);
      TensorRef x2 = tape.dropout(s1, static_cast<Real>(cfg_.dropout_p), rng, training);
      s2 = gru_step(tape, lp.dec2, x2, s2);
      AttentionResult attn =
          attention_step(tape, s2, enc.stacked, enc.lengths, lp.attn_w_a, lp.attn_w_c);
      TensorRef pre = tape.dropout(attn.attn_out, static_cast<Real>(cfg_.dropout_p),
                                   rng, training);
      TensorRef logits = tape.add_rowwise(tape.matmul(pre, lp.out_w), lp.out_b);

      std::vector<int> targets(b);
      std::vector<uint8_t> mask(b);
      for (size_t i = 0; i < b; ++i) {
        targets[i] = batch.tgt_at(i, t);
        mask[i] = targets[i] != Vocabulary::kPad;
      }
      TensorRef step_loss =
          tape.cross_entropy_rows(logits, targets, mask, Reduction::sum);
      total = total.valid() ? tape.add(total, step_loss) : step_loss;

      if (t + 1 < batch.t_tgt) {
        const bool sample_here = training && sampling > 0.0;
        std::span<const Real> lv = tape.value(logits);
        for (size_t i = 0; i < b; ++i) {
          if (sample_here && rng.bernoulli(sampling)) {
            const Real* row = lv.data() + i * V;
            size_t best = 0;
            for (size_t v = 1; v < V; ++v) {
              if (row[v] > row[best]) best = v;
            }
            prev[i] = static_cast<int>(best);
          } else {
            prev[i] = batch.tgt_at(i, t);
          }
        }
      }
    }
    return tape.scale(total, Real(1) / static_cast<Real>(total_count));
  }

  // ---- inference ----

  struct EncodeResult {
    size_t T = 0;  // source characters + appended EOS
    size_t d = 0;
    std::vector<Real> h;      // [T, d] top-layer outputs
    std::vector<Real> first;  // [d] top-layer output at step 0
  };

  struct DecoderState {
    std::vector<Real> h1, h2;
  };

  struct StepOutput {
    std::vector<Real> logits;  // [d_voc]
    DecoderState state;
    std::vector<Real> attn;  // [T]
  };

  EncodeResult encode(const std::vector<int>& ids,
                      const WordFeatureProvider::Features& feats) const {
    if (ids.empty()) throw EmptySourceError("encode: empty source");
    Batch batch;
    batch.b = 1;
    batch.t_src = ids.size();
    batch.t_tgt = 3;  // placeholder, unused
    batch.src = ids;
    batch.src_len = {ids.size()};
    FeatureBatch fb;
    fb.b = 1;
    fb.t = ids.size();
    fb.dim = feats.dim;
    fb.data = feats.data;
    if (cfg_.d_we > 0 && feats.length != ids.size()) {
      throw DimensionError("feature sequence length must match character count");
    }
    check_features(batch, fb);

    Tape<Real> tape;
    Rng rng(0);  // unused: inference applies no dropout
    Leased lp = lease(tape);
    EncTape enc = encode_on_tape(tape, lp, batch, fb, rng, /*training=*/false);
    EncodeResult out;
    out.T = ids.size() + 1;
    out.d = cfg_.d;
    std::span<const Real> sv = tape.value(enc.stacked);
    out.h.assign(sv.begin(), sv.end());
    std::span<const Real> fv = tape.value(enc.first);
    out.first.assign(fv.begin(), fv.end());
    return out;
  }

  DecoderState initial_state(const EncodeResult& enc) const {
    Tape<Real> tape;
    TensorRef first = tape.leaf_ref({1, cfg_.d}, enc.first.data());
    TensorRef s1 = bridge(tape, tape.param(params_, "bridge.l1.w"),
                          tape.param(params_, "bridge.l1.b"), first);
    TensorRef s2 = bridge(tape, tape.param(params_, "bridge.l2.w"),
                          tape.param(params_, "bridge.l2.b"), first);
    DecoderState st;
    std::span<const Real> v1 = tape.value(s1);
    std::span<const Real> v2 = tape.value(s2);
    st.h1.assign(v1.begin(), v1.end());
    st.h2.assign(v2.begin(), v2.end());
    return st;
  }

  // One greedy-free decoder step; pure in the model and its inputs.
  StepOutput decode_step(int prev_id, const DecoderState& state,
                         const EncodeResult& enc) const {
    if (enc.T == 0) throw EmptySourceError("decode_step: empty encoder output");
    if (state.h1.size() != cfg_.d || state.h2.size() != cfg_.d) {
      throw DimensionError("decoder state width mismatch");
    }
    Tape<Real> tape;
    GruRefs dec1 = lease_gru(tape, params_, dec1_);
    GruRefs dec2 = lease_gru(tape, params_, dec2_);
    TensorRef embed = tape.param(params_, "embed.char");
    TensorRef w_a = tape.param(params_, "attn.w_a");
    TensorRef w_c = tape.param(params_, "attn.w_c");
    TensorRef out_w = tape.param(params_, "out.w");
    TensorRef out_b = tape.param(params_, "out.b");

    TensorRef h1 = tape.leaf_ref({1, cfg_.d}, state.h1.data());
    TensorRef h2 = tape.leaf_ref({1, cfg_.d}, state.h2.data());
    TensorRef enc3 = tape.leaf_ref({1, enc.T, cfg_.d}, enc.h.data());

    TensorRef x = tape.lookup_rows(embed, {prev_id});
    TensorRef n1 = gru_step(tape, dec1, x, h1);
    TensorRef n2 = gru_step(tape, dec2, n1, h2);
    AttentionResult attn = attention_step(tape, n2, enc3,
                                          std::vector<size_t>{enc.T}, w_a, w_c);
    TensorRef logits = tape.add_rowwise(tape.matmul(attn.attn_out, out_w), out_b);

    StepOutput out;
    auto copy_of = [&](TensorRef r) {
      std::span<const Real> v = tape.value(r);
      return std::vector<Real>(v.begin(), v.end());
    };
    out.logits = copy_of(logits);
    out.state.h1 = copy_of(n1);
    out.state.h2 = copy_of(n2);
    out.attn = copy_of(attn.weights);
    return out;
  }

  // ---- checkpoints ----

  void save_checkpoint(const std::string& path) const {
    std::string out;
    out.append(ckpt::kMagic, 8);
    ckpt::put_u32(out, static_cast<uint32_t>(cfg_.d_ce));
    ckpt::put_u32(out, static_cast<uint32_t>(cfg_.d));
    ckpt::put_u32(out, static_cast<uint32_t>(cfg_.d_we));
    ckpt::put_u32(out, static_cast<uint32_t>(vocab_.size()));
    ckpt::put_f32(out, static_cast<float>(cfg_.dropout_p));
    ckpt::put_f32(out, static_cast<float>(cfg_.sampling_p));
    ckpt::put_u32(out, static_cast<uint32_t>(vocab_.chars().size()));
    for (char32_t cp : vocab_.chars()) ckpt::put_u32(out, static_cast<uint32_t>(cp));
    const auto& entries = params_.entries();
    ckpt::put_u32(out, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
      ckpt::put_u16(out, static_cast<uint16_t>(e.name.size()));
      out += e.name;
      ckpt::put_u32(out, static_cast<uint32_t>(e.shape.size()));
      for (size_t d : e.shape) ckpt::put_u32(out, static_cast<uint32_t>(d));
      for (Real v : e.value) ckpt::put_f32(out, static_cast<float>(v));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<long>(out.size()));
    if (!f) throw DataError("failed writing checkpoint: " + path);
  }

  // Overwrites this model's parameters from a checkpoint. The file must
  // describe exactly this configuration and vocabulary.
  void restore_checkpoint(const std::string& path) {
    ckpt::File f = ckpt::read_file(path);
    if (!(f.cfg == cfg_)) throw DataError("checkpoint configuration mismatch");
    if (f.chars != vocab_.chars()) throw DataError("checkpoint vocabulary mismatch");
    auto& entries = params_.entries();
    if (f.tensors.size() != entries.size()) {
      throw DataError("checkpoint tensor count mismatch");
    }
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& t = f.tensors[i];
      auto& e = entries[i];
      if (t.name != e.name) throw DataError("checkpoint tensor name mismatch: " + t.name);
      if (t.shape != e.shape) throw DataError("checkpoint tensor shape mismatch: " + t.name);
      for (size_t k = 0; k < t.data.size(); ++k) e.value[k] = static_cast<Real>(t.data[k]);
    }
  }

  static Model load_checkpoint(const std::string& path) {
    ckpt::File f = ckpt::read_file(path);
    Model m(f.cfg, Vocabulary(f.chars), /*seed=*/0,
            std::vector<float>(f.cfg.d_we, 0.0f));
    m.restore_checkpoint(path);
    return m;
  }

 private:
  struct Leased {
    TensorRef embed;
    GruRefs enc1f, enc1b, enc2, dec1, dec2;
    TensorRef bridge1_w, bridge1_b, bridge2_w, bridge2_b;
    TensorRef attn_w_a, attn_w_c, out_w, out_b;
    TensorRef w_space;  // valid only when d_we > 0
  };

  struct EncTape {
    TensorRef stacked;  // [b, T, d]
    TensorRef first;    // [b, d]
    std::vector<size_t> lengths;  // per row, incl. the EOS column
  };

  Leased lease(Tape<Real>& tape) const {
    Leased l;
    l.embed = tape.param(params_, "embed.char");
    l.enc1f = lease_gru(tape, params_, enc1f_);
    l.enc1b = lease_gru(tape, params_, enc1b_);
    l.enc2 = lease_gru(tape, params_, enc2_);
    l.dec1 = lease_gru(tape, params_, dec1_);
    l.dec2 = lease_gru(tape, params_, dec2_);
    l.bridge1_w = tape.param(params_, "bridge.l1.w");
    l.bridge1_b = tape.param(params_, "bridge.l1.b");
    l.bridge2_w = tape.param(params_, "bridge.l2.w");
    l.bridge2_b = tape.param(params_, "bridge.l2.b");
    l.attn_w_a = tape.param(params_, "attn.w_a");
    l.attn_w_c = tape.param(params_, "attn.w_c");
    l.out_w = tape.param(params_, "out.w");
    l.out_b = tape.param(params_, "out.b");
    if (cfg_.d_we > 0) l.w_space = tape.param(params_, "feat.w_");
    return l;
  }

  void check_features(const Batch& batch, const FeatureBatch& feats) const {
    if (cfg_.d_we == 0) {
      if (feats.dim != 0) throw DimensionError("model takes no word features");
      return;
    }
    if (feats.dim != cfg_.d_we) {
      throw DimensionError("feature width does not match d_we");
    }
    if (feats.b != batch.b || feats.t < batch.t_src) {
      throw DimensionError("feature batch geometry mismatch");
    }
  }

  static TensorRef bridge(Tape<Real>& tape, TensorRef w, TensorRef b, TensorRef h) {
    return tape.tanh(tape.add_rowwise(tape.matmul(h, w), b));
  }

  EncTape encode_on_tape(Tape<Real>& tape, const Leased& lp, const Batch& batch,
                         const FeatureBatch& feats, Rng& rng, bool training) const {
    const size_t b = batch.b;
    const size_t T = batch.t_src + 1;  // appended EOS column
    const size_t d = cfg_.d, d_we = cfg_.d_we;
    for (size_t i = 0; i < b; ++i) {
      if (batch.src_len[i] == 0) throw EmptySourceError("encode: empty source row");
    }

    std::vector<size_t> lengths(b);
    for (size_t i = 0; i < b; ++i) lengths[i] = batch.src_len[i] + 1;

    // Per-step inputs: character embedding next to word features.
    std::vector<TensorRef> xs(T);
    std::span<const Real> wsp;
    if (d_we > 0) wsp = tape.value(lp.w_space);
    for (size_t t = 0; t < T; ++t) {
      std::vector<int> ids(b, Vocabulary::kPad);
      for (size_t i = 0; i < b; ++i) {
        if (t < batch.src_len[i]) {
          ids[i] = batch.src_at(i, t);
        } else if (t == batch.src_len[i]) {
          ids[i] = Vocabulary::kEos;
        }
      }
      TensorRef emb = tape.lookup_rows(lp.embed, ids);
      if (d_we > 0) {
        std::vector<Real> fv(b * d_we, Real(0));
        for (size_t i = 0; i < b; ++i) {
          if (t < batch.src_len[i]) {
            const float* src = feats.data.data() + (i * feats.t + t) * d_we;
            for (size_t k = 0; k < d_we; ++k) fv[i * d_we + k] = static_cast<Real>(src[k]);
          } else if (t == batch.src_len[i]) {
            for (size_t k = 0; k < d_we; ++k) fv[i * d_we + k] = wsp[k];
          }
        }
        emb = tape.concat_cols(emb, tape.leaf({b, d_we}, std::move(fv)));
      }
      xs[t] = tape.dropout(emb, static_cast<Real>(cfg_.dropout_p), rng, training);
    }

    std::vector<uint8_t> valid(b);
    auto valid_at = [&](size_t t) {
      for (size_t i = 0; i < b; ++i) valid[i] = t < lengths[i];
      return valid;
    };

    // Layer 1, both directions, outputs summed. Rows keep their previous
    // state through PAD steps so short rows are unaffected by padding.
    std::vector<TensorRef> fwd(T), bwd(T);
    TensorRef h = tape.leaf({b, d}, std::vector<Real>(b * d, Real(0)));
    for (size_t t = 0; t < T; ++t) {
      h = tape.where_rows(valid_at(t), gru_step(tape, lp.enc1f, xs[t], h), h);
      fwd[t] = h;
    }
    h = tape.leaf({b, d}, std::vector<Real>(b * d, Real(0)));
    for (size_t t = T; t-- > 0;) {
      h = tape.where_rows(valid_at(t), gru_step(tape, lp.enc1b, xs[t], h), h);
      bwd[t] = h;
    }

    // Layer 2, left to right over the summed layer-1 outputs.
    std::vector<TensorRef> top(T);
    h = tape.leaf({b, d}, std::vector<Real>(b * d, Real(0)));
    for (size_t t = 0; t < T; ++t) {
      TensorRef x2 = tape.dropout(tape.add(fwd[t], bwd[t]),
                                  static_cast<Real>(cfg_.dropout_p), rng, training);
      h = tape.where_rows(valid_at(t), gru_step(tape, lp.enc2, x2, h), h);
      top[t] = h;
    }

    EncTape out;
    out.stacked = tape.stack_steps(top);
    out.first = top[0];
    out.lengths = std::move(lengths);
    return out;
  }

  ModelConfig cfg_;
  Vocabulary vocab_;
  mutable ParamStore<Real> params_;
  GruLayerNames enc1f_, enc1b_, enc2_, dec1_, dec2_;
};

// Builds the padded feature block for a batch.
inline FeatureBatch make_feature_batch(const WordFeatureProvider& provider,
                                       const Batch& batch) {
  FeatureBatch fb;
  fb.b = batch.b;
  fb.t = batch.t_src;
  fb.dim = provider.dim();
  if (fb.dim == 0) return fb;
  fb.data.assign(fb.b * fb.t * fb.dim, 0.0f);
  for (size_t i = 0; i < batch.b; ++i) {
    const auto f = provider.feature_sequence(batch.src_text[i]);
    if (f.length != batch.src_len[i]) {
      throw DimensionError("feature sequence length mismatch");
    }
    std::copy(f.data.begin(), f.data.end(),
              fb.data.begin() + static_cast<long>(i * fb.t * fb.dim));
  }
  return fb;
}

}  // namespace textnorm
