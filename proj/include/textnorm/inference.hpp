#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "textnorm/model.hpp"

namespace textnorm {

struct BeamConfig {
  size_t width = 5;
  size_t max_len = 0;  // 0: floor(1.5 * source length) + 10
  bool length_normalize = false;
};

struct BeamResult {
  std::vector<int> ids;  // emitted characters, EOS stripped
  double loglik = 0.0;   // joint log-likelihood incl. EOS when emitted
  bool ended_by_eos = false;
};

namespace detail {

template <typename Real>
std::vector<double> log_softmax(const std::vector<Real>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Real v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (Real v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

}  // namespace detail

// Beam search over decoder steps. Finished hypotheses keep competing at
// their frozen score; ties break by higher score, then discovery order.
template <typename Real>
BeamResult beam_search(const Model<Real>& model,
                       const typename Model<Real>::EncodeResult& enc,
                       const BeamConfig& cfg = {}) {
  if (cfg.width == 0) throw ConfigError("beam width must be positive");
  if (enc.T == 0) throw EmptySourceError("beam_search: empty encoder output");
  const size_t src_chars = enc.T - 1;
  const size_t max_len = cfg.max_len > 0 ? cfg.max_len : (3 * src_chars) / 2 + 10;
  const size_t V = model.vocab().size();

  struct Hyp {
    std::vector<int> ids;
    double ll = 0.0;
    typename Model<Real>::DecoderState state;
    bool finished = false;
  };

  std::vector<Hyp> beams(1);
  beams[0].state = model.initial_state(enc);

  for (size_t step = 0; step < max_len; ++step) {
    bool all_done = true;
    for (const Hyp& h : beams) all_done = all_done && h.finished;
    if (all_done) break;

    // Candidates in deterministic order: beams in rank order, then token id.
    struct Cand {
      double ll;
      size_t order;  // enumeration index, settles exact ties
      size_t beam;
      int token;  // -1 carries a finished hypothesis
    };
    std::vector<Cand> cands;
    std::vector<typename Model<Real>::StepOutput> stepped(beams.size());
    size_t order = 0;
    for (size_t bi = 0; bi < beams.size(); ++bi) {
      Hyp& h = beams[bi];
      if (h.finished) {
        cands.push_back({h.ll, order++, bi, -1});
        continue;
      }
      const int prev = h.ids.empty() ? Vocabulary::kSos : h.ids.back();
      stepped[bi] = model.decode_step(prev, h.state, enc);
      const std::vector<double> lp = detail::log_softmax(stepped[bi].logits);
      for (size_t v = 0; v < V; ++v) {
        cands.push_back({h.ll + lp[v], order++, bi, static_cast<int>(v)});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.ll != b.ll) return a.ll > b.ll;
      return a.order < b.order;
    });

    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      if (next.size() == cfg.width) break;
      const Hyp& parent = beams[c.beam];
      if (c.token < 0) {
        next.push_back(parent);
        continue;
      }
      Hyp h;
      h.ids = parent.ids;
      h.ll = c.ll;
      if (c.token == Vocabulary::kEos) {
        h.finished = true;
      } else {
        h.ids.push_back(c.token);
        h.state = stepped[c.beam].state;
      }
      next.push_back(std::move(h));
    }
    beams = std::move(next);
  }

  // Highest-scoring hypothesis; unfinished ones were cut off at max_len.
  size_t best = 0;
  auto score_of = [&](const Hyp& h) {
    if (!cfg.length_normalize) return h.ll;
    const size_t steps = h.ids.size() + (h.finished ? 1 : 0);
    return h.ll / static_cast<double>(std::max<size_t>(steps, 1));
  };
  for (size_t i = 1; i < beams.size(); ++i) {
    if (score_of(beams[i]) > score_of(beams[best])) best = i;
  }
  BeamResult out;
  out.ids = beams[best].ids;
  out.loglik = beams[best].ll;
  out.ended_by_eos = beams[best].finished;
  return out;
}

// Joint log-likelihood of a fixed output sequence under the model,
// accumulated step by step exactly as beam_search would.
template <typename Real>
double rescore(const Model<Real>& model,
               const typename Model<Real>::EncodeResult& enc,
               const std::vector<int>& ids, bool ended_by_eos = true) {
  typename Model<Real>::DecoderState state = model.initial_state(enc);
  double ll = 0.0;
  int prev = Vocabulary::kSos;
  std::vector<int> seq = ids;
  if (ended_by_eos) seq.push_back(Vocabulary::kEos);
  for (int tok : seq) {
    auto step = model.decode_step(prev, state, enc);
    ll += detail::log_softmax(step.logits)[static_cast<size_t>(tok)];
    if (tok != Vocabulary::kEos) {
      state = std::move(step.state);
      prev = tok;
    }
  }
  return ll;
}

// Truncates every maximal run of max_reps + 1 or more consecutive copies
// of a substring to exactly max_reps copies, shortest unit first, left to
// right, repeated until no run remains. Operates on codepoints.
std::string clamp_repetitions(const std::string& text, size_t max_reps = 5);

// Full correction path: encode, beam decode, strip markers, clamp runs.
template <typename Real>
std::string correct_sentence(const Model<Real>& model,
                             const WordFeatureProvider& provider,
                             const std::string& line, const BeamConfig& cfg = {}) {
  if (provider.dim() != model.config().d_we) {
    throw DimensionError("feature provider width does not match the model");
  }
  const std::vector<int> ids = model.vocab().encode(line);
  if (ids.empty()) throw EmptySourceError("correct_sentence: empty input");
  const auto feats = provider.feature_sequence(line);
  const auto enc = model.encode(ids, feats);
  const BeamResult res = beam_search(model, enc, cfg);
  return clamp_repetitions(model.vocab().decode(res.ids));
}

}  // namespace textnorm
