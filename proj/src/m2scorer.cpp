#include "textnorm/m2scorer.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "textnorm/errors.hpp"

namespace textnorm {

namespace {

using GoldKey = std::tuple<size_t, size_t, std::string>;

std::string normalize_replacement(const std::string& r) {
  return join_tokens(split_tokens(r));
}

std::set<GoldKey> gold_key_set(const std::vector<Edit>& gold) {
  std::set<GoldKey> keys;
  for (const Edit& e : gold) {
    keys.emplace(e.start, e.end, normalize_replacement(e.replacement));
  }
  return keys;
}

std::string join_range(const std::vector<std::string>& toks, size_t a, size_t b) {
  std::string out;
  for (size_t k = a; k < b; ++k) {
    if (k > a) out += ' ';
    out += toks[k];
  }
  return out;
}

// (overlap with gold, edit count); higher overlap wins, then fewer edits.
struct Val {
  long tp = -1;  // negative marks unreachable
  long edits = 0;
  bool reachable() const { return tp >= 0; }
};

bool better(const Val& a, const Val& b) {
  if (!a.reachable()) return false;
  if (!b.reachable()) return true;
  if (a.tp != b.tp) return a.tp > b.tp;
  return a.edits < b.edits;
}

// One grouped run of non-match moves: consumes src [i..i2) and hyp [j..j2).
struct BlockEnd {
  size_t i2, j2;
  std::string repl;
};

// All nodes reachable from (i, j) through flagged non-match moves while
// consuming at most `window` source tokens, in scan order.
std::vector<BlockEnd> blocks_from(const AlignLattice& lat,
                                  const std::vector<std::string>& hyp,
                                  size_t i, size_t j, size_t window,
                                  std::vector<uint32_t>& stamp, uint32_t gen) {
  const size_t cols = lat.m + 1;
  std::vector<BlockEnd> out;
  std::vector<std::pair<size_t, size_t>> queue{{i, j}};
  stamp[i * cols + j] = gen;
  size_t head = 0;
  while (head < queue.size()) {
    auto [a, b] = queue[head++];
    const uint8_t e = lat.at(a, b);
    auto visit = [&](size_t a2, size_t b2) {
      if (a2 - i > window) return;
      if (stamp[a2 * cols + b2] == gen) return;
      stamp[a2 * cols + b2] = gen;
      queue.emplace_back(a2, b2);
      out.push_back({a2, b2, join_range(hyp, j, b2)});
    };
    if (e & AlignLattice::kSub) visit(a + 1, b + 1);
    if (e & AlignLattice::kDel) visit(a + 1, b);
    if (e & AlignLattice::kIns) visit(a, b + 1);
  }
  return out;
}

}  // namespace

AlignLattice align(const std::vector<std::string>& src,
                   const std::vector<std::string>& hyp) {
  const size_t n = src.size(), m = hyp.size();
  const size_t cols = m + 1;
  const size_t inf = std::numeric_limits<size_t>::max() / 2;
  std::vector<size_t> D((n + 1) * cols, inf), E((n + 1) * cols, inf);
  D[0] = 0;
  for (size_t i = 0; i <= n; ++i) {
    for (size_t j = 0; j <= m; ++j) {
      const size_t d = D[i * cols + j];
      if (d == inf) continue;
      if (i < n && j < m) {
        const size_t c = src[i] == hyp[j] ? 0 : 1;
        D[(i + 1) * cols + j + 1] = std::min(D[(i + 1) * cols + j + 1], d + c);
      }
      if (i < n) D[(i + 1) * cols + j] = std::min(D[(i + 1) * cols + j], d + 1);
      if (j < m) D[i * cols + j + 1] = std::min(D[i * cols + j + 1], d + 1);
    }
  }
  E[n * cols + m] = 0;
  for (size_t i = n + 1; i-- > 0;) {
    for (size_t j = m + 1; j-- > 0;) {
      size_t best = i == n && j == m ? 0 : inf;
      if (i < n && j < m) {
        const size_t c = src[i] == hyp[j] ? 0 : 1;
        best = std::min(best, E[(i + 1) * cols + j + 1] + c);
      }
      if (i < n) best = std::min(best, E[(i + 1) * cols + j] + 1);
      if (j < m) best = std::min(best, E[i * cols + j + 1] + 1);
      E[i * cols + j] = best;
    }
  }

  AlignLattice lat;
  lat.n = n;
  lat.m = m;
  lat.min_cost = D[n * cols + m];
  lat.edges.assign((n + 1) * cols, 0);
  for (size_t i = 0; i <= n; ++i) {
    for (size_t j = 0; j <= m; ++j) {
      uint8_t e = 0;
      if (i < n && j < m) {
        const size_t c = src[i] == hyp[j] ? 0 : 1;
        if (D[i * cols + j] + c + E[(i + 1) * cols + j + 1] == lat.min_cost) {
          e |= c == 0 ? AlignLattice::kMatch : AlignLattice::kSub;
        }
      }
      if (i < n && D[i * cols + j] + 1 + E[(i + 1) * cols + j] == lat.min_cost) {
        e |= AlignLattice::kDel;
      }
      if (j < m && D[i * cols + j] + 1 + E[i * cols + j + 1] == lat.min_cost) {
        e |= AlignLattice::kIns;
      }
      lat.edges[i * cols + j] = e;
    }
  }
  return lat;
}

std::vector<Edit> maxmatch_select(const AlignLattice& lat,
                                  const std::vector<std::string>& hyp,
                                  const std::vector<Edit>& gold,
                                  size_t merge_window) {
  const size_t n = lat.n, m = lat.m;
  const size_t cols = m + 1;
  const std::set<GoldKey> keys = gold_key_set(gold);
  std::vector<uint32_t> stamp((n + 1) * cols, 0);
  uint32_t gen = 0;

  // Best (overlap, -edits) from each node to the end, over every walk of
  // the minimal lattice; any flagged edge stays on a minimal-cost path.
  std::vector<Val> val((n + 1) * cols);
  val[n * cols + m] = Val{0, 0};
  for (size_t i = n + 1; i-- > 0;) {
    for (size_t j = cols; j-- > 0;) {
      if (i == n && j == m) continue;
      Val best;
      if (lat.at(i, j) & AlignLattice::kMatch) {
        best = val[(i + 1) * cols + j + 1];
      }
      for (const BlockEnd& blk : blocks_from(lat, hyp, i, j, merge_window, stamp, ++gen)) {
        const Val& v = val[blk.i2 * cols + blk.j2];
        if (!v.reachable()) continue;
        Val cand{v.tp + static_cast<long>(keys.count({i, blk.i2, blk.repl})),
                 v.edits + 1};
        if (better(cand, best)) best = cand;
      }
      val[i * cols + j] = best;
    }
  }

  // Walk forward taking edits as early as possible among optimal walks,
  // preferring smaller spans, then smaller replacements.
  std::vector<Edit> out;
  size_t i = 0, j = 0;
  while (i != n || j != m) {
    const Val cur = val[i * cols + j];
    if (!cur.reachable()) throw DataError("alignment lattice has no path");
    std::vector<BlockEnd> blocks =
        blocks_from(lat, hyp, i, j, merge_window, stamp, ++gen);
    std::sort(blocks.begin(), blocks.end(), [](const BlockEnd& a, const BlockEnd& b) {
      return std::tie(a.i2, a.repl, a.j2) < std::tie(b.i2, b.repl, b.j2);
    });
    bool took = false;
    for (const BlockEnd& blk : blocks) {
      const Val& v = val[blk.i2 * cols + blk.j2];
      if (!v.reachable()) continue;
      const long tp = v.tp + static_cast<long>(keys.count({i, blk.i2, blk.repl}));
      if (tp == cur.tp && v.edits + 1 == cur.edits) {
        out.push_back(Edit{i, blk.i2, blk.repl, 0});
        i = blk.i2;
        j = blk.j2;
        took = true;
        break;
      }
    }
    if (!took) {
      // The match move must carry the optimum here.
      ++i;
      ++j;
    }
  }
  return out;
}

ScoreReport score_sentence(const std::vector<std::string>& src,
                           const std::vector<std::string>& hyp,
                           const std::vector<Edit>& gold, size_t merge_window) {
  const AlignLattice lat = align(src, hyp);
  const std::vector<Edit> sys = maxmatch_select(lat, hyp, gold, merge_window);
  const std::set<GoldKey> keys = gold_key_set(gold);
  ScoreReport r;
  for (const Edit& e : sys) {
    if (keys.count({e.start, e.end, e.replacement})) {
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  r.fn = keys.size() - r.tp;
  return r;
}

ScoreReport score_corpus(const std::vector<AnnotatedSentence>& gold,
                         const std::vector<std::string>& hyp_lines,
                         int annotator, size_t merge_window) {
  if (gold.size() != hyp_lines.size()) {
    throw UsageError("hypothesis line count does not match reference sentences");
  }
  ScoreReport total;
  for (size_t k = 0; k < gold.size(); ++k) {
    const ScoreReport r = score_sentence(gold[k].tokens, split_tokens(hyp_lines[k]),
                                         edits_of(gold[k], annotator), merge_window);
    total.tp += r.tp;
    total.fp += r.fp;
    total.fn += r.fn;
  }
  return total;
}

std::string format_report(const ScoreReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "TP: %zu  FP: %zu  FN: %zu\n"
                "Precision: %.4f / Recall: %.4f / F_1: %.4f\n",
                r.tp, r.fp, r.fn, r.precision(), r.recall(), r.f1());
  return buf;
}

namespace {

struct Move {
  uint8_t kind;  // AlignLattice edge flag
  size_t i, j;   // node the move leaves
};

// Best (overlap, parts) over all groupings of one non-match run.
std::pair<long, long> best_run_grouping(const std::vector<Move>& run,
                                        const std::vector<std::string>& hyp,
                                        const std::set<GoldKey>& keys,
                                        size_t window) {
  const size_t L = run.size();
  std::pair<long, long> best{-1, 0};
  const uint64_t masks = 1ull << (L - 1);
  for (uint64_t mask = 0; mask < masks; ++mask) {
    long tp = 0, parts = 0;
    size_t a = 0;
    bool ok = true;
    while (a < L && ok) {
      size_t b = a;
      while (b + 1 < L && !(mask & (1ull << b))) ++b;
      // Part covers moves [a..b]; spans src [i_a, i_end) and hyp [j_a, j_end).
      const Move& first = run[a];
      const Move& last = run[b];
      const size_t i_end = last.i + ((last.kind & AlignLattice::kIns) ? 0 : 1);
      const size_t j_end = last.j + ((last.kind & AlignLattice::kDel) ? 0 : 1);
      if (i_end - first.i > window) {
        ok = false;
        break;
      }
      ++parts;
      tp += static_cast<long>(keys.count({first.i, i_end, join_range(hyp, first.j, j_end)}));
      a = b + 1;
    }
    if (!ok) continue;
    if (tp > best.first || (tp == best.first && parts < best.second) || best.first < 0) {
      best = {tp, parts};
    }
  }
  if (best.first < 0) throw DataError("run admits no grouping under the window");
  return best;
}

void brute_paths(const AlignLattice& lat, size_t i, size_t j,
                 std::vector<Move>& path, const std::vector<std::string>& hyp,
                 const std::set<GoldKey>& keys, size_t window,
                 std::pair<long, long>& best) {
  if (i == lat.n && j == lat.m) {
    long tp = 0, edits = 0;
    size_t a = 0;
    while (a < path.size()) {
      if (path[a].kind & AlignLattice::kMatch) {
        ++a;
        continue;
      }
      size_t b = a;
      while (b + 1 < path.size() && !(path[b + 1].kind & AlignLattice::kMatch)) ++b;
      std::vector<Move> run(path.begin() + static_cast<long>(a),
                            path.begin() + static_cast<long>(b + 1));
      const auto [rtp, rparts] = best_run_grouping(run, hyp, keys, window);
      tp += rtp;
      edits += rparts;
      a = b + 1;
    }
    if (tp > best.first || (tp == best.first && edits < best.second) || best.first < 0) {
      best = {tp, edits};
    }
    return;
  }
  const uint8_t e = lat.at(i, j);
  auto step = [&](uint8_t kind, size_t i2, size_t j2) {
    path.push_back({kind, i, j});
    brute_paths(lat, i2, j2, path, hyp, keys, window, best);
    path.pop_back();
  };
  if (e & AlignLattice::kMatch) step(AlignLattice::kMatch, i + 1, j + 1);
  if (e & AlignLattice::kSub) step(AlignLattice::kSub, i + 1, j + 1);
  if (e & AlignLattice::kDel) step(AlignLattice::kDel, i + 1, j);
  if (e & AlignLattice::kIns) step(AlignLattice::kIns, i, j + 1);
}

}  // namespace

std::pair<size_t, size_t> brute_force_best(const std::vector<std::string>& src,
                                           const std::vector<std::string>& hyp,
                                           const std::vector<Edit>& gold,
                                           size_t merge_window) {
  const AlignLattice lat = align(src, hyp);
  const std::set<GoldKey> keys = gold_key_set(gold);
  std::pair<long, long> best{-1, 0};
  std::vector<Move> path;
  brute_paths(lat, 0, 0, path, hyp, keys, merge_window, best);
  if (best.first < 0) throw DataError("no alignment path found");
  return {static_cast<size_t>(best.first), static_cast<size_t>(best.second)};
}

}  // namespace textnorm
