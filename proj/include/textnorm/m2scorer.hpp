#pragma once

#include <string>
#include <vector>

#include "textnorm/m2.hpp"

namespace textnorm {

// Token-level Levenshtein lattice between a source and a hypothesis.
// Nodes are (i, j) with i source tokens and j hypothesis tokens consumed;
// `edges` flags the moves out of each node that lie on some minimal-cost
// path: match and substitution advance both, deletion advances i,
// insertion advances j. Matches cost 0, everything else costs 1.
struct AlignLattice {
  size_t n = 0;  // source tokens
  size_t m = 0;  // hypothesis tokens
  size_t min_cost = 0;
  std::vector<uint8_t> edges;  // (n+1) x (m+1)

  static constexpr uint8_t kMatch = 1;
  static constexpr uint8_t kSub = 2;
  static constexpr uint8_t kDel = 4;
  static constexpr uint8_t kIns = 8;

  uint8_t at(size_t i, size_t j) const { return edges[i * (m + 1) + j]; }
};

AlignLattice align(const std::vector<std::string>& src,
                   const std::vector<std::string>& hyp);

// Extracts the hypothesis's edit set against the gold edits: walks the
// minimal-cost lattice grouping non-match moves into blocks that span at
// most merge_window source tokens, choosing the path that first maximizes
// overlap with gold and then uses the fewest blocks. Edits come back
// sorted by position with annotator 0.
std::vector<Edit> maxmatch_select(const AlignLattice& lattice,
                                  const std::vector<std::string>& hyp,
                                  const std::vector<Edit>& gold,
                                  size_t merge_window = 4);

struct ScoreReport {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;

  // Empty system output is perfectly precise; nothing to find is
  // perfect recall; F1 of two zero rates is zero.
  double precision() const {
    return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// Scores one hypothesis sentence; `gold` holds one annotator's edits.
ScoreReport score_sentence(const std::vector<std::string>& src,
                           const std::vector<std::string>& hyp,
                           const std::vector<Edit>& gold,
                           size_t merge_window = 4);

// Micro-averaged corpus score over annotator `annotator`'s edits.
ScoreReport score_corpus(const std::vector<AnnotatedSentence>& gold,
                         const std::vector<std::string>& hyp_lines,
                         int annotator = 0, size_t merge_window = 4);

std::string format_report(const ScoreReport& r);

// Reference implementation for cross-checks: enumerates every way of
// grouping every minimal alignment into blocks and returns the best
// (overlap, -edits) attainable. Exponential; small inputs only.
std::pair<size_t, size_t> brute_force_best(const std::vector<std::string>& src,
                                           const std::vector<std::string>& hyp,
                                           const std::vector<Edit>& gold,
                                           size_t merge_window = 4);

}  // namespace textnorm
