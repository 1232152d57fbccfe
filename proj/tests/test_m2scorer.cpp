#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "textnorm/errors.hpp"
#include "textnorm/m2.hpp"
#include "textnorm/m2scorer.hpp"
#include "textnorm/rng.hpp"

using namespace textnorm;

namespace {

std::vector<std::string> toks(const std::string& s) { return split_tokens(s); }

// Applies hypothesis edits the gold way, for round-trip checks.
std::vector<std::string> apply_edits(const std::vector<std::string>& src,
                               const std::vector<Edit>& edits) {
  AnnotatedSentence s;
  s.tokens = src;
  s.edits = edits;
  return apply_gold_edits(s);
}

}  // namespace

TEST_CASE("alignment lattice") {
  SUBCASE("identical sequences produce only matches at zero cost") {
    auto lat = align(toks("a b c"), toks("a b c"));
    CHECK(lat.min_cost == 0);
    for (size_t k = 0; k < 3; ++k) {
      CHECK(lat.at(k, k) == AlignLattice::kMatch);
    }
    CHECK(lat.at(3, 3) == 0);  // terminal node has no outgoing edges
  }
  SUBCASE("single substitution") {
    auto lat = align(toks("a b c"), toks("a x c"));
    CHECK(lat.min_cost == 1);
    CHECK((lat.at(1, 1) & AlignLattice::kSub) != 0);
    CHECK((lat.at(1, 1) & AlignLattice::kMatch) == 0);
  }
  SUBCASE("single deletion") {
    auto lat = align(toks("a b"), toks("a"));
    CHECK(lat.min_cost == 1);
    CHECK((lat.at(1, 1) & AlignLattice::kDel) != 0);
  }
  SUBCASE("single insertion") {
    auto lat = align(toks("a"), toks("a x"));
    CHECK(lat.min_cost == 1);
    CHECK((lat.at(1, 1) & AlignLattice::kIns) != 0);
  }
  SUBCASE("empty sides align by pure insertion or deletion") {
    auto ins = align({}, toks("a b"));
    CHECK(ins.min_cost == 2);
    CHECK((ins.at(0, 0) & AlignLattice::kIns) != 0);
    auto del = align(toks("a b"), {});
    CHECK(del.min_cost == 2);
    CHECK((del.at(0, 0) & AlignLattice::kDel) != 0);
    auto nil = align({}, {});
    CHECK(nil.min_cost == 0);
  }
  SUBCASE("only minimal-path edges are flagged") {
    // "a b" vs "b a": cost 2. Paths: sub+sub, or del+match+ins, or
    // ins+match+del. The edge (0,0)->match would cost 3 overall: absent.
    auto lat = align(toks("a b"), toks("b a"));
    CHECK(lat.min_cost == 2);
    CHECK((lat.at(0, 0) & AlignLattice::kMatch) == 0);
    CHECK((lat.at(0, 0) & AlignLattice::kSub) != 0);
    CHECK((lat.at(0, 0) & AlignLattice::kDel) != 0);
    CHECK((lat.at(0, 0) & AlignLattice::kIns) != 0);
  }
}

TEST_CASE("maxmatch edit selection") {
  SUBCASE("hypothesis that applies the gold edits exactly") {
    auto src = toks("he go home now");
    std::vector<Edit> gold = {{1, 2, "goes", 0}, {2, 2, "to", 0}};
    auto hyp = apply_edits(src, gold);
    auto lat = align(src, hyp);
    auto sys = maxmatch_select(lat, hyp, gold);
    CHECK(sys == gold);
  }
  SUBCASE("merged phrase edit is preferred when gold asks for it") {
    auto src = toks("a b c d");
    std::vector<Edit> gold = {{1, 3, "x y", 0}};
    auto hyp = toks("a x y d");
    auto lat = align(src, hyp);
    auto sys = maxmatch_select(lat, hyp, gold);
    REQUIRE(sys.size() == 1);
    CHECK(sys[0] == gold[0]);
  }
  SUBCASE("without gold pressure the fewest blocks win") {
    auto src = toks("a b c d");
    auto hyp = toks("a x y d");
    auto lat = align(src, hyp);
    auto sys = maxmatch_select(lat, hyp, {});
    CHECK(sys.size() == 1);  // one two-token block, not two substitutions
    CHECK(sys[0].start == 1);
    CHECK(sys[0].end == 3);
    CHECK(sys[0].replacement == "x y");
  }
  SUBCASE("identical hypothesis yields no edits") {
    auto src = toks("a b c");
    auto lat = align(src, src);
    CHECK(maxmatch_select(lat, src, {}).empty());
  }
  SUBCASE("window limits how far a block may stretch") {
    // Two substitutions five tokens apart cannot merge under window 4.
    auto src = toks("a b c d e f g");
    auto hyp = toks("x b c d e f y");
    auto lat = align(src, hyp);
    auto sys = maxmatch_select(lat, hyp, {}, 4);
    CHECK(sys.size() == 2);
  }
  SUBCASE("selected edits reconstruct the hypothesis") {
    Rng rng(5);
    const std::vector<std::string> pool = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<std::string> src, hyp;
      const size_t n = rng.index(6);
      const size_t m = rng.index(6);
      for (size_t i = 0; i < n; ++i) src.push_back(pool[rng.index(pool.size())]);
      for (size_t j = 0; j < m; ++j) hyp.push_back(pool[rng.index(pool.size())]);
      auto lat = align(src, hyp);
      auto sys = maxmatch_select(lat, hyp, {});
      CHECK(apply_edits(src, sys) == hyp);
    }
  }
}

TEST_CASE("score formulas") {
  SUBCASE("one of two gold edits applied") {
    auto src = toks("teh cat iz here");
    std::vector<Edit> gold = {{0, 1, "the", 0}, {2, 3, "is", 0}};
    auto hyp = toks("the cat iz here");
    auto r = score_sentence(src, hyp, gold);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 1);
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == 0.5);
    CHECK(r.f1() == doctest::Approx(2.0 / 3));
  }
  SUBCASE("unchanged hypothesis with nonempty gold") {
    auto src = toks("teh cat");
    std::vector<Edit> gold = {{0, 1, "the", 0}};
    auto r = score_sentence(src, src, gold);
    CHECK(r.tp == 0);
    CHECK(r.fp == 0);
    CHECK(r.fn == 1);
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == 0.0);
    CHECK(r.f1() == 0.0);
  }
  SUBCASE("unchanged hypothesis with empty gold is perfect") {
    auto src = toks("all good");
    auto r = score_sentence(src, src, {});
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == 1.0);
    CHECK(r.f1() == 1.0);
  }
  SUBCASE("spurious edit against empty gold") {
    auto src = toks("a b");
    auto r = score_sentence(src, toks("a x"), {});
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
    CHECK(r.fn == 0);
    CHECK(r.precision() == 0.0);
    CHECK(r.recall() == 1.0);
    CHECK(r.f1() == 0.0);
  }
  SUBCASE("replacement strings must match, not just spans") {
    auto src = toks("teh cat");
    std::vector<Edit> gold = {{0, 1, "the", 0}};
    auto r = score_sentence(src, toks("thee cat"), gold);
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
  }
  SUBCASE("whitespace inside replacements is normalized") {
    auto src = toks("ab c");
    std::vector<Edit> gold = {{0, 1, "a  b", 0}};  // double space
    auto hyp = toks("a b c");
    auto r = score_sentence(src, hyp, gold);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
  }
}

TEST_CASE("gold-corrected hypotheses score perfect recall") {
  Rng rng(11);
  const std::vector<std::string> pool = {"u", "v", "w", "x", "y"};
  size_t nonempty = 0;
  for (int trial = 0; trial < 80; ++trial) {
    // Build a sentence and a non-overlapping gold edit set.
    const size_t n = 3 + rng.index(5);
    std::vector<std::string> src;
    for (size_t i = 0; i < n; ++i) src.push_back(pool[rng.index(pool.size())]);
    std::vector<Edit> gold;
    size_t pos = 0;
    while (pos < n) {
      if (rng.uniform() < 0.4) {
        size_t end = std::min(n, pos + 1 + rng.index(2));
        std::string repl;
        const size_t len = rng.index(3);
        for (size_t k = 0; k < len; ++k) {
          if (k) repl += ' ';
          repl += "z" + std::to_string(rng.index(3));
        }
        gold.push_back({pos, end, repl, 0});
        pos = end + 1;
      } else {
        ++pos;
      }
    }
    auto hyp = apply_edits(src, gold);
    auto r = score_sentence(src, hyp, gold);
    CHECK(r.recall() == 1.0);
    CHECK(r.fn == 0);
    nonempty += gold.empty() ? 0 : 1;
    // The selector may phrase the same rewrite differently (for example
    // merging adjacent gold edits), so precision is not always 1; but
    // whatever it reports must stay within bounds.
    CHECK(r.precision() >= 0.0);
    CHECK(r.precision() <= 1.0);
  }
  CHECK(nonempty > 30);
}

TEST_CASE("maxmatch equals the brute-force optimum") {
  Rng rng(7);
  const std::vector<std::string> pool = {"a", "b", "c"};
  for (int trial = 0; trial < 120; ++trial) {
    const size_t n = rng.index(6);
    const size_t m = rng.index(6);
    std::vector<std::string> src, hyp;
    for (size_t i = 0; i < n; ++i) src.push_back(pool[rng.index(pool.size())]);
    for (size_t j = 0; j < m; ++j) hyp.push_back(pool[rng.index(pool.size())]);
    // Up to three random gold edits over src, non-overlapping.
    std::vector<Edit> gold;
    size_t pos = 0;
    while (pos < n && gold.size() < 3) {
      if (rng.uniform() < 0.5) {
        size_t end = std::min(n, pos + rng.index(3));
        std::string repl;
        if (rng.uniform() < 0.7) {
          repl = pool[rng.index(pool.size())];
          if (rng.uniform() < 0.3) repl += " " + pool[rng.index(pool.size())];
        }
        if (end > pos || !repl.empty()) gold.push_back({pos, end, repl, 0});
        pos = end + 1;
      } else {
        ++pos;
      }
    }
    const size_t window = 1 + rng.index(4);

    auto lat = align(src, hyp);
    auto sys = maxmatch_select(lat, hyp, gold, window);
    // Count on the same normalized key the scorer uses.
    size_t tp = 0;
    for (const auto& e : sys) {
      for (const auto& g : gold) {
        if (g.start == e.start && g.end == e.end &&
            join_tokens(split_tokens(g.replacement)) ==
                join_tokens(split_tokens(e.replacement))) {
          ++tp;
          break;
        }
      }
    }
    auto [best_tp, best_edits] = brute_force_best(src, hyp, gold, window);
    INFO("src ", join_tokens(src), " | hyp ", join_tokens(hyp), " window ",
         window);
    CHECK(tp == best_tp);
    CHECK(sys.size() == best_edits);
  }
}

TEST_CASE("corpus scoring micro-averages") {
  auto gold = parse_m2(
      "S teh cat\n"
      "A 0 1|||Spelling|||the|||REQUIRED|||-NONE-|||0\n"
      "\n"
      "S he go home\n"
      "A 1 2|||Verb|||goes|||REQUIRED|||-NONE-|||0\n"
      "A 2 3|||Noun|||house|||REQUIRED|||-NONE-|||0\n");
  SUBCASE("sums counts over sentences") {
    // First sentence corrected, second left alone: TP=1, FN=2.
    auto r = score_corpus(gold, {"the cat", "he go home"});
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 2);
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == doctest::Approx(1.0 / 3));
  }
  SUBCASE("all corrected") {
    auto r = score_corpus(gold, {"the cat", "he goes house"});
    CHECK(r.tp == 3);
    CHECK(r.fn == 0);
    CHECK(r.f1() == 1.0);
  }
  SUBCASE("length mismatch is a usage error") {
    CHECK_THROWS_AS(score_corpus(gold, {"the cat"}), UsageError);
  }
  SUBCASE("other annotators are ignored") {
    auto g2 = parse_m2(
        "S teh cat\n"
        "A 0 1|||Spelling|||the|||REQUIRED|||-NONE-|||1\n");
    auto r = score_corpus(g2, {"teh cat"}, /*annotator=*/0);
    CHECK(r.tp == 0);
    CHECK(r.fn == 0);
    CHECK(r.f1() == 1.0);
  }
}

TEST_CASE("score bounds hold on arbitrary inputs") {
  Rng rng(13);
  const std::vector<std::string> pool = {"a", "b"};
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::string> src, hyp;
    for (size_t i = 0; i < 1 + rng.index(5); ++i) {
      src.push_back(pool[rng.index(2)]);
    }
    for (size_t j = 0; j < rng.index(6); ++j) hyp.push_back(pool[rng.index(2)]);
    std::vector<Edit> gold;
    if (rng.uniform() < 0.5 && !src.empty()) {
      gold.push_back({0, 1, "c", 0});
    }
    auto r = score_sentence(src, hyp, gold);
    CHECK(r.precision() >= 0.0);
    CHECK(r.precision() <= 1.0);
    CHECK(r.recall() >= 0.0);
    CHECK(r.recall() <= 1.0);
    CHECK(r.f1() <= std::max(r.precision(), r.recall()) + 1e-12);
  }
}

TEST_CASE("report formatting") {
  ScoreReport r;
  r.tp = 3;
  r.fp = 1;
  r.fn = 2;
  CHECK(format_report(r) ==
        "TP: 3  FP: 1  FN: 2\n"
        "Precision: 0.7500 / Recall: 0.6000 / F_1: 0.6667\n");
}
