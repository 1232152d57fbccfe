#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "textnorm/errors.hpp"
#include "textnorm/inference.hpp"
#include "textnorm/utf8.hpp"

using namespace textnorm;

namespace {

const WordFeatureProvider::Features kNoFeats{};

// Greedy rollout: argmax token per step, first index on ties, same length
// cap as the default beam.
template <typename Real>
std::vector<int> greedy(const Model<Real>& m,
                        const typename Model<Real>::EncodeResult& enc) {
  const size_t max_len = (3 * (enc.T - 1)) / 2 + 10;
  auto state = m.initial_state(enc);
  std::vector<int> ids;
  int prev = Vocabulary::kSos;
  for (size_t step = 0; step < max_len; ++step) {
    auto out = m.decode_step(prev, state, enc);
    const size_t best = static_cast<size_t>(
        std::max_element(out.logits.begin(), out.logits.end()) -
        out.logits.begin());
    if (static_cast<int>(best) == Vocabulary::kEos) break;
    ids.push_back(static_cast<int>(best));
    state = std::move(out.state);
    prev = static_cast<int>(best);
  }
  return ids;
}

// Exhaustive search over every decode path of at most max_len steps.
template <typename Real>
double best_path_ll(const Model<Real>& m,
                    const typename Model<Real>::EncodeResult& enc,
                    const typename Model<Real>::DecoderState& state, int prev,
                    double ll, size_t steps_left) {
  if (steps_left == 0) return ll;
  auto out = m.decode_step(prev, state, enc);
  const auto lp = detail::log_softmax(out.logits);
  double best = -std::numeric_limits<double>::infinity();
  for (size_t v = 0; v < lp.size(); ++v) {
    if (static_cast<int>(v) == Vocabulary::kEos) {
      best = std::max(best, ll + lp[v]);
    } else {
      best = std::max(best, best_path_ll(m, enc, out.state, static_cast<int>(v),
                                         ll + lp[v], steps_left - 1));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("beam search basics") {
  auto v = Vocabulary::build({"abc"});
  Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 19);
  auto enc = m.encode(v.encode("abc"), kNoFeats);

  SUBCASE("zero width is a config error") {
    CHECK_THROWS_AS(beam_search(m, enc, {0, 0, false}), ConfigError);
  }
  SUBCASE("empty encoder output is an empty-source error") {
    Model<float>::EncodeResult none;
    CHECK_THROWS_AS(beam_search(m, none, {}), EmptySourceError);
  }
  SUBCASE("deterministic across calls") {
    auto a = beam_search(m, enc, {5, 0, false});
    auto b = beam_search(m, enc, {5, 0, false});
    CHECK(a.ids == b.ids);
    CHECK(a.loglik == b.loglik);
    CHECK(a.ended_by_eos == b.ended_by_eos);
  }
  SUBCASE("log-likelihood is never positive") {
    auto r = beam_search(m, enc, {5, 0, false});
    CHECK(r.loglik <= 0.0);
  }
  SUBCASE("max_len caps the output") {
    auto r = beam_search(m, enc, {3, 2, false});
    CHECK(r.ids.size() <= 2);
  }
}

TEST_CASE("width one reproduces the greedy rollout") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    auto v = Vocabulary::build({"abcd"});
    Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, seed);
    for (const char* src : {"ab", "dcba", "abcd"}) {
      auto enc = m.encode(v.encode(src), kNoFeats);
      auto beam = beam_search(m, enc, {1, 0, false});
      CHECK(beam.ids == greedy(m, enc));
    }
  }
}

TEST_CASE("a model that loves EOS emits the empty string") {
  auto v = Vocabulary::build({"ab"});
  Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 23);
  std::fill(m.params().at("out.w").value.begin(),
            m.params().at("out.w").value.end(), 0.0f);
  m.params().at("out.b").value[Vocabulary::kEos] = 50.0f;
  auto enc = m.encode(v.encode("ab"), kNoFeats);
  auto r = beam_search(m, enc, {5, 0, false});
  CHECK(r.ids.empty());
  CHECK(r.ended_by_eos);
  CHECK(r.loglik == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("a wide beam is exhaustive on a tiny vocabulary") {
  // Five ids and four steps: 4^k live prefixes per depth, so width 625
  // retains every candidate and must equal the enumerated optimum, and a
  // width-5 beam can never beat it.
  auto v = Vocabulary::build({"a"});
  REQUIRE(v.size() == 5);
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    Model<float> m({3, 4, 0, 0.1f, 0.35f}, v, seed);
    auto enc = m.encode(v.encode("aa"), kNoFeats);
    auto wide = beam_search(m, enc, {625, 4, false});
    auto narrow = beam_search(m, enc, {5, 4, false});
    const double oracle =
        best_path_ll(m, enc, m.initial_state(enc), Vocabulary::kSos, 0.0, 4);
    CHECK(wide.loglik == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(narrow.loglik <= wide.loglik + 1e-9);
  }
}

TEST_CASE("rescoring a beam result reproduces its log-likelihood") {
  auto v = Vocabulary::build({"abc"});
  for (uint64_t seed : {3u, 17u, 29u}) {
    Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, seed);
    auto enc = m.encode(v.encode("cab"), kNoFeats);
    for (size_t width : {1u, 5u}) {
      auto r = beam_search(m, enc, {width, 0, false});
      const double again = rescore(m, enc, r.ids, r.ended_by_eos);
      CHECK(again == doctest::Approx(r.loglik).epsilon(1e-9));
    }
  }
}

TEST_CASE("length normalization picks by mean per-step score") {
  auto v = Vocabulary::build({"ab"});
  Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 31);
  auto enc = m.encode(v.encode("ab"), kNoFeats);
  auto plain = beam_search(m, enc, {5, 0, false});
  auto normed = beam_search(m, enc, {5, 0, true});
  // Same hypothesis set; both report the raw joint log-likelihood.
  CHECK(plain.loglik <= 0.0);
  CHECK(normed.loglik <= 0.0);
  CHECK(rescore(m, enc, normed.ids, normed.ended_by_eos) ==
        doctest::Approx(normed.loglik).epsilon(1e-9));
}

TEST_CASE("repetition clamping") {
  SUBCASE("examples") {
    CHECK(clamp_repetitions("abababababab") == "ababababab");  // 6 -> 5 units
    CHECK(clamp_repetitions("aaaaaa") == "aaaaa");
    CHECK(clamp_repetitions("abcabc") == "abcabc");
    CHECK(clamp_repetitions("") == "");
    CHECK(clamp_repetitions("aaaaa") == "aaaaa");  // exactly at the limit
  }
  SUBCASE("lower limits") {
    CHECK(clamp_repetitions("aaaaaa", 1) == "a");
    CHECK(clamp_repetitions("ababab", 1) == "ab");
    CHECK(clamp_repetitions("aabbaabb", 1) == "ab");  // inner then outer
    CHECK_THROWS_AS(clamp_repetitions("a", 0), ConfigError);
  }
  SUBCASE("multibyte runs count codepoints") {
    CHECK(clamp_repetitions("ααααααα") == "ααααα");
    CHECK(clamp_repetitions("λμλμλμ", 2) == "λμλμ");
  }
  SUBCASE("longer repeated units") {
    std::string unit = "xyz";
    std::string run;
    for (int i = 0; i < 9; ++i) run += unit;
    std::string want;
    for (int i = 0; i < 5; ++i) want += unit;
    CHECK(clamp_repetitions(run) == want);
  }
  SUBCASE("idempotent and no-run on random strings") {
    Rng rng(86);
    for (int trial = 0; trial < 200; ++trial) {
      std::string s;
      const size_t n = rng.index(30);
      for (size_t i = 0; i < n; ++i) {
        s.push_back(static_cast<char>('a' + rng.index(2)));
      }
      const size_t max_reps = 1 + rng.index(4);
      const std::string once = clamp_repetitions(s, max_reps);
      CHECK(clamp_repetitions(once, max_reps) == once);
      // No unit of length 1..3 may repeat more than max_reps times.
      for (size_t unit = 1; unit <= 3; ++unit) {
        if (once.size() < unit * (max_reps + 1)) continue;
        for (size_t i = 0; i + unit * (max_reps + 1) <= once.size(); ++i) {
          bool all = true;
          for (size_t r = 1; r <= max_reps && all; ++r) {
            all = once.compare(i, unit, once, i + r * unit, unit) == 0;
          }
          INFO("string ", once, " unit ", unit, " at ", i);
          CHECK_FALSE(all);
        }
      }
    }
  }
}

TEST_CASE("sentence correction pipeline") {
  auto v = Vocabulary::build({"abc"});
  WordFeatureProvider none;

  SUBCASE("a repetition-happy model gets clamped") {
    Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 23);
    std::fill(m.params().at("out.w").value.begin(),
              m.params().at("out.w").value.end(), 0.0f);
    m.params().at("out.b").value[v.id_of(U'a')] = 50.0f;
    CHECK(correct_sentence(m, none, "abc", {5, 0, false}) == "aaaaa");
  }
  SUBCASE("an EOS-happy model gives the empty correction") {
    Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 23);
    std::fill(m.params().at("out.w").value.begin(),
              m.params().at("out.w").value.end(), 0.0f);
    m.params().at("out.b").value[Vocabulary::kEos] = 50.0f;
    CHECK(correct_sentence(m, none, "abc", {5, 0, false}).empty());
  }
  SUBCASE("provider width must match the model") {
    Model<float> m({4, 6, 3, 0.1f, 0.35f}, v, 23, std::vector<float>(3, 0.0f));
    CHECK_THROWS_AS(correct_sentence(m, none, "abc", {}), DimensionError);
  }
  SUBCASE("empty input is an empty-source error") {
    Model<float> m({4, 6, 0, 0.1f, 0.35f}, v, 23);
    CHECK_THROWS_AS(correct_sentence(m, none, "", {}), EmptySourceError);
  }
}
