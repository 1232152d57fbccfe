#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "textnorm/rng.hpp"

namespace textnorm {

// Character n-grams of the boundary-wrapped word "<word>": every
// contiguous substring of minn..maxn codepoints, ordered by
// (length, position). Operates on codepoints, returns UTF-8 strings.
std::vector<std::string> extract_ngrams(const std::string& word, size_t minn,
                                        size_t maxn);

// FNV-1a over the UTF-8 bytes, 32-bit (offset 2166136261, prime 16777619).
uint32_t fnv1a(const std::string& s);

// fnv1a(s) % bucket_count.
uint32_t hash_ngram(const std::string& s, uint32_t bucket_count);

// Word vectors enriched with hashed n-gram bucket vectors. A composed
// vector is the mean of the whole-word vector (if the word is in
// vocabulary) and one bucket vector per n-gram occurrence. Composition
// returns nullopt (UNHANDLEABLE) iff the word contains a character outside
// the known character set or none of its n-gram buckets were ever trained.
class SubwordEmbeddings {
 public:
  SubwordEmbeddings() = default;
  SubwordEmbeddings(size_t dim, size_t minn, size_t maxn, size_t bucket_count);

  size_t dim() const { return dim_; }
  size_t minn() const { return minn_; }
  size_t maxn() const { return maxn_; }
  size_t bucket_count() const { return bucket_count_; }
  size_t word_count() const { return words_.size(); }

  bool has_word(const std::string& w) const { return word_id_.count(w) > 0; }
  int add_word(const std::string& w);  // id of w, inserting if needed
  int word_id(const std::string& w) const;
  const std::string& word_token(int id) const { return words_[static_cast<size_t>(id)]; }

  float* word_vec(int id) { return word_vec_.data() + static_cast<size_t>(id) * dim_; }
  const float* word_vec(int id) const {
    return word_vec_.data() + static_cast<size_t>(id) * dim_;
  }
  float* bucket_vec(uint32_t b) { return bucket_vec_.data() + static_cast<size_t>(b) * dim_; }
  const float* bucket_vec(uint32_t b) const {
    return bucket_vec_.data() + static_cast<size_t>(b) * dim_;
  }

  void mark_bucket_trained(uint32_t b) { ++bucket_trained_[b]; }
  bool bucket_trained(uint32_t b) const { return bucket_trained_[b] > 0; }
  void note_charset(const std::string& word);
  bool knows_chars(const std::string& word) const;

  // Bucket ids of the word's n-grams, one per occurrence.
  std::vector<uint32_t> ngram_buckets(const std::string& word) const;

  // Mean over {whole-word vector if in vocabulary} and the word's n-gram
  // bucket vectors. nullopt = UNHANDLEABLE.
  std::optional<std::vector<float>> compose(const std::string& word) const;

  // Whole-word vector only; nullopt when the word is out of vocabulary.
  std::optional<std::vector<float>> whole_word(const std::string& word) const;

  void save(const std::string& path) const;
  static SubwordEmbeddings load(const std::string& path);

 private:
  size_t dim_ = 0;
  size_t minn_ = 2;
  size_t maxn_ = 6;
  size_t bucket_count_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_id_;
  std::vector<float> word_vec_;
  std::vector<float> bucket_vec_;
  std::vector<uint32_t> bucket_trained_;
  std::unordered_set<char32_t> charset_;
};

struct SkipgramConfig {
  size_t dim = 300;
  size_t window = 5;       // 2 = narrow, 5 = wide
  bool subwords = true;
  size_t minn = 2;
  size_t maxn = 6;
  size_t bucket_count = 2000;
  size_t negatives = 5;
  size_t epochs = 5;
  double lr = 0.05;        // decays linearly to 0
  uint64_t seed = 42;
};

// (center index, context index) pairs: for each position every neighbor
// within the full window on both sides.
std::vector<std::pair<size_t, size_t>> skipgram_pairs(size_t n_tokens,
                                                      size_t window);

// Single-threaded skip-gram with negative sampling over a whitespace
// token stream. Deterministic for a fixed seed.
SubwordEmbeddings train_skipgram(const std::vector<std::string>& tokens,
                                 const SkipgramConfig& cfg);

enum class FeatureMode { none, whole_word, subword };

// Maps each character of a sentence to a word-level feature vector:
// whitespace gets a fixed random vector w_, characters of a word get the
// word's composed vector, and OOV (whole-word mode) or UNHANDLEABLE
// (subword mode) words fall back to w_. Two embedding sets concatenate.
class WordFeatureProvider {
 public:
  // mode none
  WordFeatureProvider();
  // single embedding set; w_ drawn uniform with mean 0, variance 1
  WordFeatureProvider(FeatureMode mode, std::shared_ptr<const SubwordEmbeddings> emb,
                      uint64_t seed);
  // concatenation of two sets
  WordFeatureProvider(FeatureMode mode, std::shared_ptr<const SubwordEmbeddings> a,
                      std::shared_ptr<const SubwordEmbeddings> b, uint64_t seed);

  size_t dim() const { return dim_; }
  FeatureMode mode() const { return mode_; }
  const std::vector<float>& whitespace_vec() const { return whitespace_; }
  // Overrides w_ (used when restoring from a checkpoint).
  void set_whitespace_vec(std::vector<float> w);

  // One dim()-wide vector per character of the UTF-8 sentence,
  // row-major in a flat array. length == codepoint count.
  struct Features {
    size_t length = 0;
    size_t dim = 0;
    std::vector<float> data;
  };
  Features feature_sequence(const std::string& sentence) const;

  // Feature vector for one word (never nullopt; falls back to w_).
  std::vector<float> word_features(const std::string& word) const;

 private:
  FeatureMode mode_ = FeatureMode::none;
  std::vector<std::shared_ptr<const SubwordEmbeddings>> sets_;
  std::vector<float> whitespace_;
  size_t dim_ = 0;
};

}  // namespace textnorm
