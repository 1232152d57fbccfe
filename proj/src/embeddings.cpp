#include "textnorm/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "textnorm/errors.hpp"
#include "textnorm/utf8.hpp"

namespace textnorm {

std::vector<std::string> extract_ngrams(const std::string& word, size_t minn,
                                        size_t maxn) {
  if (minn == 0 || minn > maxn) throw ConfigError("bad n-gram length range");
  std::vector<char32_t> cps = utf8_decode(word);
  std::vector<char32_t> wrapped;
  wrapped.reserve(cps.size() + 2);
  wrapped.push_back(U'<');
  wrapped.insert(wrapped.end(), cps.begin(), cps.end());
  wrapped.push_back(U'>');
  std::vector<std::string> out;
  for (size_t len = minn; len <= maxn && len <= wrapped.size(); ++len) {
    for (size_t pos = 0; pos + len <= wrapped.size(); ++pos) {
      out.push_back(utf8_encode(
          std::vector<char32_t>(wrapped.begin() + static_cast<long>(pos),
                                wrapped.begin() + static_cast<long>(pos + len))));
    }
  }
  return out;
}

uint32_t fnv1a(const std::string& s) {
  uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

uint32_t hash_ngram(const std::string& s, uint32_t bucket_count) {
  if (bucket_count == 0) throw ConfigError("bucket count must be positive");
  return fnv1a(s) % bucket_count;
}

SubwordEmbeddings::SubwordEmbeddings(size_t dim, size_t minn, size_t maxn,
                                     size_t bucket_count)
    : dim_(dim),
      minn_(minn),
      maxn_(maxn),
      bucket_count_(bucket_count),
      bucket_vec_(bucket_count * dim, 0.0f),
      bucket_trained_(bucket_count, 0) {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
  if (minn == 0 || minn > maxn) throw ConfigError("bad n-gram length range");
}

int SubwordEmbeddings::add_word(const std::string& w) {
  auto it = word_id_.find(w);
  if (it != word_id_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(w);
  word_id_[w] = id;
  word_vec_.resize(words_.size() * dim_, 0.0f);
  note_charset(w);
  return id;
}

int SubwordEmbeddings::word_id(const std::string& w) const {
  auto it = word_id_.find(w);
  return it == word_id_.end() ? -1 : it->second;
}

void SubwordEmbeddings::note_charset(const std::string& word) {
  for (char32_t cp : utf8_decode(word)) charset_.insert(cp);
}

bool SubwordEmbeddings::knows_chars(const std::string& word) const {
  for (char32_t cp : utf8_decode(word)) {
    if (!charset_.count(cp)) return false;
  }
  return true;
}

std::vector<uint32_t> SubwordEmbeddings::ngram_buckets(const std::string& word) const {
  std::vector<uint32_t> out;
  if (bucket_count_ == 0) return out;
  for (const auto& g : extract_ngrams(word, minn_, maxn_)) {
    out.push_back(hash_ngram(g, static_cast<uint32_t>(bucket_count_)));
  }
  return out;
}

std::optional<std::vector<float>> SubwordEmbeddings::compose(
    const std::string& word) const {
  if (word.empty() || !knows_chars(word)) return std::nullopt;
  const auto buckets = ngram_buckets(word);
  bool any_trained = false;
  for (uint32_t b : buckets) {
    if (bucket_trained(b)) {
      any_trained = true;
      break;
    }
  }
  if (!any_trained) return std::nullopt;
  std::vector<float> acc(dim_, 0.0f);
  size_t parts = 0;
  const int id = word_id(word);
  if (id >= 0) {
    const float* v = word_vec(id);
    for (size_t k = 0; k < dim_; ++k) acc[k] += v[k];
    ++parts;
  }
  for (uint32_t b : buckets) {
    const float* v = bucket_vec(b);
    for (size_t k = 0; k < dim_; ++k) acc[k] += v[k];
    ++parts;
  }
  const float inv = 1.0f / static_cast<float>(parts);
  for (float& x : acc) x *= inv;
  return acc;
}

std::optional<std::vector<float>> SubwordEmbeddings::whole_word(
    const std::string& word) const {
  const int id = word_id(word);
  if (id < 0) return std::nullopt;
  return std::vector<float>(word_vec(id), word_vec(id) + dim_);
}

void SubwordEmbeddings::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out << words_.size() << " " << dim_ << " " << minn_ << " " << maxn_ << " "
      << bucket_count_ << "\n";
  char buf[64];
  auto write_vec = [&](const float* v) {
    for (size_t k = 0; k < dim_; ++k) {
      std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(v[k]));
      out << buf;
    }
    out << "\n";
  };
  for (size_t i = 0; i < words_.size(); ++i) {
    out << words_[i];
    write_vec(word_vec(static_cast<int>(i)));
  }
  for (size_t b = 0; b < bucket_count_; ++b) {
    if (!bucket_trained_[b]) continue;
    out << "#" << b;
    write_vec(bucket_vec(static_cast<uint32_t>(b)));
  }
  if (!out) throw DataError("failed writing embedding file: " + path);
}

SubwordEmbeddings SubwordEmbeddings::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty embedding file: " + path);
  size_t word_count = 0, dim = 0, minn = 0, maxn = 0, buckets = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> word_count >> dim >> minn >> maxn >> buckets)) {
      throw DataError("bad embedding file header: " + path);
    }
    std::string extra;
    if (hs >> extra) throw DataError("bad embedding file header: " + path);
  }
  if (dim == 0) throw DataError("embedding file declares dim 0: " + path);
  if (minn == 0 || minn > maxn) {
    throw DataError("embedding file declares a bad n-gram range: " + path);
  }
  SubwordEmbeddings emb(dim, minn, maxn, buckets);
  auto parse_floats = [&](std::istringstream& ls, float* dst, size_t line_no) {
    for (size_t k = 0; k < dim; ++k) {
      if (!(ls >> dst[k])) {
        throw DataError("embedding line " + std::to_string(line_no) +
                        " has fewer than " + std::to_string(dim) + " values");
      }
    }
    std::string extra;
    if (ls >> extra) {
      throw DataError("embedding line " + std::to_string(line_no) +
                      " has more than " + std::to_string(dim) + " values");
    }
  };
  size_t line_no = 1;
  for (size_t i = 0; i < word_count; ++i) {
    if (!std::getline(in, line)) throw DataError("embedding file truncated: " + path);
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) throw DataError("blank embedding line " + std::to_string(line_no));
    const int id = emb.add_word(token);
    parse_floats(ls, emb.word_vec(id), line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    if (token.size() < 2 || token[0] != '#') {
      throw DataError("expected bucket line at line " + std::to_string(line_no));
    }
    size_t b = 0;
    try {
      b = std::stoul(token.substr(1));
    } catch (const std::exception&) {
      throw DataError("bad bucket id at line " + std::to_string(line_no));
    }
    if (b >= buckets) throw DataError("bucket id out of range at line " + std::to_string(line_no));
    parse_floats(ls, emb.bucket_vec(static_cast<uint32_t>(b)), line_no);
    emb.bucket_trained_[b] = 1;
  }
  return emb;
}

std::vector<std::pair<size_t, size_t>> skipgram_pairs(size_t n_tokens,
                                                      size_t window) {
  if (window == 0) throw ConfigError("skip-gram window must be positive");
  std::vector<std::pair<size_t, size_t>> out;
  for (size_t i = 0; i < n_tokens; ++i) {
    const size_t lo = i > window ? i - window : 0;
    const size_t hi = std::min(n_tokens, i + window + 1);
    for (size_t j = lo; j < hi; ++j) {
      if (j != i) out.emplace_back(i, j);
    }
  }
  return out;
}

namespace {

// Sigmoid clamped the word2vec way to keep exp() cheap and finite.
inline float sgns_sigmoid(float x) {
  if (x > 8.0f) return 1.0f;
  if (x < -8.0f) return 0.0f;
  return 1.0f / (1.0f + std::exp(-x));
}

}  // namespace

SubwordEmbeddings train_skipgram(const std::vector<std::string>& tokens,
                                 const SkipgramConfig& cfg) {
  if (cfg.window == 0) throw ConfigError("skip-gram window must be positive");
  if (tokens.empty()) throw DataError("skip-gram corpus is empty");
  SubwordEmbeddings emb(cfg.dim, cfg.minn, cfg.maxn,
                        cfg.subwords ? cfg.bucket_count : 0);
  if (cfg.subwords && cfg.bucket_count == 0) {
    throw ConfigError("subword training needs a positive bucket count");
  }

  // Vocabulary in first-occurrence order; id stream for the corpus.
  std::vector<int> stream;
  stream.reserve(tokens.size());
  std::vector<size_t> counts;
  for (const auto& t : tokens) {
    const bool fresh = !emb.has_word(t);
    const int id = emb.add_word(t);
    if (fresh) counts.push_back(0);
    ++counts[static_cast<size_t>(id)];
    stream.push_back(id);
  }
  const size_t n_words = emb.word_count();
  const size_t dim = cfg.dim;

  Rng rng(cfg.seed);
  const double init_bound = 1.0 / static_cast<double>(dim);
  for (size_t w = 0; w < n_words; ++w) {
    float* v = emb.word_vec(static_cast<int>(w));
    for (size_t k = 0; k < dim; ++k) {
      v[k] = static_cast<float>(rng.uniform(-init_bound, init_bound));
    }
  }
  if (cfg.subwords) {
    for (size_t b = 0; b < cfg.bucket_count; ++b) {
      float* v = emb.bucket_vec(static_cast<uint32_t>(b));
      for (size_t k = 0; k < dim; ++k) {
        v[k] = static_cast<float>(rng.uniform(-init_bound, init_bound));
      }
    }
  }

  // Output (context-side) vectors, zero-initialized.
  std::vector<float> out_vec(n_words * dim, 0.0f);

  // Negative sampling from the unigram distribution raised to 3/4.
  std::vector<double> cum(n_words);
  double acc = 0.0;
  for (size_t w = 0; w < n_words; ++w) {
    acc += std::pow(static_cast<double>(counts[w]), 0.75);
    cum[w] = acc;
  }
  auto sample_word = [&]() {
    const double r = rng.uniform() * acc;
    return static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
  };

  // Cache every word's n-gram buckets once.
  std::vector<std::vector<uint32_t>> buckets_of(n_words);
  if (cfg.subwords) {
    for (size_t w = 0; w < n_words; ++w) {
      buckets_of[w] = emb.ngram_buckets(emb.word_token(static_cast<int>(w)));
    }
  }

  const size_t total_positions = tokens.size() * cfg.epochs;
  size_t done_positions = 0;
  std::vector<float> h(dim), grad_h(dim);
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = 0; i < stream.size(); ++i, ++done_positions) {
      const double lr = cfg.lr * (1.0 - static_cast<double>(done_positions) /
                                            static_cast<double>(total_positions));
      const int center = stream[i];
      const auto& cbuckets = buckets_of[static_cast<size_t>(center)];
      // Input representation: mean of word vector and n-gram buckets.
      const float* wv = emb.word_vec(center);
      std::copy(wv, wv + dim, h.begin());
      if (cfg.subwords) {
        for (uint32_t b : cbuckets) {
          const float* bv = emb.bucket_vec(b);
          for (size_t k = 0; k < dim; ++k) h[k] += bv[k];
        }
        const float inv = 1.0f / static_cast<float>(cbuckets.size() + 1);
        for (size_t k = 0; k < dim; ++k) h[k] *= inv;
      }
      const size_t lo = i > cfg.window ? i - cfg.window : 0;
      const size_t hi = std::min(stream.size(), i + cfg.window + 1);
      for (size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        std::fill(grad_h.begin(), grad_h.end(), 0.0f);
        for (size_t neg = 0; neg <= cfg.negatives; ++neg) {
          int target;
          float label;
          if (neg == 0) {
            target = stream[j];
            label = 1.0f;
          } else {
            target = sample_word();
            if (target == stream[j]) continue;
            label = 0.0f;
          }
          float* u = out_vec.data() + static_cast<size_t>(target) * dim;
          float dot = 0.0f;
          for (size_t k = 0; k < dim; ++k) dot += h[k] * u[k];
          const float g = (label - sgns_sigmoid(dot)) * static_cast<float>(lr);
          for (size_t k = 0; k < dim; ++k) {
            grad_h[k] += g * u[k];
            u[k] += g * h[k];
          }
        }
        // Distribute the input gradient over the averaged components.
        if (cfg.subwords) {
          const float inv = 1.0f / static_cast<float>(cbuckets.size() + 1);
          float* cv = emb.word_vec(center);
          for (size_t k = 0; k < dim; ++k) cv[k] += grad_h[k] * inv;
          for (uint32_t b : cbuckets) {
            float* bv = emb.bucket_vec(b);
            for (size_t k = 0; k < dim; ++k) bv[k] += grad_h[k] * inv;
            emb.mark_bucket_trained(b);
          }
        } else {
          float* cv = emb.word_vec(center);
          for (size_t k = 0; k < dim; ++k) cv[k] += grad_h[k];
        }
      }
    }
  }
  return emb;
}

WordFeatureProvider::WordFeatureProvider() = default;

WordFeatureProvider::WordFeatureProvider(FeatureMode mode,
                                         std::shared_ptr<const SubwordEmbeddings> emb,
                                         uint64_t seed)
    : mode_(mode) {
  if (mode == FeatureMode::none) throw ConfigError("feature mode none takes no embeddings");
  if (!emb) throw ConfigError("feature provider needs an embedding set");
  sets_.push_back(std::move(emb));
  dim_ = sets_[0]->dim();
  Rng rng(seed);
  const double bound = std::sqrt(3.0);
  whitespace_.resize(dim_);
  for (auto& x : whitespace_) x = static_cast<float>(rng.uniform(-bound, bound));
}

WordFeatureProvider::WordFeatureProvider(FeatureMode mode,
                                         std::shared_ptr<const SubwordEmbeddings> a,
                                         std::shared_ptr<const SubwordEmbeddings> b,
                                         uint64_t seed)
    : mode_(mode) {
  if (mode == FeatureMode::none) throw ConfigError("feature mode none takes no embeddings");
  if (!a || !b) throw ConfigError("feature provider needs two embedding sets");
  sets_.push_back(std::move(a));
  sets_.push_back(std::move(b));
  dim_ = sets_[0]->dim() + sets_[1]->dim();
  Rng rng(seed);
  const double bound = std::sqrt(3.0);
  whitespace_.resize(dim_);
  for (auto& x : whitespace_) x = static_cast<float>(rng.uniform(-bound, bound));
}

void WordFeatureProvider::set_whitespace_vec(std::vector<float> w) {
  if (w.size() != dim_) throw DimensionError("whitespace vector width mismatch");
  whitespace_ = std::move(w);
}

std::vector<float> WordFeatureProvider::word_features(const std::string& word) const {
  if (mode_ == FeatureMode::none) return {};
  std::vector<float> out;
  out.reserve(dim_);
  for (const auto& set : sets_) {
    std::optional<std::vector<float>> v = mode_ == FeatureMode::whole_word
                                              ? set->whole_word(word)
                                              : set->compose(word);
    if (!v) return whitespace_;  // OOV / UNHANDLEABLE falls back to w_
    out.insert(out.end(), v->begin(), v->end());
  }
  return out;
}

namespace {

bool is_space_cp(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == 0x00A0;
}

}  // namespace

WordFeatureProvider::Features WordFeatureProvider::feature_sequence(
    const std::string& sentence) const {
  const auto cps = utf8_decode(sentence);
  Features f;
  f.length = cps.size();
  f.dim = dim_;
  if (mode_ == FeatureMode::none) return f;
  f.data.assign(cps.size() * dim_, 0.0f);
  size_t i = 0;
  while (i < cps.size()) {
    if (is_space_cp(cps[i])) {
      std::copy(whitespace_.begin(), whitespace_.end(), f.data.begin() + static_cast<long>(i * dim_));
      ++i;
      continue;
    }
    size_t j = i;
    while (j < cps.size() && !is_space_cp(cps[j])) ++j;
    const std::string word = utf8_encode(
        std::vector<char32_t>(cps.begin() + static_cast<long>(i), cps.begin() + static_cast<long>(j)));
    const std::vector<float> wf = word_features(word);
    for (size_t k = i; k < j; ++k) {
      std::copy(wf.begin(), wf.end(), f.data.begin() + static_cast<long>(k * dim_));
    }
    i = j;
  }
  return f;
}

}  // namespace textnorm
