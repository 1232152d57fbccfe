#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "textnorm/rng.hpp"
#include "textnorm/vocab.hpp"

namespace textnorm {

// One training batch. Source rows hold character ids right-padded with
// PAD (no EOS; the encoder appends it). Target rows are
// SOS <ids> EOS PAD...; tgt_len counts SOS and EOS.
struct Batch {
  size_t b = 0;
  size_t t_src = 0;
  size_t t_tgt = 0;
  std::vector<int> src;             // b * t_src, row-major
  std::vector<int> tgt;             // b * t_tgt, row-major
  std::vector<size_t> src_len;      // true character counts
  std::vector<size_t> tgt_len;      // valid ids per row, incl. SOS and EOS
  std::vector<std::string> src_text;  // originals, for word features

  int src_at(size_t i, size_t t) const { return src[i * t_src + t]; }
  int tgt_at(size_t i, size_t t) const { return tgt[i * t_tgt + t]; }
};

// Drops pairs whose source exceeds max_chars codepoints, shuffles the
// remainder deterministically and groups consecutive runs of b pairs.
// Throws DataError if the filter removes everything.
std::vector<Batch> filter_and_batch(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const Vocabulary& vocab, size_t max_chars, size_t batch_size, uint64_t seed);

// Loads a plain parallel corpus: two aligned UTF-8 files, one sentence per
// line. Throws DataError if line counts differ.
std::vector<std::pair<std::string, std::string>> load_parallel(
    const std::string& src_path, const std::string& tgt_path);

}  // namespace textnorm
