#include "textnorm/batch.hpp"

#include <algorithm>
#include <fstream>

#include "textnorm/errors.hpp"
#include "textnorm/utf8.hpp"

namespace textnorm {

std::vector<Batch> filter_and_batch(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const Vocabulary& vocab, size_t max_chars, size_t batch_size, uint64_t seed) {
  if (pairs.empty()) throw DataError("no training pairs");
  if (batch_size == 0) throw ConfigError("batch size must be positive");

  std::vector<size_t> keep;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (utf8_length(pairs[i].first) <= max_chars) keep.push_back(i);
  }
  if (keep.empty()) throw DataError("length filter removed every pair");

  Rng rng(seed);
  shuffle(keep, rng);

  std::vector<Batch> out;
  for (size_t at = 0; at < keep.size(); at += batch_size) {
    const size_t b = std::min(batch_size, keep.size() - at);
    Batch batch;
    batch.b = b;
    std::vector<std::vector<int>> src_rows(b), tgt_rows(b);
    for (size_t i = 0; i < b; ++i) {
      const auto& [src, tgt] = pairs[keep[at + i]];
      src_rows[i] = vocab.encode(src);
      tgt_rows[i] = vocab.encode(tgt);
      batch.src_text.push_back(src);
      batch.src_len.push_back(src_rows[i].size());
      batch.tgt_len.push_back(tgt_rows[i].size() + 2);  // SOS + ids + EOS
      batch.t_src = std::max(batch.t_src, src_rows[i].size());
      batch.t_tgt = std::max(batch.t_tgt, tgt_rows[i].size() + 2);
    }
    batch.src.assign(b * batch.t_src, Vocabulary::kPad);
    batch.tgt.assign(b * batch.t_tgt, Vocabulary::kPad);
    for (size_t i = 0; i < b; ++i) {
      std::copy(src_rows[i].begin(), src_rows[i].end(),
                batch.src.begin() + static_cast<long>(i * batch.t_src));
      auto* trow = batch.tgt.data() + i * batch.t_tgt;
      trow[0] = Vocabulary::kSos;
      std::copy(tgt_rows[i].begin(), tgt_rows[i].end(), trow + 1);
      trow[1 + tgt_rows[i].size()] = Vocabulary::kEos;
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> load_parallel(
    const std::string& src_path, const std::string& tgt_path) {
  std::ifstream src_in(src_path), tgt_in(tgt_path);
  if (!src_in) throw DataError("cannot open source file: " + src_path);
  if (!tgt_in) throw DataError("cannot open target file: " + tgt_path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string s, t;
  while (true) {
    const bool got_s = static_cast<bool>(std::getline(src_in, s));
    const bool got_t = static_cast<bool>(std::getline(tgt_in, t));
    if (!got_s && !got_t) break;
    if (got_s != got_t) throw DataError("parallel files have different line counts");
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (!t.empty() && t.back() == '\r') t.pop_back();
    out.emplace_back(s, t);
  }
  return out;
}

}  // namespace textnorm
