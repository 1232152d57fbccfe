#include "textnorm/vocab.hpp"

#include <algorithm>
#include <set>

#include "textnorm/errors.hpp"
#include "textnorm/utf8.hpp"

namespace textnorm {

Vocabulary::Vocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
  for (size_t i = 0; i < chars_.size(); ++i) {
    if (!ids_.emplace(chars_[i], static_cast<int>(kReserved + i)).second) {
      throw DataError("vocabulary contains a duplicate character");
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<char32_t> seen;
  for (const auto& t : texts) {
    for (char32_t cp : utf8_decode(t)) seen.insert(cp);
  }
  if (seen.empty()) throw DataError("cannot build vocabulary from empty corpus");
  return Vocabulary(std::vector<char32_t>(seen.begin(), seen.end()));
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> out;
  const auto cps = utf8_decode(text);
  out.reserve(cps.size());
  for (char32_t cp : cps) out.push_back(id_of(cp));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kSos || id == kEos) continue;
    if (id == kOov) {
      out += utf8_encode(char32_t(0xFFFD));
      continue;
    }
    const size_t idx = static_cast<size_t>(id) - kReserved;
    if (id < 0 || idx >= chars_.size()) {
      throw DataError("id " + std::to_string(id) + " outside vocabulary");
    }
    out += utf8_encode(chars_[idx]);
  }
  return out;
}

int Vocabulary::id_of(char32_t cp) const {
  auto it = ids_.find(cp);
  return it == ids_.end() ? kOov : it->second;
}

}  // namespace textnorm
