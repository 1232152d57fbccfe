#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "textnorm/m2.hpp"

namespace textnorm {

// Phrase-level keep/replace table estimated by counting over annotated
// sentences. Phrases cover 1..max_phrase source tokens; an insertion is
// folded onto the token it precedes, and end-of-sentence insertions hang
// off a sentinel phrase. Application scans left to right, longest known
// phrase first, and emits each phrase's majority action; replaced text is
// never rescanned.
class ActionTable {
 public:
  static constexpr const char* kEosKey = "</s>";

  struct Stats {
    size_t keep = 0;
    std::map<std::string, size_t> replace;  // replacement -> count
  };

  struct Action {
    bool known = false;
    bool keep = true;
    std::string replacement;
  };

  explicit ActionTable(size_t max_phrase = 4);

  size_t max_phrase() const { return max_phrase_; }
  size_t size() const { return stats_.size(); }
  const Stats* stats(const std::string& phrase) const;

  void add_sentence(const std::vector<std::string>& tokens,
                    const std::vector<Edit>& gold);

  static ActionTable build(const std::vector<AnnotatedSentence>& corpus,
                           size_t max_phrase = 4, int annotator = 0);

  // Majority action for a phrase; ties fall to KEEP, ties between
  // replacements to the lexicographically smallest.
  Action majority(const std::string& phrase) const;

  std::vector<std::string> apply(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static ActionTable load(const std::string& path);

 private:
  size_t max_phrase_;
  std::map<std::string, Stats> stats_;
};

}  // namespace textnorm
