#pragma once

#include <string>
#include <vector>

namespace textnorm {

// One gold edit over whitespace tokens: replace tokens [start,end) by the
// (possibly empty) replacement string. start==end is an insertion before
// token `start`; an empty replacement with start<end is a deletion.
struct Edit {
  size_t start = 0;
  size_t end = 0;
  std::string replacement;  // space-separated tokens, may be empty
  int annotator = 0;

  friend bool operator==(const Edit& a, const Edit& b) {
    return a.start == b.start && a.end == b.end &&
           a.replacement == b.replacement && a.annotator == b.annotator;
  }
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<Edit> edits;

  friend bool operator==(const AnnotatedSentence& a, const AnnotatedSentence& b) {
    return a.tokens == b.tokens && a.edits == b.edits;
  }
};

// Parses M2 text: an "S <tokens>" line followed by zero or more
// "A start end|||type|||replacement|||...|||annotator" lines, sentences
// separated by blank lines. "-NONE-" replacements become empty strings;
// "noop" annotations are skipped. Throws DataError with a line number on
// malformed input.
std::vector<AnnotatedSentence> parse_m2(const std::string& text);
std::vector<AnnotatedSentence> parse_m2_file(const std::string& path);

// Renders a sentence back to M2 (type column "EDIT").
std::string to_m2(const AnnotatedSentence& s);

// Applies the gold edits of one annotator, right to left. Throws DataError
// if that annotator's edits overlap or run past the token count.
std::vector<std::string> apply_gold_edits(const AnnotatedSentence& s,
                                          int annotator = 0);

// Edits of one annotator, in file order.
std::vector<Edit> edits_of(const AnnotatedSentence& s, int annotator = 0);

// (source text, corrected text) pairs, detokenized with single spaces.
std::vector<std::pair<std::string, std::string>> training_pairs(
    const std::vector<AnnotatedSentence>& corpus, int annotator = 0);

std::string join_tokens(const std::vector<std::string>& tokens);
std::vector<std::string> split_tokens(const std::string& text);

}  // namespace textnorm
