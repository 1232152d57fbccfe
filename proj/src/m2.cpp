#include "textnorm/m2.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "textnorm/errors.hpp"

namespace textnorm {

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = s.find("|||", pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 3;
  }
  return out;
}

[[noreturn]] void fail(size_t line_no, const std::string& what) {
  throw DataError("m2 parse error at line " + std::to_string(line_no) + ": " + what);
}

long parse_long(const std::string& s, size_t line_no, const char* what) {
  try {
    size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) fail(line_no, std::string("bad ") + what);
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    fail(line_no, std::string("bad ") + what);
  }
}

}  // namespace

std::vector<AnnotatedSentence> parse_m2(const std::string& text) {
  std::vector<AnnotatedSentence> out;
  bool in_block = false;
  AnnotatedSentence cur;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in_block) {
        out.push_back(std::move(cur));
        cur = {};
        in_block = false;
      }
      continue;
    }
    if (line[0] == 'S' && (line.size() == 1 || line[1] == ' ')) {
      if (in_block) fail(line_no, "second S line inside a sentence block");
      cur.tokens = split_tokens(line.size() > 1 ? line.substr(2) : "");
      in_block = true;
      continue;
    }
    if (line.rfind("A ", 0) == 0) {
      if (!in_block) fail(line_no, "A line before any S line");
      const auto fields = split_fields(line.substr(2));
      if (fields.size() < 6) fail(line_no, "A line needs at least 6 |||-separated fields");
      const auto span = split_tokens(fields[0]);
      if (span.size() != 2) fail(line_no, "A line span must be 'start end'");
      const long start = parse_long(span[0], line_no, "start offset");
      const long end = parse_long(span[1], line_no, "end offset");
      const std::string& type = fields[1];
      if (type == "noop") continue;
      if (start < 0 || end < start) fail(line_no, "bad edit span");
      Edit e;
      e.start = static_cast<size_t>(start);
      e.end = static_cast<size_t>(end);
      e.replacement = fields[2] == "-NONE-" ? "" : fields[2];
      e.annotator = static_cast<int>(parse_long(fields.back(), line_no, "annotator id"));
      cur.edits.push_back(std::move(e));
      continue;
    }
    fail(line_no, "expected S line, A line or blank line");
  }
  if (in_block) out.push_back(std::move(cur));
  return out;
}

std::vector<AnnotatedSentence> parse_m2_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open m2 file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_m2(buf.str());
}

std::string to_m2(const AnnotatedSentence& s) {
  std::ostringstream out;
  out << "S " << join_tokens(s.tokens) << "\n";
  for (const Edit& e : s.edits) {
    out << "A " << e.start << " " << e.end << "|||EDIT|||"
        << (e.replacement.empty() ? "-NONE-" : e.replacement)
        << "|||REQUIRED|||-NONE-|||" << e.annotator << "\n";
  }
  out << "\n";
  return out.str();
}

std::vector<Edit> edits_of(const AnnotatedSentence& s, int annotator) {
  std::vector<Edit> out;
  for (const Edit& e : s.edits) {
    if (e.annotator == annotator) out.push_back(e);
  }
  return out;
}

std::vector<std::string> apply_gold_edits(const AnnotatedSentence& s,
                                          int annotator) {
  std::vector<Edit> edits = edits_of(s, annotator);
  std::stable_sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  for (size_t i = 0; i < edits.size(); ++i) {
    if (edits[i].end > s.tokens.size()) {
      throw DataError("edit span past end of sentence");
    }
    if (i > 0 && edits[i].start < edits[i - 1].end) {
      throw DataError("overlapping gold edits");
    }
  }
  std::vector<std::string> tokens = s.tokens;
  for (size_t i = edits.size(); i-- > 0;) {
    const Edit& e = edits[i];
    const auto repl = split_tokens(e.replacement);
    tokens.erase(tokens.begin() + static_cast<long>(e.start),
                 tokens.begin() + static_cast<long>(e.end));
    tokens.insert(tokens.begin() + static_cast<long>(e.start), repl.begin(),
                  repl.end());
  }
  return tokens;
}

std::vector<std::pair<std::string, std::string>> training_pairs(
    const std::vector<AnnotatedSentence>& corpus, int annotator) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    out.emplace_back(join_tokens(s.tokens), join_tokens(apply_gold_edits(s, annotator)));
  }
  return out;
}

}  // namespace textnorm
