#include "textnorm/mle.hpp"

#include <fstream>

#include "textnorm/errors.hpp"

namespace textnorm {

namespace {

std::string normalize(const std::string& s) { return join_tokens(split_tokens(s)); }

std::string join_range(const std::vector<std::string>& toks, size_t a, size_t b) {
  std::string out;
  for (size_t k = a; k < b; ++k) {
    if (k > a) out += ' ';
    out += toks[k];
  }
  return out;
}

}  // namespace

ActionTable::ActionTable(size_t max_phrase) : max_phrase_(max_phrase) {
  if (max_phrase == 0) throw ConfigError("max_phrase must be positive");
}

const ActionTable::Stats* ActionTable::stats(const std::string& phrase) const {
  auto it = stats_.find(phrase);
  return it == stats_.end() ? nullptr : &it->second;
}

void ActionTable::add_sentence(const std::vector<std::string>& tokens,
                               const std::vector<Edit>& gold) {
  const size_t n = tokens.size();
  bool eos_insertion = false;
  // Edited intervals; an insertion claims the token it attaches to.
  std::vector<std::pair<size_t, size_t>> blocked;
  for (const Edit& e : gold) {
    if (e.end > n || e.start > e.end) throw DataError("edit span outside sentence");
    const std::string repl = normalize(e.replacement);
    if (e.start < e.end) {
      blocked.emplace_back(e.start, e.end);
      if (e.end - e.start <= max_phrase_) {
        stats_[join_range(tokens, e.start, e.end)].replace[repl] += 1;
      }
    } else if (!repl.empty()) {
      if (e.start == n) {
        eos_insertion = true;
        stats_[kEosKey].replace[repl] += 1;
      } else {
        blocked.emplace_back(e.start, e.start + 1);
        stats_[tokens[e.start]].replace[repl + " " + tokens[e.start]] += 1;
      }
    }
  }
  for (size_t i = 0; i < n; ++i) {
    for (size_t len = 1; len <= max_phrase_ && i + len <= n; ++len) {
      bool clean = true;
      for (const auto& [s, e] : blocked) {
        if (i < e && s < i + len) {
          clean = false;
          break;
        }
      }
      if (clean) stats_[join_range(tokens, i, i + len)].keep += 1;
    }
  }
  if (!eos_insertion) stats_[kEosKey].keep += 1;
}

ActionTable ActionTable::build(const std::vector<AnnotatedSentence>& corpus,
                               size_t max_phrase, int annotator) {
  ActionTable table(max_phrase);
  for (const AnnotatedSentence& s : corpus) {
    table.add_sentence(s.tokens, edits_of(s, annotator));
  }
  return table;
}

ActionTable::Action ActionTable::majority(const std::string& phrase) const {
  auto it = stats_.find(phrase);
  if (it == stats_.end()) return {};
  const Stats& st = it->second;
  Action a;
  a.known = true;
  size_t best = st.keep;  // ties fall to KEEP, then smaller replacement
  for (const auto& [repl, count] : st.replace) {
    if (count > best) {
      best = count;
      a.keep = false;
      a.replacement = repl;
    }
  }
  return a;
}

std::vector<std::string> ActionTable::apply(const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  const size_t n = tokens.size();
  size_t i = 0;
  while (i < n) {
    size_t advance = 1;
    bool handled = false;
    for (size_t len = std::min(max_phrase_, n - i); len >= 1; --len) {
      const std::string phrase = join_range(tokens, i, i + len);
      const Action a = majority(phrase);
      if (!a.known) continue;
      if (a.keep) {
        for (size_t k = 0; k < len; ++k) out.push_back(tokens[i + k]);
      } else {
        for (const std::string& t : split_tokens(a.replacement)) out.push_back(t);
      }
      advance = len;
      handled = true;
      break;
    }
    if (!handled) out.push_back(tokens[i]);
    i += advance;
  }
  const Action eos = majority(kEosKey);
  if (eos.known && !eos.keep) {
    for (const std::string& t : split_tokens(eos.replacement)) out.push_back(t);
  }
  return out;
}

void ActionTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write action table: " + path);
  f << max_phrase_ << "\n";
  for (const auto& [phrase, st] : stats_) {
    if (st.keep > 0) f << st.keep << "\tKEEP\t" << phrase << "\t\n";
    for (const auto& [repl, count] : st.replace) {
      f << count << "\tREPLACE\t" << phrase << "\t" << repl << "\n";
    }
  }
  if (!f) throw DataError("failed writing action table: " + path);
}

ActionTable ActionTable::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open action table: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty action table: " + path);
  size_t max_phrase = 0;
  try {
    max_phrase = std::stoul(line);
  } catch (const std::exception&) {
    throw DataError("bad action table header: " + line);
  }
  ActionTable table(max_phrase);
  size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t p1 = line.find('\t');
    size_t p2 = p1 == std::string::npos ? p1 : line.find('\t', p1 + 1);
    size_t p3 = p2 == std::string::npos ? p2 : line.find('\t', p2 + 1);
    if (p3 == std::string::npos) {
      throw DataError("bad action table line " + std::to_string(lineno));
    }
    size_t count = 0;
    try {
      count = std::stoul(line.substr(0, p1));
    } catch (const std::exception&) {
      throw DataError("bad count on action table line " + std::to_string(lineno));
    }
    const std::string action = line.substr(p1 + 1, p2 - p1 - 1);
    const std::string phrase = line.substr(p2 + 1, p3 - p2 - 1);
    const std::string repl = line.substr(p3 + 1);
    if (action == "KEEP") {
      table.stats_[phrase].keep += count;
    } else if (action == "REPLACE") {
      table.stats_[phrase].replace[repl] += count;
    } else {
      throw DataError("bad action on action table line " + std::to_string(lineno));
    }
  }
  return table;
}

}  // namespace textnorm
