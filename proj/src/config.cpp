#include "textnorm/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "textnorm/errors.hpp"

namespace textnorm {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + v);
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "d_ce") {
    d_ce = parse_u64(key, value);
  } else if (key == "d_hidden") {
    d_hidden = parse_u64(key, value);
  } else if (key == "dropout") {
    dropout = parse_f64(key, value);
  } else if (key == "sampling") {
    sampling = parse_f64(key, value);
  } else if (key == "lr") {
    lr = parse_f64(key, value);
  } else if (key == "beta1") {
    beta1 = parse_f64(key, value);
  } else if (key == "beta2") {
    beta2 = parse_f64(key, value);
  } else if (key == "epsilon") {
    epsilon = parse_f64(key, value);
  } else if (key == "clip") {
    clip = parse_f64(key, value);
  } else if (key == "epochs") {
    epochs = parse_u64(key, value);
  } else if (key == "batch") {
    batch = parse_u64(key, value);
  } else if (key == "beam") {
    beam = parse_u64(key, value);
  } else if (key == "max_chars") {
    max_chars = parse_u64(key, value);
  } else if (key == "length_normalize") {
    length_normalize = parse_bool(key, value);
  } else if (key == "embed_mode") {
    if (value != "none" && value != "whole_word" && value != "subword") {
      throw ConfigError("embed_mode must be none, whole_word, or subword");
    }
    embed_mode = value;
  } else if (key == "embed_file") {
    embed_file = value;
  } else if (key == "embed_file2") {
    embed_file2 = value;
  } else if (key == "merge_window") {
    merge_window = parse_u64(key, value);
  } else if (key == "mle_phrase") {
    mle_phrase = parse_u64(key, value);
  } else if (key == "embed_dim") {
    embed_dim = parse_u64(key, value);
  } else if (key == "embed_window") {
    embed_window = parse_u64(key, value);
  } else if (key == "embed_subwords") {
    embed_subwords = parse_bool(key, value);
  } else if (key == "embed_minn") {
    embed_minn = parse_u64(key, value);
  } else if (key == "embed_maxn") {
    embed_maxn = parse_u64(key, value);
  } else if (key == "embed_buckets") {
    embed_buckets = parse_u64(key, value);
  } else if (key == "embed_negatives") {
    embed_negatives = parse_u64(key, value);
  } else if (key == "embed_epochs") {
    embed_epochs = parse_u64(key, value);
  } else if (key == "embed_lr") {
    embed_lr = parse_f64(key, value);
  } else {
    throw ConfigError("unknown configuration key: " + key);
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("missing '=' on config line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("empty key or value on config line " + std::to_string(lineno));
    }
    set(key, value);
  }
}

std::string RunConfig::resolved() const {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  kv("seed", std::to_string(seed));
  kv("d_ce", std::to_string(d_ce));
  kv("d_hidden", std::to_string(d_hidden));
  kv("dropout", fmt_f64(dropout));
  kv("sampling", fmt_f64(sampling));
  kv("lr", fmt_f64(lr));
  kv("beta1", fmt_f64(beta1));
  kv("beta2", fmt_f64(beta2));
  kv("epsilon", fmt_f64(epsilon));
  kv("clip", fmt_f64(clip));
  kv("epochs", std::to_string(epochs));
  kv("batch", std::to_string(batch));
  kv("beam", std::to_string(beam));
  kv("max_chars", std::to_string(max_chars));
  kv("length_normalize", length_normalize ? "true" : "false");
  kv("embed_mode", embed_mode);
  if (!embed_file.empty()) kv("embed_file", embed_file);
  if (!embed_file2.empty()) kv("embed_file2", embed_file2);
  kv("merge_window", std::to_string(merge_window));
  kv("mle_phrase", std::to_string(mle_phrase));
  kv("embed_dim", std::to_string(embed_dim));
  kv("embed_window", std::to_string(embed_window));
  kv("embed_subwords", embed_subwords ? "true" : "false");
  kv("embed_minn", std::to_string(embed_minn));
  kv("embed_maxn", std::to_string(embed_maxn));
  kv("embed_buckets", std::to_string(embed_buckets));
  kv("embed_negatives", std::to_string(embed_negatives));
  kv("embed_epochs", std::to_string(embed_epochs));
  kv("embed_lr", fmt_f64(embed_lr));
  return out;
}

}  // namespace textnorm
