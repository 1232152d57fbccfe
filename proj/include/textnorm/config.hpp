#pragma once

#include <cstdint>
#include <string>

namespace textnorm {

// Flat run configuration shared by the command-line tools. Files use
// `key = value` lines; '#' starts a comment; unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 42;
  size_t d_ce = 128;
  size_t d_hidden = 256;
  double dropout = 0.1;
  double sampling = 0.35;
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip = 10.0;
  size_t epochs = 30;
  size_t batch = 128;
  size_t beam = 5;
  size_t max_chars = 400;
  bool length_normalize = false;
  std::string embed_mode = "none";  // none | whole_word | subword
  std::string embed_file;           // primary vector file
  std::string embed_file2;          // optional second vector file
  size_t merge_window = 4;
  size_t mle_phrase = 4;
  size_t embed_dim = 300;
  size_t embed_window = 5;
  bool embed_subwords = true;
  size_t embed_minn = 2;
  size_t embed_maxn = 6;
  size_t embed_buckets = 2000;
  size_t embed_negatives = 5;
  size_t embed_epochs = 5;
  double embed_lr = 0.05;

  // Parses one assignment; throws ConfigError on unknown keys/bad values.
  void set(const std::string& key, const std::string& value);

  void load_file(const std::string& path);

  // Canonical key=value rendering, parseable by load_file.
  std::string resolved() const;
};

}  // namespace textnorm
