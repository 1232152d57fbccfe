#include "textnorm/inference.hpp"

#include "textnorm/utf8.hpp"

namespace textnorm {

namespace {

// Copies of the unit cps[i, i+len) starting at i, the first included.
size_t run_length(const std::vector<char32_t>& cps, size_t i, size_t len) {
  size_t k = 1;
  while (i + (k + 1) * len <= cps.size()) {
    bool same = true;
    for (size_t j = 0; j < len && same; ++j) {
      same = cps[i + k * len + j] == cps[i + j];
    }
    if (!same) break;
    ++k;
  }
  return k;
}

}  // namespace

std::string clamp_repetitions(const std::string& text, size_t max_reps) {
  if (max_reps == 0) throw ConfigError("max_reps must be positive");
  std::vector<char32_t> cps = utf8_decode(text);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<char32_t> out;
    out.reserve(cps.size());
    size_t i = 0;
    while (i < cps.size()) {
      // A clampable run needs max_reps + 1 copies, so the unit can be at
      // most 1/(max_reps + 1) of the text; shortest unit wins.
      const size_t max_unit =
          std::min(cps.size() / (max_reps + 1), (cps.size() - i) / (max_reps + 1));
      bool clamped = false;
      for (size_t len = 1; len <= max_unit; ++len) {
        const size_t k = run_length(cps, i, len);
        if (k > max_reps) {
          for (size_t r = 0; r < max_reps; ++r) {
            out.insert(out.end(), cps.begin() + static_cast<long>(i),
                       cps.begin() + static_cast<long>(i + len));
          }
          i += k * len;
          changed = true;
          clamped = true;
          break;
        }
      }
      if (!clamped) out.push_back(cps[i++]);
    }
    cps = std::move(out);
  }
  return utf8_encode(cps);
}

}  // namespace textnorm
