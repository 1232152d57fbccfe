#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace textnorm {

// Character vocabulary with four reserved ids. Non-reserved characters
// are Unicode codepoints; build() assigns their ids in codepoint order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kOov = 3;
  static constexpr size_t kReserved = 4;

  Vocabulary() = default;

  // Restores a vocabulary from an explicit codepoint order (checkpoints).
  explicit Vocabulary(std::vector<char32_t> chars);

  // Collects every character of the given texts, sorted by codepoint.
  // Throws DataError if no characters are found.
  static Vocabulary build(const std::vector<std::string>& texts);

  // Encodes UTF-8 text to ids; unknown characters map to kOov. No SOS or
  // EOS is added.
  std::vector<int> encode(const std::string& text) const;

  // Decodes ids back to text. PAD/SOS/EOS are skipped; OOV becomes U+FFFD.
  std::string decode(const std::vector<int>& ids) const;

  size_t size() const { return kReserved + chars_.size(); }
  int id_of(char32_t cp) const;
  const std::vector<char32_t>& chars() const { return chars_; }

 private:
  std::vector<char32_t> chars_;  // id = kReserved + index
  std::unordered_map<char32_t, int> ids_;
};

}  // namespace textnorm
