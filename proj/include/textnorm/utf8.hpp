#pragma once

#include <string>
#include <vector>

namespace textnorm {

// Decodes UTF-8 to codepoints. Throws DataError on malformed input.
std::vector<char32_t> utf8_decode(const std::string& s);

std::string utf8_encode(char32_t cp);
std::string utf8_encode(const std::vector<char32_t>& cps);

// Number of codepoints in a UTF-8 string.
size_t utf8_length(const std::string& s);

}  // namespace textnorm
