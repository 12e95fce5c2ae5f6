#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace verse::text {

std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);
std::string to_utf8(char32_t c);

// Unicode NFC normalization.
std::string nfc(std::string_view utf8);
// NFC followed by full lowercase mapping.
std::string fold(std::string_view utf8);

bool is_space(char32_t c);
// Letter or digit, per Unicode general category.
bool is_alnum(char32_t c);

// Splits on Unicode whitespace; no empty tokens.
std::vector<std::string> split_ws(std::string_view utf8);
// Collapses whitespace runs to one ASCII space and trims both ends.
std::string normalize_ws(std::string_view utf8);

}  // namespace verse::text
