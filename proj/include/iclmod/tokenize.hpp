#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace iclmod {

// Tokenization for the mixed Chinese/English corpus: contiguous ASCII
// letter/digit runs become one lowercased token, every CJK codepoint (Han,
// Kana, Hangul and the compatibility blocks) becomes its own token, and
// everything else separates. Invalid UTF-8 bytes separate as well.
std::vector<std::string> tokenize(std::string_view text);

bool is_cjk_codepoint(char32_t cp);

// Decodes the next UTF-8 codepoint at `i` in `s`; advances `i` past it.
// Invalid bytes yield U+FFFD and advance by one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i);

// Truncates to at most `max_bytes` without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);

}  // namespace iclmod
