#pragma once

#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the tokenizer, the protocol dedup key and answer
// normalization. Case folding covers ASCII, Latin-1, Latin Extended-A,
// Greek and Cyrillic; other scripts pass through unchanged.
namespace qagent::text {

/// Decodes one code point starting at `pos` and advances `pos`. Invalid
/// sequences decode as U+FFFD and consume a single byte.
char32_t next_codepoint(std::string_view s, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

char32_t fold_case(char32_t cp);

/// Letters and digits. Every code point above U+007F is treated as a letter
/// unless it falls in a known punctuation, symbol or space block.
bool is_alnum(char32_t cp);

bool is_space(char32_t cp);

std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

/// Replaces every run of whitespace with one ASCII space and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Splits on whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

/// Key used to decide whether two passages are the same text.
std::string passage_key(std::string_view s);

/// Crude token-count estimate: whitespace tokens x 1.3, rounded up.
std::size_t estimate_tokens(std::string_view s);

}  // namespace qagent::text
