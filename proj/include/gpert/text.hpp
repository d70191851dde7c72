#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gpert::text {

// All functions take and return UTF-8. Invalid byte sequences are replaced
// by U+FFFD before any further processing.

std::string nfc(std::string_view s);

// Unicode simple case folding, one code point at a time.
std::string casefold(std::string_view s);

// NFC + simple case folding; the key used for every case-insensitive compare.
std::string comparison_key(std::string_view s);

bool equal_casefold(std::string_view a, std::string_view b);

std::string trim(std::string_view s);

bool is_blank(std::string_view s);

// Maximal runs of non-whitespace code points after NFC normalization.
std::vector<std::string> tokens(std::string_view s);

// Tokenizer used by the n-gram metrics: NFC, case-folded, whitespace split,
// and every punctuation code point emitted as its own token.
std::vector<std::string> metric_tokens(std::string_view s);

}  // namespace gpert::text
