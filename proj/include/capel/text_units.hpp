#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace capel {

/// What "one token" means in a given measurement context.
enum class TokenUnit {
    EnglishWord,   // whitespace-delimited word
    CjkCharacter,  // one countable CJK character
    CodeLine,      // one complete code line (marker grammar only)
};

const char* to_string(TokenUnit unit);

struct TokenSpan {
    std::string surface;  // never empty
    std::size_t start = 0;  // byte offset into the source text
    TokenUnit unit = TokenUnit::EnglishWord;
};

/// A requested length budget: "exactly `value` units".
struct LengthTarget {
    int value = 1;  // >= 1
    TokenUnit unit = TokenUnit::EnglishWord;

    bool operator==(const LengthTarget&) const = default;
};

/// Counting policy for Chinese text. The default counts CJK ideographs,
/// kana/hangul, fullwidth alphanumerics, and CJK punctuation; whitespace
/// and ASCII never count.
struct CjkCountPolicy {
    bool include_punctuation = true;
};

/// Splits text into whitespace-delimited English word tokens. A run counts
/// as a word only if it contains at least one letter or digit; bare
/// punctuation runs are skipped. Total function: whitespace-only input
/// yields an empty list.
std::vector<TokenSpan> tokenize_english(std::string_view text);

std::size_t count_english_words(std::string_view text);

/// Counts countable characters per the policy. Whitespace and countdown
/// markers (`<digits>`) never count; combining marks are skipped so counts
/// do not depend on composed vs decomposed source encoding.
std::size_t count_cjk_characters(std::string_view text,
                                 const CjkCountPolicy& policy = {});

/// Dispatches to the counter matching `unit`.
/// Throws UnsupportedUnitError for CodeLine: code-line lengths only exist
/// inside the marker grammar.
std::size_t measure_length(std::string_view text, TokenUnit unit);

// --- UTF-8 helpers shared by the counters and the parser ---

/// Decodes the codepoint starting at `pos`; advances `pos` past it.
/// Invalid bytes decode as U+FFFD and advance by one.
char32_t decode_utf8(std::string_view text, std::size_t& pos);

bool is_cjk_ideograph(char32_t cp);
bool is_cjk_punctuation(char32_t cp);

}  // namespace capel
