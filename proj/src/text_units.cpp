#include "capel/text_units.hpp"

#include "capel/errors.hpp"

#include <cctype>

namespace capel {

const char* to_string(TokenUnit unit) {
    switch (unit) {
        case TokenUnit::EnglishWord: return "words";
        case TokenUnit::CjkCharacter: return "characters";
        case TokenUnit::CodeLine: return "code-lines";
    }
    return "?";
}

char32_t decode_utf8(std::string_view text, std::size_t& pos) {
    const unsigned char b0 = static_cast<unsigned char>(text[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
    else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
    else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
    else { ++pos; return 0xFFFD; }

    if (pos + static_cast<std::size_t>(len) > text.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i < len; ++i) {
        const unsigned char b = static_cast<unsigned char>(text[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += static_cast<std::size_t>(len);
    return cp;
}

namespace {

bool is_unicode_space(char32_t cp) {
    if (cp <= 0x7F) return std::isspace(static_cast<int>(cp)) != 0;
    return cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
           cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

bool is_combining_mark(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x20D0 && cp <= 0x20FF) ||
           (cp >= 0xFE20 && cp <= 0xFE2F);
}

// Non-ASCII punctuation blocks that never promote a run to a word.
bool is_nonword_punct(char32_t cp) {
    return (cp >= 0x2000 && cp <= 0x206F) ||  // general punctuation
           (cp >= 0x00A1 && cp <= 0x00BF) ||  // latin-1 punctuation/symbols
           (cp >= 0x2E00 && cp <= 0x2E7F) ||
           is_cjk_punctuation(cp);
}

// A run is a word if it carries at least one letter or digit.
bool run_is_word(std::string_view run) {
    std::size_t pos = 0;
    while (pos < run.size()) {
        const char32_t cp = decode_utf8(run, pos);
        if (cp <= 0x7F) {
            if (std::isalnum(static_cast<int>(cp))) return true;
        } else if (!is_nonword_punct(cp) && !is_combining_mark(cp)) {
            return true;
        }
    }
    return false;
}

bool is_fullwidth_alnum(char32_t cp) {
    return (cp >= 0xFF10 && cp <= 0xFF19) ||  // fullwidth digits
           (cp >= 0xFF21 && cp <= 0xFF3A) || (cp >= 0xFF41 && cp <= 0xFF5A);
}

bool is_kana_or_hangul(char32_t cp) {
    return (cp >= 0x3040 && cp <= 0x30FF) || (cp >= 0x31F0 && cp <= 0x31FF) ||
           (cp >= 0xAC00 && cp <= 0xD7AF) || (cp >= 0x1100 && cp <= 0x11FF);
}

// `<digits>` at `pos`; returns length of the marker or 0.
std::size_t marker_length_at(std::string_view text, std::size_t pos) {
    if (pos >= text.size() || text[pos] != '<') return 0;
    std::size_t i = pos + 1;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == pos + 1 || i >= text.size() || text[i] != '>') return 0;
    return i - pos + 1;
}

}  // namespace

bool is_cjk_ideograph(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2A6DF) ||
           (cp >= 0x2A700 && cp <= 0x2EBEF);
}

bool is_cjk_punctuation(char32_t cp) {
    return (cp >= 0x3001 && cp <= 0x303F) ||  // CJK symbols (3000 is whitespace)
           (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
           (cp >= 0xFE30 && cp <= 0xFE4F) ||
           cp == 0x2014 || cp == 0x2018 || cp == 0x2019 || cp == 0x201C ||
           cp == 0x201D || cp == 0x2026;
}

std::vector<TokenSpan> tokenize_english(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t probe = pos;
        if (is_unicode_space(decode_utf8(text, probe))) {
            pos = probe;
            continue;
        }
        const std::size_t start = pos;
        while (pos < text.size()) {
            probe = pos;
            if (is_unicode_space(decode_utf8(text, probe))) break;
            pos = probe;
        }
        std::string_view run = text.substr(start, pos - start);
        if (run_is_word(run)) {
            spans.push_back({std::string(run), start, TokenUnit::EnglishWord});
        }
    }
    return spans;
}

std::size_t count_english_words(std::string_view text) {
    return tokenize_english(text).size();
}

std::size_t count_cjk_characters(std::string_view text, const CjkCountPolicy& policy) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        // Countdown markers never count.
        if (const std::size_t mlen = marker_length_at(text, pos)) {
            pos += mlen;
            continue;
        }
        const char32_t cp = decode_utf8(text, pos);
        if (is_unicode_space(cp) || is_combining_mark(cp)) continue;
        if (is_cjk_ideograph(cp) || is_kana_or_hangul(cp) || is_fullwidth_alnum(cp)) {
            ++count;
        } else if (policy.include_punctuation && is_cjk_punctuation(cp)) {
            ++count;
        }
    }
    return count;
}

std::size_t measure_length(std::string_view text, TokenUnit unit) {
    switch (unit) {
        case TokenUnit::EnglishWord: return count_english_words(text);
        case TokenUnit::CjkCharacter: return count_cjk_characters(text);
        case TokenUnit::CodeLine: break;
    }
    throw UnsupportedUnitError(
        "code-line lengths are produced only by the marker parser");
}

}  // namespace capel
