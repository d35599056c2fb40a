#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capel/errors.hpp"
#include "capel/text_units.hpp"

#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace capel;

namespace {

// Independent oracle: split on ASCII whitespace, count pieces containing
// at least one ASCII alphanumeric character.
std::size_t oracle_word_count(const std::string& text) {
    std::istringstream ss(text);
    std::string piece;
    std::size_t n = 0;
    while (ss >> piece) {
        for (char c : piece) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                ++n;
                break;
            }
        }
    }
    return n;
}

}  // namespace

TEST_CASE("english word counting basics") {
    CHECK(count_english_words("") == 0);
    CHECK(count_english_words("   \t\n ") == 0);
    CHECK(count_english_words("hello") == 1);
    CHECK(count_english_words("hello, world!") == 2);
    CHECK(count_english_words("state-of-the-art design") == 2);  // hyphenated = one word
    CHECK(count_english_words("it's a 42-year-old oak") == 4);
    CHECK(count_english_words("- -- ... !!") == 0);  // bare punctuation runs
    CHECK(count_english_words("one\ntwo\tthree") == 3);
    CHECK(count_english_words("a") == 1);
}

TEST_CASE("english tokenizer spans carry offsets and surfaces") {
    const auto spans = tokenize_english("  How's  everything?");
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].surface == "How's");
    CHECK(spans[0].start == 2);
    CHECK(spans[1].surface == "everything?");
    CHECK(spans[1].start == 9);
}

TEST_CASE("english counting matches the whitespace-split oracle on fuzzed text") {
    std::mt19937 rng(20240817);
    const std::vector<std::string> pieces = {
        "word", "two-part", "it's", "42", "x9y", "hello,", "(end)", "--", "...",
        "!?", "O'Neill", "a",
    };
    const std::vector<std::string> gaps = {" ", "  ", "\t", "\n", " \n "};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const int n = static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            text += pieces[rng() % pieces.size()];
            text += gaps[rng() % gaps.size()];
        }
        CAPTURE(text);
        CHECK(count_english_words(text) == oracle_word_count(text));
    }
}

TEST_CASE("cjk character counting") {
    CHECK(count_cjk_characters("") == 0);
    CHECK(count_cjk_characters("今天天气好") == 5);
    CHECK(count_cjk_characters("今天 天气 好") == 5);  // whitespace never counts
    CHECK(count_cjk_characters("abc def") == 0);       // ASCII never counts
    CHECK(count_cjk_characters("今天abc") == 2);

    SUBCASE("punctuation policy") {
        CHECK(count_cjk_characters("你好。") == 3);  // default includes CJK punctuation
        CHECK(count_cjk_characters("你好。", CjkCountPolicy{false}) == 2);
        CHECK(count_cjk_characters("你好！？", CjkCountPolicy{false}) == 2);
    }

    SUBCASE("kana, hangul, fullwidth alphanumerics count") {
        CHECK(count_cjk_characters("こんにちは") == 5);
        CHECK(count_cjk_characters("한국") == 2);
        CHECK(count_cjk_characters("１２Ａ") == 3);
    }

    SUBCASE("countdown markers never count") {
        CHECK(count_cjk_characters("<5>今<4>天<3>天<2>气<1>好<0>") == 5);
        CHECK(count_cjk_characters("<12>好<11>") == 1);
    }

    SUBCASE("combining marks are skipped") {
        // An ideograph followed by U+0301 still counts once.
        CHECK(count_cjk_characters("好\xCC\x81") == 1);
    }
}

TEST_CASE("measure_length dispatch") {
    CHECK(measure_length("three small words", TokenUnit::EnglishWord) == 3);
    CHECK(measure_length("今天好", TokenUnit::CjkCharacter) == 3);
    CHECK_THROWS_AS(measure_length("x\ny\n", TokenUnit::CodeLine),
                    UnsupportedUnitError);
}

TEST_CASE("utf-8 decoding") {
    std::size_t pos = 0;
    CHECK(decode_utf8("A", pos) == U'A');
    CHECK(pos == 1);

    pos = 0;
    CHECK(decode_utf8("\xE4\xB8\xAD", pos) == 0x4E2D);
    CHECK(pos == 3);

    SUBCASE("invalid bytes decode as replacement and advance by one") {
        pos = 0;
        CHECK(decode_utf8("\xFF", pos) == 0xFFFD);
        CHECK(pos == 1);
        pos = 0;
        CHECK(decode_utf8("\xE4\xB8", pos) == 0xFFFD);  // truncated sequence
        CHECK(pos == 1);
    }
}

TEST_CASE("cjk classification helpers") {
    CHECK(is_cjk_ideograph(0x4E2D));
    CHECK_FALSE(is_cjk_ideograph(U'A'));
    CHECK(is_cjk_punctuation(0x3002));  // ideographic full stop
    CHECK_FALSE(is_cjk_punctuation(0x4E2D));
}
