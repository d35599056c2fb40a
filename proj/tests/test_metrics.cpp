#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capel/errors.hpp"
#include "capel/llm_gateway.hpp"
#include "capel/metrics.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace capel;

namespace {

// Independent brute-force aggregator used as the oracle.
struct Oracle {
    double em = 0, mae = 0, mald = 0;
};

Oracle brute_force(const std::vector<LengthRecord>& rs) {
    Oracle o;
    for (const auto& r : rs) {
        const double err = std::abs(double(r.achieved) - double(r.target));
        if (err == 0) o.em += 1;
        o.mae += err;
        o.mald += err / double(r.target);
    }
    const double n = double(rs.size());
    o.em /= n;
    o.mae /= n;
    o.mald /= n;
    return o;
}

}  // namespace

TEST_CASE("frozen metric values") {
    const std::vector<LengthRecord> one = {{10, 12, {}}};
    CHECK(mald(one) == doctest::Approx(0.2).epsilon(1e-15));
    const std::vector<LengthRecord> two = {{10, 12, {}}, {10, 8, {}}};
    CHECK(mae(two) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(exact_match(two) == 0.0);
    const std::vector<LengthRecord> hit = {{7, 7, {}}, {7, 9, {}}};
    CHECK(exact_match(hit) == 0.5);
}

TEST_CASE("aggregates match a brute-force oracle on random record sets") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<LengthRecord> rs;
        const int n = 1 + int(rng() % 50);
        for (int i = 0; i < n; ++i) {
            const long target = 1 + long(rng() % 500);
            const long achieved = long(rng() % 600);
            rs.push_back({target, achieved, {}});
        }
        const Oracle o = brute_force(rs);
        CHECK(std::abs(exact_match(rs) - o.em) < 1e-12);
        CHECK(std::abs(mae(rs) - o.mae) < 1e-12);
        CHECK(std::abs(mald(rs) - o.mald) < 1e-12);
    }
}

TEST_CASE("aggregate error handling") {
    const std::vector<LengthRecord> empty;
    CHECK_THROWS_AS(exact_match(empty), EmptyInputError);
    CHECK_THROWS_AS(mae(empty), EmptyInputError);
    CHECK_THROWS_AS(mald(empty), EmptyInputError);
    const std::vector<LengthRecord> bad = {{0, 3, {}}};
    CHECK_THROWS_AS(mald(bad), InvalidArgumentsError);
    CHECK_THROWS_AS(lifebench_scores(bad), InvalidArgumentsError);
}

TEST_CASE("length-deviation and length-score") {
    SUBCASE("default mapping: 100 at zero, 0 at full deviation, clamped") {
        LengthScoreMapping m;
        CHECK(m.score(0.0) == 100.0);
        CHECK(m.score(0.5) == doctest::Approx(50.0));
        CHECK(m.score(1.0) == 0.0);
        CHECK(m.score(3.0) == 0.0);
        CHECK(m.score(-0.1) == 100.0);
    }
    SUBCASE("custom knots interpolate piecewise") {
        LengthScoreMapping m;
        m.knots = {{0.0, 100.0}, {0.2, 80.0}, {1.0, 0.0}};
        CHECK(m.score(0.1) == doctest::Approx(90.0));
        CHECK(m.score(0.6) == doctest::Approx(40.0));
    }
    SUBCASE("absolute deviation by default, signed on request") {
        const std::vector<LengthRecord> rs = {{100, 90, {}}, {100, 110, {}}};
        auto [ld_abs, ls] = lifebench_scores(rs);
        CHECK(ld_abs == doctest::Approx(10.0));  // 100 * mean(|±0.1|)
        CHECK(ls == doctest::Approx(90.0));
        auto [ld_signed, ls2] = lifebench_scores(rs, {.signed_deviation = true});
        CHECK(ld_signed == doctest::Approx(0.0));
        CHECK(ls2 == doctest::Approx(90.0));  // score always uses |dev|
    }
    SUBCASE("perfect records") {
        const std::vector<LengthRecord> rs = {{50, 50, {}}, {8, 8, {}}};
        auto [ld, ls] = lifebench_scores(rs);
        CHECK(ld == 0.0);
        CHECK(ls == 100.0);
    }
}

TEST_CASE("compliance summary bundles all five metrics") {
    const std::vector<LengthRecord> rs = {{10, 12, {}}, {10, 8, {}}, {10, 10, {}}};
    const ComplianceSummary s = summarize_compliance(rs);
    CHECK(s.n == 3);
    CHECK(s.em == doctest::Approx(1.0 / 3.0));
    CHECK(s.mae == doctest::Approx(4.0 / 3.0));
    CHECK(s.mald == doctest::Approx(0.4 / 3.0));
    CHECK(s.ld == doctest::Approx(100.0 * 0.4 / 3.0));
}

TEST_CASE("rouge on identical and hand-computed pairs") {
    SUBCASE("identical texts score 1.0 on every variant") {
        const RougeScores s = rouge("The quick brown fox.", "The quick brown fox.");
        CHECK(s.rouge1.f1 == doctest::Approx(1.0));
        CHECK(s.rouge2.f1 == doctest::Approx(1.0));
        CHECK(s.rougeL.f1 == doctest::Approx(1.0));
    }
    SUBCASE("the cat sat vs the cat ran") {
        const RougeScores s = rouge("the cat sat", "the cat ran");
        CHECK(std::abs(s.rouge1.f1 - 2.0 / 3.0) < 1e-9);
        CHECK(s.rouge2.f1 == doctest::Approx(0.5));   // 1 of 2 bigrams
        CHECK(s.rougeL.f1 == doctest::Approx(2.0 / 3.0));  // LCS "the cat"
    }
    SUBCASE("case and edge punctuation are normalized away") {
        const RougeScores s = rouge("The CAT sat.", "the cat sat");
        CHECK(s.rouge1.f1 == doctest::Approx(1.0));
    }
    SUBCASE("clipped counts: repeated candidate tokens do not inflate matches") {
        const RougeScores s = rouge("dog dog dog dog", "dog");
        CHECK(s.rouge1.precision == doctest::Approx(0.25));
        CHECK(s.rouge1.recall == doctest::Approx(1.0));
    }
    SUBCASE("disjoint texts score zero") {
        const RougeScores s = rouge("alpha beta", "gamma delta");
        CHECK(s.rouge1.f1 == 0.0);
        CHECK(s.rougeL.f1 == 0.0);
    }
    SUBCASE("empty reference is undefined") {
        CHECK_THROWS_AS(rouge("anything", "..."), UndefinedScoreError);
        CHECK_THROWS_AS(rouge("anything", ""), UndefinedScoreError);
    }
    SUBCASE("empty candidate scores zero, not an error") {
        const RougeScores s = rouge("", "the reference text");
        CHECK(s.rouge1.f1 == 0.0);
    }
}

TEST_CASE("single-answer judging") {
    SUBCASE("parses the double-bracket rating") {
        ScriptedMockBackend judge(
            "judge", std::vector<std::string>{"Decent answer. Rating: [[7]]"});
        CHECK(judge_single_answer("Q?", "A.", judge) == doctest::Approx(7.0));
    }
    SUBCASE("fractional ratings parse") {
        ScriptedMockBackend judge("judge",
                                  std::vector<std::string>{"Rating: [[7.5]]"});
        CHECK(judge_single_answer("Q?", "A.", judge) == doctest::Approx(7.5));
    }
    SUBCASE("missing or out-of-range rating throws") {
        ScriptedMockBackend none("judge", std::vector<std::string>{"No verdict."});
        CHECK_THROWS_AS(judge_single_answer("Q?", "A.", none), JudgeParseError);
        ScriptedMockBackend high("judge", std::vector<std::string>{"[[11]]"});
        CHECK_THROWS_AS(judge_single_answer("Q?", "A.", high), JudgeParseError);
    }
    SUBCASE("the grading prompt embeds question and answer") {
        std::string seen;
        ScriptedMockBackend judge("judge",
                                  [&seen](int, const ChatRequest& req) {
                                      seen = req.user;
                                      return std::string("Rating: [[5]]");
                                  });
        judge_single_answer("What is a fjord?", "A glacial inlet.", judge);
        CHECK(seen.find("What is a fjord?") != std::string::npos);
        CHECK(seen.find("A glacial inlet.") != std::string::npos);
        CHECK(seen.find("impartial judge") != std::string::npos);
        CHECK(seen.find("{question}") == std::string::npos);
    }
}
