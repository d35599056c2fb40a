#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capel/bbmh.hpp"
#include "capel/errors.hpp"
#include "capel/llm_gateway.hpp"

#include <string>
#include <vector>

using namespace capel;

namespace {

std::string words(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

const LengthTarget w10{10, TokenUnit::EnglishWord};

// Backend whose reply lengths follow a fixed schedule, repeating the last.
ScriptedMockBackend schedule_backend(std::vector<int> lengths) {
    return ScriptedMockBackend(
        "sched", [lengths = std::move(lengths)](int call, const ChatRequest&) {
            const std::size_t i =
                std::min<std::size_t>(static_cast<std::size_t>(call),
                                      lengths.size() - 1);
            return words(lengths[i]);
        });
}

}  // namespace

TEST_CASE("terminates on the call that hits the exact length") {
    for (int k : {1, 5, 15}) {
        std::vector<int> lengths(static_cast<std::size_t>(k), 7);  // under target
        lengths.back() = 10;
        auto backend = schedule_backend(lengths);
        const MhOutcome out = run_bbmh(backend, "Task.", w10,
                                       MhVariant::IterativeAcceptance, {});
        CAPTURE(k);
        CHECK(out.iterations_used == k);
        CHECK(out.exact);
        CHECK(out.achieved == 10);
        CHECK(backend.calls() == k);
    }
}

TEST_CASE("never-exact backends stop at the step cap") {
    auto backend = schedule_backend({7});
    const MhOutcome out =
        run_bbmh(backend, "Task.", w10, MhVariant::IterativeAcceptance, {});
    CHECK(out.iterations_used == 15);
    CHECK_FALSE(out.exact);
    CHECK(out.achieved == 7);
}

TEST_CASE("over-length proposals are discarded before acceptance") {
    SUBCASE("late exact match after rejected long proposals") {
        auto backend = schedule_backend({14, 13, 10});
        const MhOutcome out =
            run_bbmh(backend, "Task.", w10, MhVariant::IterativeAcceptance, {});
        CHECK(out.exact);
        CHECK(out.iterations_used == 3);
        CHECK(out.acceptance_tests == 0);  // first two never entered the ratio
    }
    SUBCASE("all proposals over-length falls back to the first reply") {
        auto backend = schedule_backend({25});
        const MhOutcome out =
            run_bbmh(backend, "Task.", w10, MhVariant::IterativeAcceptance, {});
        CHECK_FALSE(out.exact);
        CHECK(out.iterations_used == 15);
        CHECK(out.achieved == 25);
        CHECK(out.final_reply == words(25));
    }
}

TEST_CASE("best absolute error never increases across steps") {
    auto backend = schedule_backend({4, 8, 6, 9, 5, 9, 9});
    const MhOutcome out =
        run_bbmh(backend, "Task.", w10, MhVariant::IterativeAcceptance, {});
    CHECK(out.achieved == 9);  // best seen, |9-10| = 1
    long best = 1 << 20;
    for (const MhExchange& ex : out.history) {
        if (ex.achieved > 10) continue;
        best = std::min(best, std::labs(ex.achieved - 10));
    }
    CHECK(std::labs(out.achieved - 10) == best);
}

TEST_CASE("the always-exact mock finishes in one iteration") {
    auto mock = mock_perfect_capel(w10);
    for (MhVariant variant : {MhVariant::IterativeAcceptance,
                              MhVariant::IterativeMemory,
                              MhVariant::IterativeAcceptanceMemory}) {
        const MhOutcome out = run_bbmh(*mock, "Task.", w10, variant, {});
        CAPTURE(to_string(variant));
        CHECK(out.exact);
        CHECK(out.iterations_used == 1);
        CHECK(out.achieved == 10);
    }
}

TEST_CASE("the memory variant never runs the acceptance test") {
    auto backend = schedule_backend({7, 8, 9, 8, 7, 9, 8});
    const MhOutcome out =
        run_bbmh(backend, "Task.", w10, MhVariant::IterativeMemory, {});
    CHECK(out.acceptance_tests == 0);
    CHECK(out.iterations_used == 15);

    auto backend2 = schedule_backend({7, 8, 9, 8, 7, 9, 8});
    const MhOutcome out2 =
        run_bbmh(backend2, "Task.", w10, MhVariant::IterativeAcceptanceMemory, {});
    CHECK(out2.acceptance_tests > 0);
}

TEST_CASE("revision prompts") {
    const std::vector<MhExchange> history = {
        {"p1", "first try here", 3},
        {"p2", "second attempt text", 3},
    };
    SUBCASE("memory variants restate every prior reply with its length") {
        const RenderedPrompt p = build_revision_prompt(
            "Task.", history, {7, TokenUnit::EnglishWord},
            MhVariant::IterativeMemory);
        CHECK(p.full_text.find("first try here") != std::string::npos);
        CHECK(p.full_text.find("second attempt text") != std::string::npos);
        CHECK(p.full_text.find("measured 3 words") != std::string::npos);
        // Target restated exactly once.
        std::size_t n = 0, pos = 0;
        while ((pos = p.full_text.find("exactly 7 words", pos)) != std::string::npos) {
            ++n;
            pos += 1;
        }
        CHECK(n == 1);
    }
    SUBCASE("pure acceptance ignores history") {
        const RenderedPrompt with = build_revision_prompt(
            "Task.", history, {7, TokenUnit::EnglishWord},
            MhVariant::IterativeAcceptance);
        const RenderedPrompt without = build_revision_prompt(
            "Task.", {}, {7, TokenUnit::EnglishWord},
            MhVariant::IterativeAcceptance);
        CHECK(with.full_text == without.full_text);
        CHECK(with.full_text.find("first try here") == std::string::npos);
    }
    SUBCASE("memory variants require history after the first draw") {
        CHECK_THROWS_AS(build_revision_prompt("Task.", {},
                                              {7, TokenUnit::EnglishWord},
                                              MhVariant::IterativeMemory),
                        InvalidArgumentsError);
    }
}

TEST_CASE("custom weight functions are honored") {
    int invocations = 0;
    MhConfig config;
    config.weight = [&invocations](long abs_error) {
        ++invocations;
        return abs_error == 0 ? 1.0 : 0.5;
    };
    auto backend = schedule_backend({7, 8, 9, 10});
    const MhOutcome out =
        run_bbmh(backend, "Task.", w10, MhVariant::IterativeAcceptance, config);
    CHECK(out.exact);
    CHECK(invocations > 0);
}

TEST_CASE("configuration validation") {
    auto backend = schedule_backend({5});
    MhConfig bad;
    bad.max_steps = 0;
    CHECK_THROWS_AS(run_bbmh(backend, "T", w10, MhVariant::IterativeAcceptance, bad),
                    InvalidArgumentsError);
    CHECK_THROWS_AS(run_bbmh(backend, "T", {0, TokenUnit::EnglishWord},
                             MhVariant::IterativeAcceptance, {}),
                    InvalidTargetError);
}

TEST_CASE("variant names round-trip, including short aliases") {
    CHECK(mh_variant_from_string("iterative_acceptance") ==
          MhVariant::IterativeAcceptance);
    CHECK(mh_variant_from_string("acc") == MhVariant::IterativeAcceptance);
    CHECK(mh_variant_from_string("mem") == MhVariant::IterativeMemory);
    CHECK(mh_variant_from_string("acc-mem") == MhVariant::IterativeAcceptanceMemory);
    CHECK_FALSE(mh_variant_from_string("bogus").has_value());
    CHECK(std::string(to_string(MhVariant::IterativeMemory)) == "iterative_memory");
}

TEST_CASE("results table includes the iteration column") {
    const std::vector<BbmhTableRow> rows = {
        {"model-a", "iterative_acceptance", 0.031, 62.5, 4.20, 7.8},
        {"model-a", "iterative_memory", 0.015, 80.0, 2.10, std::nullopt},
    };
    const std::string table = format_bbmh_table(rows);
    CHECK(table.find("Avg Iter") != std::string::npos);
    CHECK(table.find("EM (%)") != std::string::npos);
    CHECK(table.find("MALD") != std::string::npos);
    CHECK(table.find("iterative_memory") != std::string::npos);
    CHECK(table.find("4.20") != std::string::npos);
}
