#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capel/errors.hpp"
#include "capel/llm_gateway.hpp"
#include "capel/marker_parser.hpp"
#include "capel/prompting.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace capel;

namespace {

const LengthTarget w6{6, TokenUnit::EnglishWord};

ValidationReport run_mock_once(ScriptedMockBackend& backend, LengthTarget target) {
    const RenderedPrompt prompt = render_capel("Task.", CapelConfig{target});
    const Completion reply = complete(backend, prompt, {});
    return validate(parse(reply.text, target));
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_CASE("scripted mock cycles replies and counts calls") {
    ScriptedMockBackend mock("m", std::vector<std::string>{"a", "b"});
    ChatRequest req{.system = "", .user = "x"};
    CHECK(mock.complete(req, {}).text == "a");
    CHECK(mock.complete(req, {}).text == "b");
    CHECK(mock.complete(req, {}).text == "a");
    CHECK(mock.calls() == 3);
    CHECK_THROWS_AS(ScriptedMockBackend("m", std::vector<std::string>{}),
                    InvalidArgumentsError);
}

TEST_CASE("generator mocks see the call index and the request") {
    ScriptedMockBackend mock("m", [](int call, const ChatRequest& req) {
        return std::to_string(call) + ":" + req.user;
    });
    ChatRequest req{.system = "", .user = "ping"};
    CHECK(mock.complete(req, {}).text == "0:ping");
    CHECK(mock.complete(req, {}).text == "1:ping");
}

TEST_CASE("target recovery from rendered prompts") {
    SUBCASE("countdown prompts, both languages") {
        auto en = render_capel("T", CapelConfig{{42, TokenUnit::EnglishWord}});
        auto t = target_from_prompt(en.full_text);
        REQUIRE(t.has_value());
        CHECK(t->value == 42);
        CHECK(t->unit == TokenUnit::EnglishWord);

        auto zh = render_capel("T", CapelConfig{{9, TokenUnit::CjkCharacter}}, false,
                               Language::Chinese);
        t = target_from_prompt(zh.full_text);
        REQUIRE(t.has_value());
        CHECK(t->value == 9);
        CHECK(t->unit == TokenUnit::CjkCharacter);
    }
    SUBCASE("baseline prompts") {
        auto en = render_baseline("T", {17, TokenUnit::EnglishWord});
        auto t = target_from_prompt(en.full_text);
        REQUIRE(t.has_value());
        CHECK(t->value == 17);

        auto zh = render_baseline("T", {8, TokenUnit::CjkCharacter},
                                  Language::Chinese);
        t = target_from_prompt(zh.full_text);
        REQUIRE(t.has_value());
        CHECK(t->value == 8);
        CHECK(t->unit == TokenUnit::CjkCharacter);
    }
    SUBCASE("no length phrase, no target") {
        CHECK_FALSE(target_from_prompt("Write something nice.").has_value());
    }
}

TEST_CASE("perfect replies validate at any target") {
    for (int n : {1, 2, 7, 50, 333}) {
        const LengthTarget target{n, TokenUnit::EnglishWord};
        const auto report = validate(parse(perfect_capel_reply(target, n), target));
        CAPTURE(n);
        CHECK(report.valid);
        CHECK(report.achieved_length == std::size_t(n));
    }
    const LengthTarget zh{12, TokenUnit::CjkCharacter};
    const auto report = validate(parse(perfect_capel_reply(zh), zh));
    CHECK(report.valid);
    CHECK(report.achieved_length == 12);
}

TEST_CASE("adaptive perfect mock recovers the target from the prompt") {
    auto mock = mock_perfect_capel();
    for (int n : {1, 3, 40}) {
        const auto report = run_mock_once(*mock, {n, TokenUnit::EnglishWord});
        CHECK(report.valid);
        CHECK(report.achieved_length == std::size_t(n));
    }
    ChatRequest vague{.system = "", .user = "no target here"};
    CHECK_THROWS_AS(mock->complete(vague, {}), InvalidArgumentsError);
}

TEST_CASE("faulty mocks exhibit their advertised defect") {
    SUBCASE("off-by-one fusion") {
        auto mock = mock_faulty(FaultKind::OffByOneFusion, w6);
        const auto report = run_mock_once(*mock, w6);
        CHECK_FALSE(report.valid);
        CHECK(report.primary_error() == ErrorClass::OffByOneFusion);
        CHECK(report.achieved_length == 5);
    }
    SUBCASE("early stop") {
        auto mock = mock_faulty(FaultKind::EarlyStop, w6);
        const auto report = run_mock_once(*mock, w6);
        CHECK_FALSE(report.valid);
        CHECK(report.has(ErrorClass::EarlyStop));
    }
    SUBCASE("markers-only tail") {
        auto mock = mock_faulty(FaultKind::MarkersOnlyTail, w6);
        const auto report = run_mock_once(*mock, w6);
        CHECK_FALSE(report.valid);
        CHECK(report.primary_error() == ErrorClass::MarkersOnlyTail);
    }
}

TEST_CASE("fault mix reproduces its proportions over one schedule cycle") {
    const LengthTarget target{20, TokenUnit::EnglishWord};
    auto mock = mock_faulty_mix(FaultMix{}, target);
    int fusion = 0, tail = 0, early = 0;
    ChatRequest req{.system = "", .user = "x"};
    for (int i = 0; i < 100; ++i) {
        const auto report = validate(parse(mock->complete(req, {}).text, target));
        REQUIRE_FALSE(report.valid);
        if (report.primary_error() == ErrorClass::OffByOneFusion) ++fusion;
        else if (report.has(ErrorClass::MarkersOnlyTail)) ++tail;
        else if (report.has(ErrorClass::EarlyStop)) ++early;
    }
    CHECK(fusion == 87);
    CHECK(early == 9);
    CHECK(tail == 4);
}

TEST_CASE("mock script files") {
    SUBCASE("perfect directive with a fixed target") {
        const auto path = temp_file("capel-mock-perfect.txt", "@perfect 4 words\n");
        auto mock = ScriptedMockBackend::from_script_file(path, "sm");
        ChatRequest req{.system = "", .user = "anything"};
        const LengthTarget t{4, TokenUnit::EnglishWord};
        CHECK(validate(parse(mock->complete(req, {}).text, t)).valid);
    }
    SUBCASE("faulty directive") {
        const auto path = temp_file("capel-mock-faulty.txt", "@faulty early-stop 8\n");
        auto mock = ScriptedMockBackend::from_script_file(path);
        ChatRequest req{.system = "", .user = "anything"};
        const LengthTarget t{8, TokenUnit::EnglishWord};
        CHECK(validate(parse(mock->complete(req, {}).text, t))
                  .has(ErrorClass::EarlyStop));
    }
    SUBCASE("fixed replies separated by ---") {
        const auto path = temp_file("capel-mock-replies.txt", "one\n---\ntwo\nlines\n");
        auto mock = ScriptedMockBackend::from_script_file(path);
        ChatRequest req{.system = "", .user = "x"};
        CHECK(mock->complete(req, {}).text == "one");
        CHECK(mock->complete(req, {}).text == "two\nlines");
    }
    SUBCASE("bad directive or missing file") {
        const auto path = temp_file("capel-mock-bad.txt", "@nonsense\n");
        CHECK_THROWS_AS(ScriptedMockBackend::from_script_file(path), LoadError);
        CHECK_THROWS_AS(
            ScriptedMockBackend::from_script_file("/does/not/exist.mock"), LoadError);
    }
}

TEST_CASE("gateway cap checks precede any call") {
    ScriptedMockBackend mock("m", std::vector<std::string>{"hi"});
    const RenderedPrompt prompt = render_baseline("T", {3, TokenUnit::EnglishWord});
    DecodingParams params;
    params.max_completion_tokens = (1 << 30);  // over any cap? default cap is 1<<30
    CHECK_NOTHROW(complete(mock, prompt, {}));

    // A faulty-parameter request never reaches the backend.
    DecodingParams hot;
    hot.temperature = 5.0;
    CHECK_THROWS_AS(complete(mock, prompt, hot), OverCapError);
    CHECK(mock.calls() == 1);
}

TEST_CASE("category temperature schedule") {
    const auto& table = CategoryTemperatureTable::defaults();
    CHECK(table.at("writing") == 0.7);
    CHECK(table.at("roleplay") == 0.7);
    CHECK(table.at("stem") == 0.1);
    CHECK(table.at("humanities") == 0.1);
    CHECK(table.at("extraction") == 0.0);
    CHECK(table.at("math") == 0.0);
    CHECK(table.at("coding") == 0.0);
    CHECK(table.at("reasoning") == 0.0);
    CHECK_THROWS_AS(table.at("poetry"), LoadError);
    CHECK_THROWS_AS(CategoryTemperatureTable({{"writing", 0.7}}),
                    InvalidArgumentsError);
    CHECK_THROWS_AS(CategoryTemperatureTable({
                        {"writing", 1.7}, {"roleplay", 0.7}, {"stem", 0.1},
                        {"humanities", 0.1}, {"extraction", 0.0}, {"math", 0.0},
                        {"coding", 0.0}, {"reasoning", 0.0}}),
                    InvalidArgumentsError);
}

TEST_CASE("model registry") {
    const auto specs =
        load_model_registry(std::string(CAPEL_SOURCE_DIR) + "/data/models.json");
    REQUIRE_FALSE(specs.empty());
    bool found = false;
    for (const auto& s : specs) {
        if (s.id == "DeepSeek-V3") {
            found = true;
            CHECK(s.max_completion_tokens == 8192);
        }
    }
    CHECK(found);
    const auto bad = temp_file("capel-registry-bad.json", "{\"not\": \"an array\"}");
    CHECK_THROWS_AS(load_model_registry(bad), LoadError);
}

TEST_CASE("http chat backend against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string last_auth;
    std::atomic<bool> fail_first{false};
    std::atomic<int> status{200};
    std::string finish_reason = "stop";

    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    const int n = ++hits;
                    last_auth = req.get_header_value("Authorization");
                    if (status != 200) {
                        res.status = status;
                        return;
                    }
                    if (fail_first && n == 1) {
                        res.status = 429;
                        return;
                    }
                    res.set_content(
                        "{\"choices\":[{\"message\":{\"content\":\"pong\"},"
                        "\"finish_reason\":\"" + finish_reason + "\"}],"
                        "\"usage\":{\"prompt_tokens\":5,\"completion_tokens\":2}}",
                        "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::yield();

    setenv("CAPEL_TEST_API_KEY", "sekrit", 1);
    HttpBackendConfig cfg;
    cfg.id = "test-backend";
    cfg.host = "http://127.0.0.1:" + std::to_string(port);
    cfg.api_key_env = "CAPEL_TEST_API_KEY";
    cfg.max_attempts = 3;
    cfg.backoff_base_ms = 5;
    cfg.backoff_max_ms = 10;

    HttpChatBackend backend(cfg);
    ChatRequest req{.system = "sys", .user = "hello"};

    SUBCASE("success path returns text, usage, and the bearer header") {
        const Completion c = backend.complete(req, {});
        CHECK(c.text == "pong");
        CHECK(c.usage.prompt_tokens == 5);
        CHECK(c.usage.completion_tokens == 2);
        CHECK_FALSE(c.usage.truncated);
        CHECK(c.usage.attempts == 1);
        CHECK(last_auth == "Bearer sekrit");
    }
    SUBCASE("rate limit retries with backoff, then succeeds") {
        fail_first = true;
        const Completion c = backend.complete(req, {});
        CHECK(c.text == "pong");
        CHECK(c.usage.attempts == 2);
    }
    SUBCASE("finish_reason=length reports truncation") {
        finish_reason = "length";
        CHECK(backend.complete(req, {}).usage.truncated);
    }
    SUBCASE("credential rejection is immediate") {
        status = 401;
        CHECK_THROWS_AS(backend.complete(req, {}), AuthError);
        CHECK(hits == 1);
    }
    SUBCASE("persistent server errors exhaust the retry budget") {
        status = 503;
        CHECK_THROWS_AS(backend.complete(req, {}), TimeoutError);
        CHECK(hits == 3);
    }
    SUBCASE("missing key env var fails before any request") {
        HttpBackendConfig nokey = cfg;
        nokey.api_key_env = "CAPEL_TEST_UNSET_KEY_VAR";
        unsetenv("CAPEL_TEST_UNSET_KEY_VAR");
        HttpChatBackend b2(nokey);
        CHECK_THROWS_AS(b2.complete(req, {}), AuthError);
        CHECK(hits == 0);
    }

    server.stop();
    server_thread.join();
}
