#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capel/harness.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct CliResult {
    int exit_code;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CAPEL_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

const std::string kFixtures = std::string(CAPEL_SOURCE_DIR) + "/data/fixtures";

}  // namespace

TEST_CASE("prompt subcommand") {
    const CliResult ok = run_cli("prompt --strategy capel --target 5 --task Hello");
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("<5>Hello,<4>world!<3>How's<2>everything?<1>Great.<0>") !=
          std::string::npos);

    CHECK(run_cli("prompt --strategy capel --target 0 --task x").exit_code == 2);
    CHECK(run_cli("prompt --task x").exit_code == 2);  // missing required flag
    CHECK(run_cli("prompt --strategy bogus --target 3 --task x").exit_code == 2);

    const CliResult draft =
        run_cli("prompt --strategy draft-capel --target 3 --task x");
    CHECK(draft.exit_code == 0);
    CHECK(draft.out.find("===== FINAL ANSWER =====") != std::string::npos);

    const CliResult suffix =
        run_cli("prompt --strategy capel --target 4 --task TASKTEXT --suffix-only");
    CHECK(suffix.exit_code == 0);
    CHECK(suffix.out.find("TASKTEXT") == std::string::npos);
}

TEST_CASE("validate subcommand exit codes") {
    const auto good = write_temp("capel-cli-good.txt", "<2>two<1>words<0>");
    const auto bad = write_temp("capel-cli-bad.txt", "<2>two<1>words<0><0>");

    CHECK(run_cli("validate --target 2 " + good.string()).exit_code == 0);
    const CliResult invalid = run_cli("validate --target 2 " + bad.string());
    CHECK(invalid.exit_code == 1);
    CHECK(invalid.out.find("DuplicateMarker") != std::string::npos);
    CHECK(run_cli("validate --target 2 /no/such/input").exit_code == 2);
}

TEST_CASE("validate emits machine-readable reports on request") {
    const auto good = write_temp("capel-cli-json.txt", "<2>two<1>words<0>");
    const CliResult r =
        run_cli("--format json-lines validate --target 2 " + good.string());
    CHECK(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc.at("valid") == true);
    CHECK(doc.at("achieved") == 2);
    CHECK(doc.at("errors").empty());
}

TEST_CASE("help exits zero everywhere") {
    CHECK(run_cli("--help").exit_code == 0);
    for (const char* sub :
         {"prompt", "validate", "score", "run", "diagnose", "bbmh", "judge"}) {
        CHECK(run_cli(std::string(sub) + " --help").exit_code == 0);
    }
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("run and score round-trip through the record store") {
    const auto out_dir = std::filesystem::temp_directory_path() / "capel-cli-run";
    std::filesystem::remove_all(out_dir);
    const auto config = write_temp("capel-cli-run.json", R"({
        "track": "random-text",
        "language": "en",
        "random_text_max_target": 6,
        "backends": [{"kind": "mock-perfect", "id": "mp"}],
        "strategies": ["capel", "baseline"],
        "workers": 2
    })");

    const CliResult run1 =
        run_cli("run --config " + config.string() + " --out-dir " + out_dir.string());
    CHECK(run1.exit_code == 0);
    const auto records_path = out_dir / "records" / "random-text.jsonl";
    REQUIRE(std::filesystem::exists(records_path));
    CHECK(capel::load_records(records_path).size() == 12);
    CHECK(std::filesystem::exists(out_dir / "tables" / "summary.tsv"));
    CHECK(std::filesystem::exists(out_dir / "plots" / "mald_curve.tsv"));

    // Re-running resumes: still 12 records.
    CHECK(run_cli("run --config " + config.string() + " --out-dir " +
                  out_dir.string()).exit_code == 0);
    CHECK(capel::load_records(records_path).size() == 12);

    const CliResult score =
        run_cli("score --records " + records_path.string() + " --group-by strategy");
    CHECK(score.exit_code == 0);
    CHECK(score.out.find("EM(%)") != std::string::npos);

    const CliResult json_rows = run_cli("--format json-lines score --records " +
                                        records_path.string());
    CHECK(json_rows.exit_code == 0);
    const auto first = nlohmann::json::parse(
        json_rows.out.substr(0, json_rows.out.find('\n')));
    CHECK(first.at("em") == 1.0);

    CHECK(run_cli("run --config /no/such/config.json").exit_code == 2);
    const auto bad_cfg = write_temp("capel-cli-badtrack.json",
                                    R"({"track": "bogus", "backends": []})");
    CHECK(run_cli("run --config " + bad_cfg.string()).exit_code == 2);
}

TEST_CASE("diagnose subcommand") {
    const CliResult r =
        run_cli("diagnose --sentences " + kFixtures +
                "/counting_sentences_sample.jsonl --mock-always-one");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("model\tlanguage\tlength\taccuracy\tn") == 0);
    CHECK(run_cli("diagnose --sentences /no/such/file --mock-oracle").exit_code == 2);
    CHECK(run_cli("diagnose --sentences " + kFixtures +
                  "/counting_sentences_sample.jsonl").exit_code == 2);  // no backend
}

TEST_CASE("bbmh subcommand") {
    const CliResult r = run_cli(
        "--format json-lines bbmh --task Hello --target 9 --variant acc "
        "--perfect-mock");
    CHECK(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc.at("exact") == true);
    CHECK(doc.at("iterations_used") == 1);
    CHECK(doc.at("achieved") == 9);

    CHECK(run_cli("bbmh --task x --target 5 --variant nope --perfect-mock")
              .exit_code == 2);
    CHECK(run_cli("bbmh --task x --target 5 --variant acc").exit_code == 2);
}
