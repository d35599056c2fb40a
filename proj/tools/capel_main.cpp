// capel: exact-length output control and measurement toolkit.
//
// Subcommands: prompt, validate, score/summarize, run, judge, diagnose, bbmh.
// Exit codes: 0 success, 1 domain failure (invalid output, unparseable
// judge reply, ...), 2 usage or configuration error.

#include "capel/bbmh.hpp"
#include "capel/errors.hpp"
#include "capel/harness.hpp"
#include "capel/llm_gateway.hpp"
#include "capel/marker_parser.hpp"
#include "capel/metrics.hpp"
#include "capel/prompting.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace {

using nlohmann::json;
using namespace capel;

struct CommonFlags {
    std::string format = "text";  // "text" | "json-lines"
    bool json() const { return format == "json-lines"; }
};

std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") {
        std::ostringstream os;
        os << std::cin.rdbuf();
        return os.str();
    }
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw StorageError("cannot write " + path.string());
    out << text;
}

PromptStrategy::Kind strategy_from_string(const std::string& name) {
    if (name == "baseline") return PromptStrategy::Kind::Baseline;
    if (name == "capel") return PromptStrategy::Kind::Capel;
    if (name == "draft-capel") return PromptStrategy::Kind::DraftThenCapel;
    throw InvalidArgumentsError("unknown strategy '" + name + "'");
}

TokenUnit unit_from_flag(const std::string& name) {
    if (name == "words") return TokenUnit::EnglishWord;
    if (name == "characters") return TokenUnit::CjkCharacter;
    throw InvalidArgumentsError("unknown unit '" + name + "' (words|characters)");
}

Language language_from_flag(const std::string& name) {
    if (name == "en") return Language::English;
    if (name == "zh") return Language::Chinese;
    throw InvalidArgumentsError("unknown language '" + name + "' (en|zh)");
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError("bad JSON in " + path.string() + ": " + e.what());
    }
}

std::optional<LengthTarget> target_from_config(const json& cfg) {
    if (!cfg.contains("target")) return std::nullopt;
    LengthTarget t;
    t.value = cfg.at("target").get<int>();
    t.unit = unit_from_flag(cfg.value("unit", "words"));
    return t;
}

std::unique_ptr<ModelBackend> make_backend(const json& cfg) {
    const std::string kind = cfg.value("kind", "");
    const std::string id = cfg.value("id", kind);
    if (kind == "mock-perfect") {
        return mock_perfect_capel(target_from_config(cfg), id);
    }
    if (kind == "mock-faulty") {
        const std::string fault = cfg.value("fault", "off-by-one");
        FaultKind fk;
        if (fault == "off-by-one") fk = FaultKind::OffByOneFusion;
        else if (fault == "early-stop") fk = FaultKind::EarlyStop;
        else if (fault == "markers-only-tail") fk = FaultKind::MarkersOnlyTail;
        else throw LoadError("unknown fault '" + fault + "'", "fault");
        return mock_faulty(fk, target_from_config(cfg), id);
    }
    if (kind == "mock-mix") {
        FaultMix mix;
        mix.off_by_one = cfg.value("off_by_one", mix.off_by_one);
        mix.early_stop = cfg.value("early_stop", mix.early_stop);
        mix.markers_only_tail = cfg.value("markers_only_tail", mix.markers_only_tail);
        mix.seed = cfg.value("seed", mix.seed);
        return mock_faulty_mix(mix, target_from_config(cfg), id);
    }
    if (kind == "script") {
        return ScriptedMockBackend::from_script_file(
            cfg.at("path").get<std::string>(), id);
    }
    if (kind == "http") {
        HttpBackendConfig hc;
        hc.id = id;
        hc.host = cfg.at("host").get<std::string>();
        hc.path = cfg.value("path", hc.path);
        hc.model = cfg.value("model", "");
        hc.api_key_env = cfg.value("api_key_env", "");
        hc.max_attempts = cfg.value("max_attempts", hc.max_attempts);
        hc.max_in_flight = cfg.value("max_in_flight", hc.max_in_flight);
        hc.rate_per_sec = cfg.value("rate_per_sec", hc.rate_per_sec);
        hc.bucket_burst = cfg.value("bucket_burst", hc.bucket_burst);
        hc.timeout_sec = cfg.value("timeout_sec", hc.timeout_sec);
        if (cfg.contains("registry") && cfg.contains("model")) {
            for (const ModelSpec& spec :
                 load_model_registry(cfg.at("registry").get<std::string>())) {
                if (spec.id == hc.model) {
                    hc.caps.max_completion_tokens = spec.max_completion_tokens;
                }
            }
        }
        if (cfg.contains("max_completion_tokens_cap")) {
            hc.caps.max_completion_tokens = cfg["max_completion_tokens_cap"].get<int>();
        }
        return std::make_unique<HttpChatBackend>(std::move(hc));
    }
    throw LoadError("unknown backend kind '" + kind + "'", "kind");
}

std::vector<std::unique_ptr<ModelBackend>> make_backends(const json& list) {
    if (!list.is_array() || list.empty()) {
        throw LoadError("'backends' must be a non-empty array", "backends");
    }
    std::vector<std::unique_ptr<ModelBackend>> out;
    for (const json& b : list) out.push_back(make_backend(b));
    return out;
}

DecodingParams params_from_config(const json& cfg) {
    DecodingParams p;
    if (!cfg.contains("params")) return p;
    const json& j = cfg["params"];
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.max_completion_tokens = j.value("max_completion_tokens", p.max_completion_tokens);
    if (j.contains("seed")) p.seed = j["seed"].get<long>();
    return p;
}

// --- prompt ---

int cmd_prompt(const std::string& strategy_name, int target_value,
               const std::string& unit_name, const std::string& lang_name,
               bool code_aware, bool suffix_only, const std::string& task_file,
               const std::string& task_inline, const std::string& templates_dir,
               const CommonFlags& common) {
    const Language lang = language_from_flag(lang_name);
    LengthTarget target{target_value, unit_from_flag(unit_name)};
    if (lang == Language::Chinese && unit_name == "words") {
        target.unit = TokenUnit::CjkCharacter;
    }
    std::string task = task_inline;
    if (!task_file.empty()) task = read_input(task_file);

    const TemplateSet templates = templates_dir.empty()
                                      ? TemplateSet::builtin()
                                      : TemplateSet::load_dir(templates_dir);

    RenderedPrompt prompt;
    switch (strategy_from_string(strategy_name)) {
        case PromptStrategy::Kind::Baseline:
            prompt = render_baseline(task, target, lang, templates);
            break;
        case PromptStrategy::Kind::Capel:
            prompt = render_capel(task, CapelConfig{target}, code_aware, lang, templates);
            break;
        case PromptStrategy::Kind::DraftThenCapel:
            prompt = render_draft_then_capel(task, CapelConfig{target}, lang, templates);
            break;
    }
    const std::string& text = suffix_only ? prompt.suffix_text : prompt.full_text;
    if (common.json()) {
        json doc{{"strategy", strategy_name},
                 {"target", target.value},
                 {"unit", to_string(target.unit)},
                 {"text", text}};
        std::cout << doc.dump() << "\n";
    } else {
        std::cout << text << "\n";
    }
    return 0;
}

// --- validate ---

int cmd_validate(const std::string& input, int target_value,
                 const std::string& unit_name, bool code_mode,
                 const CommonFlags& common) {
    if (target_value < 1) throw InvalidTargetError("--target must be >= 1");
    const LengthTarget target{target_value, unit_from_flag(unit_name)};
    const std::string text = read_input(input);
    const ParsedOutput parsed = parse(text, target, code_mode);
    const ValidationReport report = validate(parsed);
    const std::string stripped = strip_markers(parsed);

    if (common.json()) {
        json doc;
        doc["valid"] = report.valid;
        doc["target"] = target.value;
        doc["achieved"] = report.achieved_length;
        doc["stripped_text"] = stripped;
        json errors = json::array();
        for (const ValidationError& e : report.errors) {
            errors.push_back({{"class", to_string(e.cls)},
                              {"byte_pos", e.byte_pos},
                              {"detail", e.detail}});
        }
        doc["errors"] = errors;
        doc["warnings"] = report.warnings;
        if (auto primary = report.primary_error()) {
            doc["primary_error"] = to_string(*primary);
        }
        std::cout << doc.dump() << "\n";
    } else {
        std::cout << (report.valid ? "valid" : "invalid") << "\n"
                  << "target:   " << target.value << " " << to_string(target.unit)
                  << "\n"
                  << "achieved: " << report.achieved_length << "\n";
        for (const ValidationError& e : report.errors) {
            std::cout << "error: " << to_string(e.cls) << " at byte " << e.byte_pos
                      << (e.detail.empty() ? "" : " (" + e.detail + ")") << "\n";
        }
        if (auto primary = report.primary_error()) {
            std::cout << "primary error: " << to_string(*primary) << "\n";
        }
        for (const std::string& w : report.warnings) {
            std::cout << "warning: " << w << "\n";
        }
    }
    return report.valid ? 0 : 1;
}

// --- score / summarize ---

int cmd_score(const std::string& records_path, std::vector<std::string> group_by,
              bool with_rouge, bool signed_ld, const std::string& out_dir,
              int curve_window, const CommonFlags& common) {
    const std::vector<RunRecord> records = load_records(records_path);
    SummarizeOptions opts;
    if (!group_by.empty()) opts.group_by = std::move(group_by);
    opts.with_rouge = with_rouge;
    opts.lifebench.signed_deviation = signed_ld;
    opts.curve_window = curve_window;
    const ReportTable table = summarize(records, opts);

    if (common.json()) {
        for (const ReportRow& row : table.rows) {
            json doc;
            for (const auto& [k, v] : row.group) doc[k] = v;
            doc["n"] = row.compliance.n;
            doc["em"] = row.compliance.em;
            doc["mae"] = row.compliance.mae;
            doc["mald"] = row.compliance.mald;
            doc["ld"] = row.compliance.ld;
            doc["ls"] = row.compliance.ls;
            if (row.mean_judge_score) doc["judge"] = *row.mean_judge_score;
            if (row.rouge) {
                doc["rouge1_f1"] = row.rouge->rouge1.f1;
                doc["rouge2_f1"] = row.rouge->rouge2.f1;
                doc["rougeL_f1"] = row.rouge->rougeL.f1;
            }
            std::cout << doc.dump() << "\n";
        }
    } else {
        std::cout << table.to_text();
    }

    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        write_file(dir / "tables" / "summary.txt", table.to_text());
        write_file(dir / "tables" / "summary.tsv", table.to_tsv());
        write_file(dir / "plots" / "mald_curve.tsv",
                   curve_to_tsv(mald_curve(records, opts.curve_window)));
    }
    return 0;
}

// --- run ---

int cmd_run(const std::string& config_path, const std::string& out_dir_flag,
            const CommonFlags& common) {
    const json cfg = load_json_file(config_path);

    const std::string track_name = cfg.value("track", "");
    const std::optional<Track> track = track_from_string(track_name);
    if (!track) throw LoadError("unknown track '" + track_name + "'", "track");

    TrackLoadOptions load_opts;
    load_opts.language = language_from_flag(cfg.value("language", "en"));
    load_opts.random_text_max_target =
        cfg.value("random_text_max_target", load_opts.random_text_max_target);
    load_opts.xsum_include_5_word_budget =
        cfg.value("xsum_include_5_word_budget", false);

    const std::string source = cfg.value("source", "");
    if (source.empty() && *track != Track::RandomText) {
        throw LoadError("track '" + track_name + "' requires a 'source' path",
                        "source");
    }
    const std::vector<TaskInstance> instances = load_track(*track, source, load_opts);

    auto owned = make_backends(cfg.at("backends"));
    std::vector<ModelBackend*> backends;
    for (auto& b : owned) backends.push_back(b.get());

    std::vector<PromptStrategy::Kind> strategies;
    for (const json& s : cfg.value("strategies", json::array({"capel"}))) {
        strategies.push_back(strategy_from_string(s.get<std::string>()));
    }

    RunOptions run_opts;
    run_opts.track = *track;
    run_opts.params = params_from_config(cfg);
    run_opts.workers = cfg.value("workers", run_opts.workers);
    if (cfg.contains("templates_dir")) {
        run_opts.templates =
            TemplateSet::load_dir(cfg["templates_dir"].get<std::string>());
    }
    if (cfg.contains("code_aware_categories")) {
        run_opts.code_aware_categories =
            cfg["code_aware_categories"].get<std::vector<std::string>>();
    }

    const std::string out_dir =
        !out_dir_flag.empty() ? out_dir_flag : cfg.value("out_dir", "out");
    const std::filesystem::path records_path =
        std::filesystem::path(out_dir) / "records" / (track_name + ".jsonl");

    const std::vector<RunRecord> records =
        run_track(instances, backends, strategies, run_opts, records_path);

    SummarizeOptions sum_opts;
    sum_opts.with_rouge = *track == Track::Xsum;
    const ReportTable table = summarize(records, sum_opts);
    write_file(std::filesystem::path(out_dir) / "tables" / "summary.txt",
               table.to_text());
    write_file(std::filesystem::path(out_dir) / "tables" / "summary.tsv",
               table.to_tsv());
    write_file(std::filesystem::path(out_dir) / "plots" / "mald_curve.tsv",
               curve_to_tsv(mald_curve(records, sum_opts.curve_window)));

    if (common.json()) {
        std::cout << json{{"records", records.size()},
                          {"records_path", records_path.string()},
                          {"out_dir", out_dir}}
                         .dump()
                  << "\n";
    } else {
        std::cout << records.size() << " records in " << records_path.string() << "\n"
                  << table.to_text();
    }
    return 0;
}

// --- judge ---

int cmd_judge(const std::string& records_path, const std::string& out_path,
              const std::string& track_name, const std::string& source,
              const std::string& config_path, const CommonFlags& common) {
    const std::optional<Track> track = track_from_string(track_name);
    if (!track) throw LoadError("unknown track '" + track_name + "'", "track");
    TrackLoadOptions load_opts;
    const std::vector<TaskInstance> instances = load_track(*track, source, load_opts);
    std::map<std::string, const TaskInstance*> by_id;
    for (const TaskInstance& ti : instances) by_id[ti.id] = &ti;

    const json cfg = load_json_file(config_path);
    auto owned = make_backends(cfg.at("backends"));
    ModelBackend& judge = *owned.front();

    std::vector<RunRecord> records = load_records(records_path);
    std::size_t scored = 0;
    for (RunRecord& r : records) {
        if (r.judge_score || !r.error.empty()) continue;
        const auto it = by_id.find(r.task_id);
        if (it == by_id.end()) continue;
        r.judge_score = judge_single_answer(it->second->task_text, r.stripped_text,
                                            judge);
        ++scored;
    }
    std::ostringstream os;
    for (const RunRecord& r : records) os << to_jsonl(r) << "\n";
    write_file(out_path, os.str());
    if (common.json()) {
        std::cout << json{{"scored", scored}, {"out", out_path}}.dump() << "\n";
    } else {
        std::cout << "judged " << scored << " records -> " << out_path << "\n";
    }
    return 0;
}

// --- diagnose ---

int cmd_diagnose(const std::string& sentences_path, const std::string& config_path,
                 bool mock_oracle, bool mock_always_one, const std::string& out_path,
                 const CommonFlags& common) {
    const std::vector<DiagnosticSentence> sentences =
        load_diagnostic_sentences(sentences_path);

    std::vector<std::unique_ptr<ModelBackend>> owned;
    if (mock_oracle) {
        // Answers with the true count of the sentence above the query.
        owned.push_back(std::make_unique<ScriptedMockBackend>(
            "oracle", [](int, const ChatRequest& req) {
                const std::size_t cut = req.user.rfind('\n');
                const std::string sentence =
                    cut == std::string::npos ? req.user : req.user.substr(0, cut);
                std::size_t n = count_english_words(sentence);
                const std::size_t cjk = count_cjk_characters(sentence);
                if (cjk > 0) n = cjk;
                return "There are " + std::to_string(n) + " tokens.";
            }));
    }
    if (mock_always_one) {
        owned.push_back(std::make_unique<ScriptedMockBackend>(
            "always-one", std::vector<std::string>{"1"}));
    }
    if (!config_path.empty()) {
        for (auto& b : make_backends(load_json_file(config_path).at("backends"))) {
            owned.push_back(std::move(b));
        }
    }
    if (owned.empty()) {
        throw InvalidArgumentsError(
            "no backends: pass --config, --mock-oracle, or --mock-always-one");
    }
    std::vector<ModelBackend*> backends;
    for (auto& b : owned) backends.push_back(b.get());

    const std::vector<DiagnosticCell> cells =
        run_counting_diagnostic(backends, sentences);
    const std::string tsv = heatmap_to_tsv(cells);
    if (!out_path.empty()) write_file(out_path, tsv);

    if (common.json()) {
        for (const DiagnosticCell& c : cells) {
            std::cout << json{{"model", c.backend_id},
                              {"language", to_string(c.language)},
                              {"length", c.length},
                              {"accuracy", c.accuracy},
                              {"n", c.n}}
                             .dump()
                      << "\n";
        }
    } else {
        std::cout << tsv;
    }
    return 0;
}

// --- bbmh ---

int cmd_bbmh(const std::string& task_inline, const std::string& task_file,
             int target_value, const std::string& unit_name,
             const std::string& variant_name, int max_steps, double tau,
             unsigned seed, const std::string& config_path, bool perfect_mock,
             const CommonFlags& common) {
    std::string task = task_inline;
    if (!task_file.empty()) task = read_input(task_file);
    if (task.empty()) throw InvalidArgumentsError("provide --task or --task-file");

    const std::optional<MhVariant> variant = mh_variant_from_string(variant_name);
    if (!variant) throw InvalidArgumentsError("unknown variant '" + variant_name + "'");

    std::vector<std::unique_ptr<ModelBackend>> owned;
    if (perfect_mock) {
        owned.push_back(mock_perfect_capel(
            LengthTarget{target_value, unit_from_flag(unit_name)}));
    } else if (!config_path.empty()) {
        owned = make_backends(load_json_file(config_path).at("backends"));
    } else {
        throw InvalidArgumentsError("provide --config or --perfect-mock");
    }

    MhConfig mh;
    mh.max_steps = max_steps;
    mh.tau = tau;
    mh.seed = seed;
    const MhOutcome outcome =
        run_bbmh(*owned.front(), task,
                 LengthTarget{target_value, unit_from_flag(unit_name)}, *variant, mh);

    if (common.json()) {
        std::cout << json{{"achieved", outcome.achieved},
                          {"iterations_used", outcome.iterations_used},
                          {"exact", outcome.exact},
                          {"acceptance_tests", outcome.acceptance_tests},
                          {"final_reply", outcome.final_reply}}
                         .dump()
                  << "\n";
    } else {
        std::cout << "achieved:   " << outcome.achieved << " / " << target_value
                  << "\niterations: " << outcome.iterations_used
                  << "\nexact:      " << (outcome.exact ? "yes" : "no") << "\n\n"
                  << outcome.final_reply << "\n";
    }
    return outcome.exact ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact-length output control and measurement toolkit"};
    app.require_subcommand(1);

    CommonFlags common;
    app.add_option("--format", common.format, "Output format: text | json-lines")
        ->check(CLI::IsMember({"text", "json-lines"}));

    int rc = 0;

    // prompt
    std::string p_strategy = "capel", p_unit = "words", p_lang = "en";
    std::string p_task_file, p_task, p_templates;
    int p_target = 0;
    bool p_code_aware = false, p_suffix_only = false;
    auto* prompt_cmd = app.add_subcommand("prompt", "Render a length-controlled prompt");
    prompt_cmd->add_option("--strategy", p_strategy, "baseline | capel | draft-capel");
    prompt_cmd->add_option("--target", p_target, "Exact length budget")->required();
    prompt_cmd->add_option("--unit", p_unit, "words | characters");
    prompt_cmd->add_option("--lang", p_lang, "en | zh");
    prompt_cmd->add_flag("--code-aware", p_code_aware, "Append the code-line rule");
    prompt_cmd->add_flag("--suffix-only", p_suffix_only, "Print only the suffix");
    prompt_cmd->add_option("--task-file", p_task_file, "Task text file ('-' = stdin)");
    prompt_cmd->add_option("--task", p_task, "Inline task text");
    prompt_cmd->add_option("--templates", p_templates, "Template override directory");
    prompt_cmd->callback([&] {
        rc = cmd_prompt(p_strategy, p_target, p_unit, p_lang, p_code_aware,
                        p_suffix_only, p_task_file, p_task, p_templates, common);
    });

    // validate
    std::string v_input = "-", v_unit = "words";
    int v_target = 0;
    bool v_code_mode = false;
    auto* validate_cmd =
        app.add_subcommand("validate", "Check a countdown-formatted output");
    validate_cmd->add_option("input", v_input, "Input file ('-' = stdin)");
    validate_cmd->add_option("--target", v_target, "Expected length")->required();
    validate_cmd->add_option("--unit", v_unit, "words | characters");
    validate_cmd->add_flag("--code-mode", v_code_mode, "Line-token grammar");
    validate_cmd->callback(
        [&] { rc = cmd_validate(v_input, v_target, v_unit, v_code_mode, common); });

    // score (alias summarize)
    std::string s_records, s_out_dir;
    std::vector<std::string> s_group_by;
    bool s_rouge = false, s_signed = false;
    int s_window = 25;
    auto* score_cmd = app.add_subcommand("score", "Summarize stored run records");
    score_cmd->alias("summarize");
    score_cmd->add_option("--records", s_records, "Record file")->required();
    score_cmd->add_option("--group-by", s_group_by,
                          "Group keys (backend, strategy, track, language, "
                          "category, unit, target)");
    score_cmd->add_flag("--rouge", s_rouge, "Score candidates against references");
    score_cmd->add_flag("--signed-ld", s_signed, "Signed instead of absolute deviation");
    score_cmd->add_option("--out-dir", s_out_dir, "Write tables/ and plots/ here");
    score_cmd->add_option("--curve-window", s_window, "Curve smoothing window");
    score_cmd->callback([&] {
        rc = cmd_score(s_records, s_group_by, s_rouge, s_signed, s_out_dir, s_window,
                       common);
    });

    // run
    std::string r_config, r_out_dir;
    auto* run_cmd = app.add_subcommand("run", "Execute a track from a config file");
    run_cmd->add_option("--config", r_config, "Run configuration (JSON)")->required();
    run_cmd->add_option("--out-dir", r_out_dir, "Overrides out_dir from the config");
    run_cmd->callback([&] { rc = cmd_run(r_config, r_out_dir, common); });

    // judge
    std::string j_records, j_out, j_track, j_source, j_config;
    auto* judge_cmd =
        app.add_subcommand("judge", "Optional answer-quality pass over stored records");
    judge_cmd->add_option("--records", j_records, "Record file")->required();
    judge_cmd->add_option("--out", j_out, "Destination record file")->required();
    judge_cmd->add_option("--track", j_track, "Track the records came from")->required();
    judge_cmd->add_option("--source", j_source, "Track source file");
    judge_cmd->add_option("--config", j_config, "Backend config; first entry judges")
        ->required();
    judge_cmd->callback(
        [&] { rc = cmd_judge(j_records, j_out, j_track, j_source, j_config, common); });

    // diagnose
    std::string d_sentences, d_config, d_out;
    bool d_oracle = false, d_always_one = false;
    auto* diag_cmd =
        app.add_subcommand("diagnose", "Token-counting accuracy matrix");
    diag_cmd->add_option("--sentences", d_sentences, "Sentence file")->required();
    diag_cmd->add_option("--config", d_config, "Backend config (JSON)");
    diag_cmd->add_flag("--mock-oracle", d_oracle, "Add a true-count mock");
    diag_cmd->add_flag("--mock-always-one", d_always_one, "Add an always-1 mock");
    diag_cmd->add_option("--out", d_out, "Heatmap data destination");
    diag_cmd->callback([&] {
        rc = cmd_diagnose(d_sentences, d_config, d_oracle, d_always_one, d_out, common);
    });

    // bbmh
    std::string b_task, b_task_file, b_unit = "words", b_variant = "acc", b_config;
    int b_target = 0, b_max_steps = 15;
    double b_tau = 1.0;
    unsigned b_seed = 42;
    bool b_perfect = false;
    auto* bbmh_cmd =
        app.add_subcommand("bbmh", "Iterative accept/reject length revision");
    bbmh_cmd->add_option("--task", b_task, "Inline task text");
    bbmh_cmd->add_option("--task-file", b_task_file, "Task text file ('-' = stdin)");
    bbmh_cmd->add_option("--target", b_target, "Exact length budget")->required();
    bbmh_cmd->add_option("--unit", b_unit, "words | characters");
    bbmh_cmd->add_option("--variant", b_variant, "acc | mem | acc-mem");
    bbmh_cmd->add_option("--max-steps", b_max_steps, "Iteration cap");
    bbmh_cmd->add_option("--tau", b_tau, "Acceptance potential scale");
    bbmh_cmd->add_option("--seed", b_seed, "Random seed");
    bbmh_cmd->add_option("--config", b_config, "Backend config; first entry proposes");
    bbmh_cmd->add_flag("--perfect-mock", b_perfect, "Use the always-exact mock");
    bbmh_cmd->callback([&] {
        rc = cmd_bbmh(b_task, b_task_file, b_target, b_unit, b_variant, b_max_steps,
                      b_tau, b_seed, b_config, b_perfect, common);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help exits 0; usage errors exit 2
    } catch (const InvalidTargetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgumentsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedUnitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const StorageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
