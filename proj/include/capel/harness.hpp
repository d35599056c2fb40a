#pragma once

#include "capel/llm_gateway.hpp"
#include "capel/metrics.hpp"
#include "capel/prompting.hpp"
#include "capel/text_units.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace capel {

enum class Track { RandomText, Xsum, MtBenchLi, LifebenchEqualTo, CountingDiagnostic };

const char* to_string(Track track);
std::optional<Track> track_from_string(std::string_view name);

struct TaskInstance {
    std::string id;
    std::string task_text;
    LengthTarget target;
    Language language = Language::English;
    std::string category;   // instruction-following track only
    std::string reference;  // summarization track only
};

/// One prompt x model x strategy execution, self-verifying: achieved and
/// the validation verdict are recomputable from raw_output.
struct RunRecord {
    int schema_version = 1;
    std::string record_id;  // task|backend|strategy, the resumption key
    std::string task_id;
    std::string backend_id;
    std::string strategy;   // "baseline" | "capel" | "draft-capel"
    std::string track;
    Language language = Language::English;
    std::string category;
    std::string prompt_hash;
    std::string raw_output;
    std::string stripped_text;
    long target = 0;
    std::string unit;       // "words" | "characters"
    long achieved = 0;
    bool valid = false;
    std::vector<std::string> error_classes;
    std::string primary_error;
    double temperature = 1.0;
    double top_p = 0.95;
    int max_completion_tokens = 16384;
    std::optional<long> seed;
    double latency_ms = 0.0;
    bool truncated = false;
    std::string error;      // per-record backend failure, run continues
    std::optional<double> judge_score;
    std::string reference;  // carried for summary-quality scoring
};

std::string to_jsonl(const RunRecord& record);
RunRecord record_from_json(const std::string& line);

/// Loaders and writers for the append-only line-delimited record store.
std::vector<RunRecord> load_records(const std::filesystem::path& path);

struct TrackLoadOptions {
    Language language = Language::English;
    int random_text_max_target = 1000;       // targets 1..N
    bool xsum_include_5_word_budget = false; // off by default
    std::vector<int> xsum_fixed_budgets = {50, 120};
};

/// Loads a track's task instances. RandomText and LifebenchEqualTo expand
/// targets programmatically; the file-backed tracks validate their schema
/// and raise LoadError naming field and line on a mismatch.
std::vector<TaskInstance> load_track(Track track, const std::filesystem::path& source,
                                     const TrackLoadOptions& options = {});

struct RunOptions {
    Track track = Track::RandomText;
    DecodingParams params;
    int workers = 4;
    TemplateSet templates = TemplateSet::builtin();
    /// Categories that get the code-aware suffix rule.
    std::vector<std::string> code_aware_categories = {"coding"};
    /// MT-Bench-LI temperatures; other tracks use params.temperature.
    const CategoryTemperatureTable* temperature_table =
        &CategoryTemperatureTable::defaults();
};

/// Runs instance x backend x strategy, appending records to records_path
/// incrementally. Existing record ids are skipped, so an interrupted run
/// resumes without duplicates. Backend failures become per-record error
/// entries; storage failures abort.
std::vector<RunRecord> run_track(const std::vector<TaskInstance>& instances,
                                 const std::vector<ModelBackend*>& backends,
                                 const std::vector<PromptStrategy::Kind>& strategies,
                                 const RunOptions& options,
                                 const std::filesystem::path& records_path);

/// Builds one record without touching storage; the unit the harness runs on.
RunRecord execute_one(const TaskInstance& instance, ModelBackend& backend,
                      PromptStrategy::Kind strategy, const RunOptions& options);

/// Recomputes achieved length and verdict from the stored raw output and
/// compares with the stored values.
bool verify_record(const RunRecord& record);

struct ReportRow {
    std::map<std::string, std::string> group;  // group key -> value
    ComplianceSummary compliance;
    std::optional<double> mean_judge_score;
    std::optional<RougeScores> rouge;  // averaged over the group
};

struct ReportTable {
    std::vector<std::string> group_by;
    std::vector<ReportRow> rows;

    std::string to_text() const;
    std::string to_tsv() const;
};

struct SummarizeOptions {
    std::vector<std::string> group_by = {"backend", "strategy"};
    LifebenchOptions lifebench;
    bool with_rouge = false;  // candidate vs stored reference
    int curve_window = 25;    // MALD-curve centered moving average
};

ReportTable summarize(const std::vector<RunRecord>& records,
                      const SummarizeOptions& options = {});

/// Smoothed MALD per target value; one row per target bucket.
struct CurvePoint {
    long target;
    double mald;
    std::size_t n;
};

std::vector<CurvePoint> mald_curve(const std::vector<RunRecord>& records,
                                   int window = 25);
std::string curve_to_tsv(const std::vector<CurvePoint>& points);

// --- counting diagnostic ---

struct DiagnosticSentence {
    Language language = Language::English;
    int length = 1;  // true token count, 1..10
    std::string sentence;
};

std::vector<DiagnosticSentence> load_diagnostic_sentences(
    const std::filesystem::path& source);

/// The fixed query appended below each sentence, verbatim.
inline constexpr std::string_view kCountingQuery =
    "How many tokens are in the sentence above?";

struct DiagnosticCell {
    std::string backend_id;
    Language language;
    int length;
    double accuracy;
    std::size_t n;
};

/// Accuracy matrix (models x L per language). The model's count is the
/// first integer in its reply; an unparseable reply counts as incorrect.
std::vector<DiagnosticCell> run_counting_diagnostic(
    const std::vector<ModelBackend*>& backends,
    const std::vector<DiagnosticSentence>& sentences,
    const DecodingParams& params = {});

std::string heatmap_to_tsv(const std::vector<DiagnosticCell>& cells);

/// First integer appearing in a model reply, if any.
std::optional<long> parse_count_reply(std::string_view reply);

}  // namespace capel
