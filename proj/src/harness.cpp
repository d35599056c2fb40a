#include "capel/harness.hpp"

#include "capel/errors.hpp"
#include "capel/marker_parser.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace capel {

using nlohmann::json;

namespace {

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

TokenUnit unit_from_string(const std::string& s) {
    return s == "characters" ? TokenUnit::CjkCharacter : TokenUnit::EnglishWord;
}

Language language_from_string(const std::string& s) {
    return s == "zh" ? Language::Chinese : Language::English;
}

json require_object_line(const std::string& line, long line_no) {
    try {
        json doc = json::parse(line);
        if (!doc.is_object()) throw LoadError("line is not a JSON object", "", line_no);
        return doc;
    } catch (const json::exception& e) {
        throw LoadError("JSON parse error: " + std::string(e.what()), "", line_no);
    }
}

std::string require_string(const json& doc, const char* field, long line_no) {
    if (!doc.contains(field) || !doc.at(field).is_string()) {
        throw LoadError(std::string("missing or non-string field '") + field + "'",
                        field, line_no);
    }
    return doc.at(field).get<std::string>();
}

long require_integer(const json& doc, const char* field, long line_no) {
    if (!doc.contains(field) || !doc.at(field).is_number_integer()) {
        throw LoadError(std::string("missing or non-integer field '") + field + "'",
                        field, line_no);
    }
    return doc.at(field).get<long>();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::string group_value(const RunRecord& r, const std::string& key) {
    if (key == "backend" || key == "model") return r.backend_id;
    if (key == "strategy") return r.strategy;
    if (key == "track") return r.track;
    if (key == "language") return to_string(r.language);
    if (key == "category") return r.category;
    if (key == "unit") return r.unit;
    if (key == "target") return std::to_string(r.target);
    throw InvalidArgumentsError("unknown group key '" + key + "'");
}

}  // namespace

const char* to_string(Track track) {
    switch (track) {
        case Track::RandomText: return "random-text";
        case Track::Xsum: return "xsum";
        case Track::MtBenchLi: return "mt-bench-li";
        case Track::LifebenchEqualTo: return "lifebench-equal-to";
        case Track::CountingDiagnostic: return "counting-diagnostic";
    }
    return "?";
}

std::optional<Track> track_from_string(std::string_view name) {
    static const Track all[] = {Track::RandomText, Track::Xsum, Track::MtBenchLi,
                                Track::LifebenchEqualTo, Track::CountingDiagnostic};
    for (Track t : all) {
        if (name == to_string(t)) return t;
    }
    return std::nullopt;
}

std::string to_jsonl(const RunRecord& r) {
    json doc;
    doc["schema_version"] = r.schema_version;
    doc["record_id"] = r.record_id;
    doc["task_id"] = r.task_id;
    doc["backend_id"] = r.backend_id;
    doc["strategy"] = r.strategy;
    doc["track"] = r.track;
    doc["language"] = to_string(r.language);
    doc["category"] = r.category;
    doc["prompt_hash"] = r.prompt_hash;
    doc["raw_output"] = r.raw_output;
    doc["stripped_text"] = r.stripped_text;
    doc["target"] = r.target;
    doc["unit"] = r.unit;
    doc["achieved"] = r.achieved;
    doc["valid"] = r.valid;
    doc["error_classes"] = r.error_classes;
    doc["primary_error"] = r.primary_error;
    doc["temperature"] = r.temperature;
    doc["top_p"] = r.top_p;
    doc["max_completion_tokens"] = r.max_completion_tokens;
    if (r.seed) doc["seed"] = *r.seed;
    doc["latency_ms"] = r.latency_ms;
    doc["truncated"] = r.truncated;
    doc["error"] = r.error;
    if (r.judge_score) doc["judge_score"] = *r.judge_score;
    doc["reference"] = r.reference;
    return doc.dump();
}

RunRecord record_from_json(const std::string& line) {
    const json doc = require_object_line(line, -1);
    RunRecord r;
    r.schema_version = doc.value("schema_version", 1);
    r.record_id = doc.value("record_id", "");
    r.task_id = doc.value("task_id", "");
    r.backend_id = doc.value("backend_id", "");
    r.strategy = doc.value("strategy", "");
    r.track = doc.value("track", "");
    r.language = language_from_string(doc.value("language", "en"));
    r.category = doc.value("category", "");
    r.prompt_hash = doc.value("prompt_hash", "");
    r.raw_output = doc.value("raw_output", "");
    r.stripped_text = doc.value("stripped_text", "");
    r.target = doc.value("target", 0L);
    r.unit = doc.value("unit", "words");
    r.achieved = doc.value("achieved", 0L);
    r.valid = doc.value("valid", false);
    r.error_classes = doc.value("error_classes", std::vector<std::string>{});
    r.primary_error = doc.value("primary_error", "");
    r.temperature = doc.value("temperature", 1.0);
    r.top_p = doc.value("top_p", 0.95);
    r.max_completion_tokens = doc.value("max_completion_tokens", 16384);
    if (doc.contains("seed")) r.seed = doc["seed"].get<long>();
    r.latency_ms = doc.value("latency_ms", 0.0);
    r.truncated = doc.value("truncated", false);
    r.error = doc.value("error", "");
    if (doc.contains("judge_score")) r.judge_score = doc["judge_score"].get<double>();
    r.reference = doc.value("reference", "");
    return r;
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
    std::vector<RunRecord> records;
    long line_no = 0;
    for (const std::string& line : read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(line));
        } catch (const LoadError& e) {
            throw LoadError("record file " + path.string() + " line " +
                            std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::vector<TaskInstance> load_track(Track track, const std::filesystem::path& source,
                                     const TrackLoadOptions& options) {
    std::vector<TaskInstance> instances;

    switch (track) {
        case Track::RandomText: {
            const TokenUnit unit = options.language == Language::Chinese
                                       ? TokenUnit::CjkCharacter
                                       : TokenUnit::EnglishWord;
            const std::string task =
                options.language == Language::Chinese
                    ? "\xE8\xAF\xB7\xE5\x86\x99\xE4\xB8\x80\xE6\xAE\xB5\xE8\xBF\x9E"
                      "\xE8\xB4\xAF\xE7\x9A\x84\xE6\x96\x87\xE5\xAD\x97\xEF\xBC\x8C"
                      "\xE4\xB8\xBB\xE9\xA2\x98\xE4\xB8\x8D\xE9\x99\x90\xE3\x80\x82"
                    : "Write a coherent passage of text on any topic.";
            for (int n = 1; n <= options.random_text_max_target; ++n) {
                TaskInstance ti;
                std::ostringstream id;
                id << "rt-" << to_string(options.language) << "-" << std::setw(5)
                   << std::setfill('0') << n;
                ti.id = id.str();
                ti.task_text = task;
                ti.target = {n, unit};
                ti.language = options.language;
                instances.push_back(std::move(ti));
            }
            return instances;
        }

        case Track::Xsum: {
            long line_no = 0;
            std::vector<int> budgets = options.xsum_fixed_budgets;
            if (options.xsum_include_5_word_budget) budgets.insert(budgets.begin(), 5);
            for (const std::string& line : read_lines(source)) {
                ++line_no;
                if (line.empty()) continue;
                const json doc = require_object_line(line, line_no);
                const std::string id = require_string(doc, "id", line_no);
                const std::string article = require_string(doc, "article", line_no);
                const std::string reference = require_string(doc, "reference", line_no);
                const int ref_len = static_cast<int>(
                    count_english_words(reference));
                if (ref_len < 1) {
                    throw LoadError("reference has no words", "reference", line_no);
                }
                auto make = [&](const std::string& suffix, int budget) {
                    TaskInstance ti;
                    ti.id = id + "-" + suffix;
                    ti.task_text = "Summarize the following article.\n\n" + article;
                    ti.target = {budget, TokenUnit::EnglishWord};
                    ti.reference = reference;
                    instances.push_back(std::move(ti));
                };
                make("ref", ref_len);
                for (int b : budgets) make("w" + std::to_string(b), b);
            }
            if (instances.empty()) throw LoadError("no task instances in " + source.string());
            return instances;
        }

        case Track::MtBenchLi: {
            long line_no = 0;
            const auto& categories = CategoryTemperatureTable::defaults().table();
            for (const std::string& line : read_lines(source)) {
                ++line_no;
                if (line.empty()) continue;
                const json doc = require_object_line(line, line_no);
                TaskInstance ti;
                ti.id = require_string(doc, "id", line_no);
                ti.task_text = require_string(doc, "question", line_no);
                ti.category = require_string(doc, "category", line_no);
                if (!categories.contains(ti.category)) {
                    throw LoadError("category '" + ti.category +
                                    "' is not in the eight-way table", "category",
                                    line_no);
                }
                const long target = require_integer(doc, "target_length", line_no);
                if (target < 1) {
                    throw LoadError("target_length must be >= 1", "target_length",
                                    line_no);
                }
                ti.target = {static_cast<int>(target), TokenUnit::EnglishWord};
                instances.push_back(std::move(ti));
            }
            if (instances.empty()) throw LoadError("no task instances in " + source.string());
            return instances;
        }

        case Track::LifebenchEqualTo: {
            static const int budgets[] = {16, 32, 64, 128, 256, 512,
                                          1024, 2048, 4096, 8192};
            long line_no = 0;
            for (const std::string& line : read_lines(source)) {
                ++line_no;
                if (line.empty()) continue;
                const json doc = require_object_line(line, line_no);
                const std::string id = require_string(doc, "id", line_no);
                const std::string instruction = require_string(doc, "instruction", line_no);
                const Language lang = language_from_string(doc.value("language", "en"));
                for (int b : budgets) {
                    TaskInstance ti;
                    ti.id = id + "-n" + std::to_string(b);
                    ti.task_text = instruction;
                    ti.target = {b, lang == Language::Chinese ? TokenUnit::CjkCharacter
                                                              : TokenUnit::EnglishWord};
                    ti.language = lang;
                    instances.push_back(std::move(ti));
                }
            }
            if (instances.empty()) throw LoadError("no task instances in " + source.string());
            return instances;
        }

        case Track::CountingDiagnostic: {
            for (const DiagnosticSentence& s : load_diagnostic_sentences(source)) {
                TaskInstance ti;
                std::ostringstream id;
                id << "cd-" << to_string(s.language) << "-L" << s.length << "-"
                   << instances.size();
                ti.id = id.str();
                ti.task_text = s.sentence + "\n" + std::string(kCountingQuery);
                ti.target = {s.length, s.language == Language::Chinese
                                           ? TokenUnit::CjkCharacter
                                           : TokenUnit::EnglishWord};
                ti.language = s.language;
                instances.push_back(std::move(ti));
            }
            return instances;
        }
    }
    throw InvalidArgumentsError("unknown track");
}

RunRecord execute_one(const TaskInstance& instance, ModelBackend& backend,
                      PromptStrategy::Kind strategy, const RunOptions& options) {
    RunRecord r;
    r.task_id = instance.id;
    r.backend_id = backend.id();
    r.strategy = to_string(strategy);
    r.record_id = instance.id + "|" + backend.id() + "|" + r.strategy;
    r.track = to_string(options.track);
    r.language = instance.language;
    r.category = instance.category;
    r.target = instance.target.value;
    r.unit = instance.target.unit == TokenUnit::CjkCharacter ? "characters" : "words";
    r.reference = instance.reference;

    const bool code_aware =
        strategy == PromptStrategy::Kind::Capel &&
        std::find(options.code_aware_categories.begin(),
                  options.code_aware_categories.end(),
                  instance.category) != options.code_aware_categories.end();

    RenderedPrompt prompt;
    const CapelConfig cfg{instance.target};
    switch (strategy) {
        case PromptStrategy::Kind::Baseline:
            prompt = render_baseline(instance.task_text, instance.target,
                                     instance.language, options.templates);
            break;
        case PromptStrategy::Kind::Capel:
            prompt = render_capel(instance.task_text, cfg, code_aware,
                                  instance.language, options.templates);
            break;
        case PromptStrategy::Kind::DraftThenCapel:
            prompt = render_draft_then_capel(instance.task_text, cfg,
                                             instance.language, options.templates);
            break;
    }
    r.prompt_hash = fnv1a_hex(prompt.full_text);

    DecodingParams params = options.params;
    if (options.track == Track::MtBenchLi && options.temperature_table != nullptr &&
        !instance.category.empty()) {
        params.temperature = options.temperature_table->at(instance.category);
    }
    r.temperature = params.temperature;
    r.top_p = params.top_p;
    r.max_completion_tokens = params.max_completion_tokens;
    r.seed = params.seed;

    Completion completion;
    try {
        completion = complete(backend, prompt, params);
    } catch (const BackendError& e) {
        r.error = e.what();
        return r;
    }
    r.raw_output = completion.text;
    r.latency_ms = completion.usage.latency_ms;
    r.truncated = completion.usage.truncated;

    if (strategy == PromptStrategy::Kind::Baseline) {
        r.stripped_text = r.raw_output;
        r.achieved = static_cast<long>(
            measure_length(r.stripped_text, instance.target.unit));
        r.valid = true;  // no grammar to violate
        return r;
    }

    std::string_view graded = r.raw_output;
    if (strategy == PromptStrategy::Kind::DraftThenCapel) {
        graded = extract_final_section(graded);
    }
    const ParsedOutput parsed = parse(graded, instance.target, code_aware);
    const ValidationReport report = validate(parsed);
    r.stripped_text = strip_markers(parsed);
    r.achieved = static_cast<long>(
        measure_length(r.stripped_text, instance.target.unit));
    r.valid = report.valid;
    for (const ValidationError& e : report.errors) {
        r.error_classes.push_back(to_string(e.cls));
    }
    if (auto primary = report.primary_error()) r.primary_error = to_string(*primary);
    return r;
}

std::vector<RunRecord> run_track(const std::vector<TaskInstance>& instances,
                                 const std::vector<ModelBackend*>& backends,
                                 const std::vector<PromptStrategy::Kind>& strategies,
                                 const RunOptions& options,
                                 const std::filesystem::path& records_path) {
    std::vector<RunRecord> existing;
    std::set<std::string> done;
    if (std::filesystem::exists(records_path)) {
        existing = load_records(records_path);
        for (const RunRecord& r : existing) done.insert(r.record_id);
    }
    if (records_path.has_parent_path()) {
        std::filesystem::create_directories(records_path.parent_path());
    }

    struct Job {
        const TaskInstance* instance;
        ModelBackend* backend;
        PromptStrategy::Kind strategy;
    };
    std::vector<Job> jobs;
    for (const TaskInstance& ti : instances) {
        for (ModelBackend* backend : backends) {
            for (PromptStrategy::Kind strategy : strategies) {
                const std::string id =
                    ti.id + "|" + backend->id() + "|" + to_string(strategy);
                if (!done.contains(id)) jobs.push_back({&ti, backend, strategy});
            }
        }
    }

    std::ofstream out(records_path, std::ios::app);
    if (!out) throw StorageError("cannot append to " + records_path.string());

    std::mutex writer_mutex;
    std::vector<RunRecord> fresh;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            const Job& job = jobs[i];
            try {
                RunRecord record =
                    execute_one(*job.instance, *job.backend, job.strategy, options);
                std::lock_guard lock(writer_mutex);
                out << to_jsonl(record) << "\n";
                out.flush();
                if (!out) throw StorageError("write failed: " + records_path.string());
                fresh.push_back(std::move(record));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(options.workers,
                                                    static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    existing.insert(existing.end(), fresh.begin(), fresh.end());
    return existing;
}

bool verify_record(const RunRecord& record) {
    if (!record.error.empty()) return true;  // nothing stored to recompute
    const TokenUnit unit = unit_from_string(record.unit);
    const LengthTarget target{static_cast<int>(record.target), unit};

    if (record.strategy == "baseline") {
        return record.achieved ==
               static_cast<long>(measure_length(record.raw_output, unit));
    }
    std::string_view graded = record.raw_output;
    if (record.strategy == "draft-capel") graded = extract_final_section(graded);
    const bool code_mode = record.category == "coding";
    const ParsedOutput parsed = parse(graded, target, code_mode);
    const ValidationReport report = validate(parsed);
    const std::string stripped = strip_markers(parsed);
    return record.valid == report.valid &&
           record.achieved == static_cast<long>(measure_length(stripped, unit));
}

ReportTable summarize(const std::vector<RunRecord>& records,
                      const SummarizeOptions& options) {
    if (records.empty()) throw EmptyInputError("no records to summarize");

    struct Group {
        std::map<std::string, std::string> keys;
        std::vector<LengthRecord> lengths;
        std::vector<double> judge_scores;
        std::vector<RougeScores> rouges;
    };
    std::map<std::string, Group> groups;

    for (const RunRecord& r : records) {
        if (!r.error.empty()) continue;  // failed calls carry no lengths
        std::string key;
        std::map<std::string, std::string> keys;
        for (const std::string& g : options.group_by) {
            const std::string v = group_value(r, g);
            key += v + "\x1f";
            keys[g] = v;
        }
        Group& group = groups[key];
        group.keys = keys;
        group.lengths.push_back({r.target, r.achieved, {}});
        if (r.judge_score) group.judge_scores.push_back(*r.judge_score);
        if (options.with_rouge && !r.reference.empty()) {
            group.rouges.push_back(rouge(r.stripped_text, r.reference));
        }
    }
    if (groups.empty()) throw EmptyInputError("no scoreable records after filtering");

    ReportTable table;
    table.group_by = options.group_by;
    for (auto& [key, group] : groups) {
        ReportRow row;
        row.group = group.keys;
        row.compliance = summarize_compliance(group.lengths, options.lifebench);
        if (!group.judge_scores.empty()) {
            double sum = 0;
            for (double s : group.judge_scores) sum += s;
            row.mean_judge_score = sum / static_cast<double>(group.judge_scores.size());
        }
        if (!group.rouges.empty()) {
            RougeScores mean;
            auto acc = [](RougeVariant& into, const RougeVariant& from, double n) {
                into.precision += from.precision / n;
                into.recall += from.recall / n;
                into.f1 += from.f1 / n;
            };
            const double n = static_cast<double>(group.rouges.size());
            for (const RougeScores& s : group.rouges) {
                acc(mean.rouge1, s.rouge1, n);
                acc(mean.rouge2, s.rouge2, n);
                acc(mean.rougeL, s.rougeL, n);
            }
            row.rouge = mean;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string ReportTable::to_text() const {
    std::ostringstream os;
    for (const std::string& g : group_by) os << std::left << std::setw(22) << g;
    os << std::right << std::setw(7) << "n" << std::setw(9) << "EM(%)" << std::setw(10)
       << "MAE" << std::setw(9) << "MALD" << std::setw(9) << "LD" << std::setw(9)
       << "LS" << std::setw(9) << "Judge" << std::setw(10) << "ROUGE-L" << "\n";
    for (const ReportRow& row : rows) {
        for (const std::string& g : group_by) {
            os << std::left << std::setw(22) << row.group.at(g);
        }
        os << std::right << std::fixed << std::setw(7) << row.compliance.n
           << std::setprecision(1) << std::setw(9) << 100.0 * row.compliance.em
           << std::setprecision(2) << std::setw(10) << row.compliance.mae
           << std::setprecision(3) << std::setw(9) << row.compliance.mald
           << std::setprecision(1) << std::setw(9) << row.compliance.ld << std::setw(9)
           << row.compliance.ls;
        if (row.mean_judge_score) {
            os << std::setprecision(3) << std::setw(9) << *row.mean_judge_score;
        } else {
            os << std::setw(9) << "-";
        }
        if (row.rouge) {
            os << std::setprecision(4) << std::setw(10) << row.rouge->rougeL.f1;
        } else {
            os << std::setw(10) << "-";
        }
        os << "\n";
    }
    return os.str();
}

std::string ReportTable::to_tsv() const {
    std::ostringstream os;
    for (const std::string& g : group_by) os << g << "\t";
    os << "n\tem\tmae\tmald\tld\tls\tjudge\trouge_l\n";
    os << std::setprecision(12);
    for (const ReportRow& row : rows) {
        for (const std::string& g : group_by) os << row.group.at(g) << "\t";
        os << row.compliance.n << "\t" << row.compliance.em << "\t"
           << row.compliance.mae << "\t" << row.compliance.mald << "\t"
           << row.compliance.ld << "\t" << row.compliance.ls << "\t";
        if (row.mean_judge_score) os << *row.mean_judge_score;
        os << "\t";
        if (row.rouge) os << row.rouge->rougeL.f1;
        os << "\n";
    }
    return os.str();
}

std::vector<CurvePoint> mald_curve(const std::vector<RunRecord>& records, int window) {
    std::map<long, std::pair<double, std::size_t>> buckets;  // target -> (sum ald, n)
    for (const RunRecord& r : records) {
        if (!r.error.empty() || r.target < 1) continue;
        const double ald = std::abs(static_cast<double>(r.achieved - r.target)) /
                           static_cast<double>(r.target);
        auto& [sum, n] = buckets[r.target];
        sum += ald;
        ++n;
    }
    std::vector<CurvePoint> raw;
    raw.reserve(buckets.size());
    for (const auto& [target, acc] : buckets) {
        raw.push_back({target, acc.first / static_cast<double>(acc.second), acc.second});
    }
    if (window <= 1 || raw.size() < 2) return raw;

    // Centered moving average over the target-sorted sequence.
    std::vector<CurvePoint> smoothed = raw;
    const long half = window / 2;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const long lo = std::max<long>(0, static_cast<long>(i) - half);
        const long hi = std::min<long>(static_cast<long>(raw.size()) - 1,
                                       static_cast<long>(i) + half);
        double sum = 0;
        for (long j = lo; j <= hi; ++j) sum += raw[static_cast<std::size_t>(j)].mald;
        smoothed[i].mald = sum / static_cast<double>(hi - lo + 1);
    }
    return smoothed;
}

std::string curve_to_tsv(const std::vector<CurvePoint>& points) {
    std::ostringstream os;
    os << "target\tmald_smoothed\tn\n" << std::setprecision(12);
    for (const CurvePoint& p : points) {
        os << p.target << "\t" << p.mald << "\t" << p.n << "\n";
    }
    return os.str();
}

std::vector<DiagnosticSentence> load_diagnostic_sentences(
    const std::filesystem::path& source) {
    std::vector<DiagnosticSentence> sentences;
    long line_no = 0;
    for (const std::string& line : read_lines(source)) {
        ++line_no;
        if (line.empty()) continue;
        const json doc = require_object_line(line, line_no);
        DiagnosticSentence s;
        s.language = language_from_string(require_string(doc, "language", line_no));
        const long length = require_integer(doc, "length", line_no);
        if (length < 1 || length > 10) {
            throw LoadError("length must be in [1,10]", "length", line_no);
        }
        s.length = static_cast<int>(length);
        s.sentence = require_string(doc, "sentence", line_no);
        sentences.push_back(std::move(s));
    }
    if (sentences.empty()) throw LoadError("no sentences in " + source.string());
    return sentences;
}

std::optional<long> parse_count_reply(std::string_view reply) {
    static const std::regex int_re(R"([0-9]+)");
    const std::string text(reply);
    std::smatch m;
    if (!std::regex_search(text, m, int_re)) return std::nullopt;
    return std::stol(m.str());
}

std::vector<DiagnosticCell> run_counting_diagnostic(
    const std::vector<ModelBackend*>& backends,
    const std::vector<DiagnosticSentence>& sentences, const DecodingParams& params) {
    struct Acc {
        std::size_t correct = 0;
        std::size_t total = 0;
    };
    std::map<std::tuple<std::string, int, int>, Acc> acc;  // (backend, lang, L)
    std::set<int> languages;
    for (const DiagnosticSentence& s : sentences) {
        languages.insert(static_cast<int>(s.language));
    }

    for (ModelBackend* backend : backends) {
        for (const DiagnosticSentence& s : sentences) {
            ChatRequest req;
            // Only the sentence and the fixed query; no system text.
            req.user = s.sentence + "\n" + std::string(kCountingQuery);
            const Completion reply = backend->complete(req, params);
            const std::optional<long> count = parse_count_reply(reply.text);
            Acc& cell = acc[{backend->id(), static_cast<int>(s.language), s.length}];
            ++cell.total;
            if (count && *count == s.length) ++cell.correct;
        }
    }

    // Full models x 10 grid per language, empty cells included.
    std::vector<DiagnosticCell> cells;
    for (ModelBackend* backend : backends) {
        for (int lang : languages) {
            for (int length = 1; length <= 10; ++length) {
                const Acc& a = acc[{backend->id(), lang, length}];
                DiagnosticCell cell;
                cell.backend_id = backend->id();
                cell.language = static_cast<Language>(lang);
                cell.length = length;
                cell.n = a.total;
                cell.accuracy =
                    a.total > 0 ? static_cast<double>(a.correct) /
                                      static_cast<double>(a.total)
                                : 0.0;
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

std::string heatmap_to_tsv(const std::vector<DiagnosticCell>& cells) {
    std::ostringstream os;
    os << "model\tlanguage\tlength\taccuracy\tn\n" << std::setprecision(12);
    for (const DiagnosticCell& c : cells) {
        os << c.backend_id << "\t" << to_string(c.language) << "\t" << c.length << "\t"
           << c.accuracy << "\t" << c.n << "\n";
    }
    return os.str();
}

}  // namespace capel
