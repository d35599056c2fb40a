#include "capel/llm_gateway.hpp"

#include "capel/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace capel {

namespace {

const std::vector<std::string>& english_pool() {
    static const std::vector<std::string> pool = {
        "time",   "river",  "stone",  "light",  "garden", "quiet",
        "morning", "paper", "window", "cloud",  "summer", "letter",
        "music",  "forest", "bridge", "winter",
    };
    return pool;
}

const std::vector<std::string>& cjk_pool() {
    // Common ideographs, one UTF-8 string each.
    static const std::vector<std::string> pool = {
        "\xE7\x9A\x84", "\xE4\xB8\x80", "\xE6\x98\xAF", "\xE5\x9C\xA8",
        "\xE4\xB8\x8D", "\xE4\xBA\x86", "\xE6\x9C\x89", "\xE5\x92\x8C",
        "\xE4\xBA\xBA", "\xE8\xBF\x99", "\xE4\xB8\xAD", "\xE5\xA4\xA7",
    };
    return pool;
}

std::vector<std::string> pool_tokens(LengthTarget target, int variation) {
    const auto& pool = target.unit == TokenUnit::CjkCharacter ? cjk_pool()
                                                              : english_pool();
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(target.value));
    for (int i = 0; i < target.value; ++i) {
        tokens.push_back(pool[static_cast<std::size_t>(variation + i) % pool.size()]);
    }
    return tokens;
}

std::string fuse_last_marker(std::string reply) {
    // Drop the '<' of the final <1> marker so it fuses with its word.
    const std::size_t pos = reply.rfind("<1>");
    if (pos != std::string::npos) reply.erase(pos, 1);
    return reply;
}

std::string early_stop_reply(LengthTarget target, int variation) {
    if (target.value < 2) return "";  // nothing emitted at all
    const int stop_at = target.value / 2 + 1;  // >= 2, so <1> is never reached
    std::string out;
    const auto tokens = pool_tokens(target, variation);
    for (int k = target.value; k >= stop_at; --k) {
        out += "<" + std::to_string(k) + ">" +
               tokens[static_cast<std::size_t>(target.value - k)];
    }
    return out + "<0>";
}

std::string markers_only_tail_reply(LengthTarget target, int variation) {
    std::string out;
    const auto tokens = pool_tokens(target, variation);
    // The last bare_count markers carry no token; at least three so the
    // run registers as a tail, never more than the target allows.
    const int bare_count = std::min(target.value, std::max(3, target.value / 2));
    for (int k = target.value; k >= 1; --k) {
        out += "<" + std::to_string(k) + ">";
        if (k > bare_count) {
            out += tokens[static_cast<std::size_t>(target.value - k)];
        }
    }
    return out + "<0>";
}

std::string apply_fault(FaultKind fault, LengthTarget target, int variation) {
    switch (fault) {
        case FaultKind::OffByOneFusion:
            return fuse_last_marker(perfect_capel_reply(target, variation));
        case FaultKind::EarlyStop:
            return early_stop_reply(target, variation);
        case FaultKind::MarkersOnlyTail:
            return markers_only_tail_reply(target, variation);
    }
    return "";
}

LengthTarget resolve_target(const std::optional<LengthTarget>& fixed,
                            const ChatRequest& request) {
    if (fixed) return *fixed;
    if (auto t = target_from_prompt(request.user)) return *t;
    throw InvalidArgumentsError("mock backend could not recover a target from the prompt");
}

// Countdown formatting is the default; only a prompt that names a plain
// word/character budget without mentioning markers gets prose. Prompts
// with no recognizable budget phrasing (fixed-target scripts) count down.
bool wants_countdown(const ChatRequest& request) {
    if (request.user.find(" markers") != std::string::npos ||
        request.user.find("\xE4\xB8\xAA\xE6\xA0\x87\xE8\xAE\xB0") !=
            std::string::npos) {
        return true;
    }
    return !target_from_prompt(request.user).has_value();
}

// Plain exact-length prose for baseline prompts.
std::string plain_reply(LengthTarget target, int variation) {
    const auto tokens = pool_tokens(target, variation);
    std::string out;
    const bool cjk = target.unit == TokenUnit::CjkCharacter;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i && !cjk) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Prepends a draft section when the prompt asked for one, so the reply
// survives final-section extraction.
std::string wrap_for_draft(const ChatRequest& request, std::string body) {
    if (request.user.find(kDraftSentinel) == std::string::npos) return body;
    return "A short draft that ignores the budget.\n" + std::string(kDraftSentinel) +
           "\n" + std::move(body);
}

}  // namespace

Completion complete(ModelBackend& backend, const RenderedPrompt& prompt,
                    const DecodingParams& params) {
    const ParamCaps& caps = backend.caps();
    if (params.max_completion_tokens > caps.max_completion_tokens) {
        throw OverCapError("max_completion_tokens " +
                           std::to_string(params.max_completion_tokens) +
                           " exceeds backend cap " +
                           std::to_string(caps.max_completion_tokens));
    }
    if (params.temperature > caps.max_temperature || params.temperature < 0.0) {
        throw OverCapError("temperature out of range for backend " + backend.id());
    }
    ChatRequest request;
    request.user = prompt.full_text;
    return backend.complete(request, params);
}

ScriptedMockBackend::ScriptedMockBackend(std::string id, std::vector<std::string> replies)
    : id_(std::move(id)) {
    if (replies.empty()) throw InvalidArgumentsError("mock script has no replies");
    generator_ = [replies = std::move(replies)](int call, const ChatRequest&) {
        return replies[static_cast<std::size_t>(call) % replies.size()];
    };
}

ScriptedMockBackend::ScriptedMockBackend(std::string id, Generator generator)
    : id_(std::move(id)), generator_(std::move(generator)) {}

Completion ScriptedMockBackend::complete(const ChatRequest& request,
                                         const DecodingParams&) {
    int call;
    {
        std::lock_guard lock(mutex_);
        call = calls_++;
    }
    Completion c;
    c.text = generator_(call, request);
    c.usage.completion_tokens = static_cast<long>(c.text.size());
    return c;
}

int ScriptedMockBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::unique_ptr<ScriptedMockBackend> ScriptedMockBackend::from_script_file(
    const std::filesystem::path& path, std::string id) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open mock script: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);

    // Directive form.
    for (const auto& l : lines) {
        if (l.empty()) continue;
        if (l[0] != '@') break;
        std::istringstream ss(l);
        std::string directive;
        ss >> directive;
        std::optional<LengthTarget> fixed;
        auto read_target = [&ss, &fixed]() {
            int n;
            if (ss >> n) {
                std::string unit;
                ss >> unit;
                fixed = LengthTarget{n, unit == "characters" ? TokenUnit::CjkCharacter
                                                             : TokenUnit::EnglishWord};
            }
        };
        if (directive == "@perfect") {
            read_target();
            return mock_perfect_capel(fixed, std::move(id));
        }
        if (directive == "@faulty") {
            std::string kind;
            ss >> kind;
            FaultKind fault;
            if (kind == "off-by-one") fault = FaultKind::OffByOneFusion;
            else if (kind == "early-stop") fault = FaultKind::EarlyStop;
            else if (kind == "markers-only-tail") fault = FaultKind::MarkersOnlyTail;
            else throw LoadError("unknown fault kind '" + kind + "' in " + path.string());
            read_target();
            return mock_faulty(fault, fixed, std::move(id));
        }
        throw LoadError("unknown mock directive '" + directive + "' in " + path.string());
    }

    // Reply-per-call form, separated by "---" lines.
    std::vector<std::string> replies;
    std::string current;
    bool any = false;
    for (const auto& l : lines) {
        if (l == "---") {
            replies.push_back(current);
            current.clear();
            any = false;
        } else {
            if (any) current += '\n';
            current += l;
            any = true;
        }
    }
    if (any || !current.empty()) replies.push_back(current);
    return std::make_unique<ScriptedMockBackend>(std::move(id), std::move(replies));
}

std::optional<LengthTarget> target_from_prompt(std::string_view prompt) {
    const std::string text(prompt);
    static const std::regex capel_en_re(R"(exactly ([0-9]+) markers)");
    static const std::regex baseline_en_re(R"(exactly ([0-9]+) (words?|characters?))");
    // zh: "N 个标记" (markers) / "N 个字" (characters) / "N 个词" (words)
    static const std::regex capel_zh_re(
        "([0-9]+) \xE4\xB8\xAA\xE6\xA0\x87\xE8\xAE\xB0");
    static const std::regex baseline_zh_char_re("([0-9]+) \xE4\xB8\xAA\xE5\xAD\x97");
    static const std::regex baseline_zh_word_re("([0-9]+) \xE4\xB8\xAA\xE8\xAF\x8D");

    std::smatch m;
    if (std::regex_search(text, m, capel_en_re)) {
        return LengthTarget{std::stoi(m[1].str()), TokenUnit::EnglishWord};
    }
    if (std::regex_search(text, m, capel_zh_re)) {
        return LengthTarget{std::stoi(m[1].str()), TokenUnit::CjkCharacter};
    }
    if (std::regex_search(text, m, baseline_en_re)) {
        const bool chars = m[2].str().front() == 'c';
        return LengthTarget{std::stoi(m[1].str()),
                            chars ? TokenUnit::CjkCharacter : TokenUnit::EnglishWord};
    }
    if (std::regex_search(text, m, baseline_zh_char_re)) {
        return LengthTarget{std::stoi(m[1].str()), TokenUnit::CjkCharacter};
    }
    if (std::regex_search(text, m, baseline_zh_word_re)) {
        return LengthTarget{std::stoi(m[1].str()), TokenUnit::EnglishWord};
    }
    return std::nullopt;
}

std::string perfect_capel_reply(LengthTarget target, int variation) {
    return synthesize(pool_tokens(target, variation), target);
}

std::unique_ptr<ScriptedMockBackend> mock_perfect_capel(
    std::optional<LengthTarget> fixed_target, std::string id) {
    return std::make_unique<ScriptedMockBackend>(
        std::move(id),
        [fixed_target](int call, const ChatRequest& request) {
            const LengthTarget target = resolve_target(fixed_target, request);
            const std::string body = wants_countdown(request)
                                         ? perfect_capel_reply(target, call)
                                         : plain_reply(target, call);
            return wrap_for_draft(request, body);
        });
}

std::unique_ptr<ScriptedMockBackend> mock_faulty(FaultKind fault,
                                                 std::optional<LengthTarget> fixed_target,
                                                 std::string id) {
    return std::make_unique<ScriptedMockBackend>(
        std::move(id),
        [fault, fixed_target](int call, const ChatRequest& request) {
            const LengthTarget target = resolve_target(fixed_target, request);
            return wrap_for_draft(request, apply_fault(fault, target, call));
        });
}

std::unique_ptr<ScriptedMockBackend> mock_faulty_mix(
    const FaultMix& mix, std::optional<LengthTarget> fixed_target, std::string id) {
    if (mix.off_by_one < 0 || mix.early_stop < 0 || mix.markers_only_tail < 0 ||
        mix.off_by_one + mix.early_stop + mix.markers_only_tail == 0) {
        throw InvalidArgumentsError("fault mix must have non-negative counts, not all zero");
    }
    // One fixed schedule of length sum(mix), shuffled once by the seed.
    std::vector<FaultKind> schedule;
    schedule.insert(schedule.end(), static_cast<std::size_t>(mix.off_by_one),
                    FaultKind::OffByOneFusion);
    schedule.insert(schedule.end(), static_cast<std::size_t>(mix.early_stop),
                    FaultKind::EarlyStop);
    schedule.insert(schedule.end(), static_cast<std::size_t>(mix.markers_only_tail),
                    FaultKind::MarkersOnlyTail);
    std::mt19937 rng(mix.seed);
    std::shuffle(schedule.begin(), schedule.end(), rng);

    return std::make_unique<ScriptedMockBackend>(
        std::move(id),
        [schedule = std::move(schedule), fixed_target](int call, const ChatRequest& request) {
            const LengthTarget target = resolve_target(fixed_target, request);
            const FaultKind fault =
                schedule[static_cast<std::size_t>(call) % schedule.size()];
            return wrap_for_draft(request, apply_fault(fault, target, call));
        });
}

std::vector<ModelSpec> load_model_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open model registry: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("model registry parse error: " + std::string(e.what()));
    }
    if (!doc.is_array()) throw LoadError("model registry must be a JSON array");
    std::vector<ModelSpec> specs;
    long line = 0;
    for (const auto& entry : doc) {
        ++line;
        if (!entry.contains("id") || !entry.contains("max_completion_tokens")) {
            throw LoadError("model registry entry missing id/max_completion_tokens",
                            "id", line);
        }
        ModelSpec spec;
        spec.id = entry.at("id").get<std::string>();
        spec.family = entry.value("family", "");
        spec.max_completion_tokens = entry.at("max_completion_tokens").get<int>();
        specs.push_back(std::move(spec));
    }
    return specs;
}

CategoryTemperatureTable::CategoryTemperatureTable(std::map<std::string, double> table)
    : table_(std::move(table)) {
    static const char* required[] = {"writing",    "roleplay", "stem",   "humanities",
                                     "extraction", "math",     "coding", "reasoning"};
    for (const char* cat : required) {
        auto it = table_.find(cat);
        if (it == table_.end()) {
            throw InvalidArgumentsError(std::string("temperature table missing '") +
                                        cat + "'");
        }
        if (it->second < 0.0 || it->second > 1.0) {
            throw InvalidArgumentsError(std::string("temperature for '") + cat +
                                        "' outside [0,1]");
        }
    }
}

const CategoryTemperatureTable& CategoryTemperatureTable::defaults() {
    static const CategoryTemperatureTable table({
        {"writing", 0.7}, {"roleplay", 0.7}, {"stem", 0.1}, {"humanities", 0.1},
        {"extraction", 0.0}, {"math", 0.0}, {"coding", 0.0}, {"reasoning", 0.0},
    });
    return table;
}

double CategoryTemperatureTable::at(const std::string& category) const {
    auto it = table_.find(category);
    if (it == table_.end()) {
        throw LoadError("unknown task category '" + category + "'", "category");
    }
    return it->second;
}

}  // namespace capel
