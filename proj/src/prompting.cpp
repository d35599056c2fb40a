#include "capel/prompting.hpp"

#include "capel/errors.hpp"

#include <fstream>
#include <sstream>

namespace capel {

namespace {

// clang-format off
const char* kBaselineEn =
"Please answer the instruction in exactly {target_length} {unit}.";

const char* kBaselineZh =
"\xE8\xAF\xB7\xE7\x94\xA8\xE6\x81\xB0\xE5\xA5\xBD {target_length} {unit}\xE5\x9B\x9E\xE7\xAD\x94\xE4\xB8\x8A\xE8\xBF\xB0\xE6\x8C\x87\xE4\xBB\xA4\xE3\x80\x82";

const char* kCapelEn = R"(Required output format
----------------------
1. For each integer k from {target_length} down to 1:
   - Print the marker {mo}k{mc}.
   - Immediately append one English token - letters with optional
     leading/trailing punctuation (comma, period, apostrophe, hyphen,
     digits, ...). No spaces inside this token.
2. After the word paired with {mo}1{mc}, write {mo}0{mc} and stop generating.
3. Markers and punctuation are not counted toward the {target_length}-word
   total; only the English words themselves count.
4. If you risk running short, do not end with dozens of bare markers. Add
   fresh, meaningful prose; line breaks or repeated filler do not qualify.

Word-count and ordering rules
-----------------------------
- Produce exactly {target_length} markers ({mo}{target_length}{mc} ... {mo}1{mc}) and exactly {target_length} words.
- The numbers inside successive markers must decrease by 1 - no skips or repeats.
- Two markers may never appear back-to-back without an intervening word.
- No extra text is allowed after {mo}0{mc} (not even a newline).

Correct example (N = 5)
-----------------------
{mo}5{mc}Hello,{mo}4{mc}world!{mo}3{mc}How's{mo}2{mc}everything?{mo}1{mc}Great.{mo}0{mc}

Typical errors to avoid
-----------------------
- Early stop: ending before {mo}1{mc} or omitting {mo}0{mc}
  {mo}5{mc}Quick{mo}4{mc}demo{mo}3{mc}ends{mo}0{mc}
- Duplicate markers: e.g. two {mo}0{mc}s
  {mo}5{mc}Wrong{mo}4{mc}marker{mo}3{mc}again{mo}2{mc}here{mo}1{mc}now{mo}0{mc}{mo}0{mc}
- Markers-only tail: long stretch of bare markers
  {mo}7{mc}Starts{mo}6{mc}well{mo}5{mc}then{mo}4{mc}stop.{mo}3{mc}{mo}2{mc}{mo}1{mc}{mo}0{mc})";

const char* kCodeRuleEn = R"(
Code rule
---------
For code sections, a token may include a trailing \n to represent a line
break (i.e., a complete code line counts as one token).)";

// Rule-for-rule translation of the English suffix at character level; the
// worked example uses five ideographs.
const char* kCapelZh =
"\xE8\xA6\x81\xE6\xB1\x82\xE7\x9A\x84\xE8\xBE\x93\xE5\x87\xBA\xE6\xA0\xBC\xE5\xBC\x8F\n"
"----------------------\n"
"1. \xE5\xAF\xB9\xE6\xAF\x8F\xE4\xB8\xAA\xE6\x95\xB4\xE6\x95\xB0 k\xEF\xBC\x8C\xE4\xBB\x8E {target_length} \xE9\x80\x92\xE5\x87\x8F\xE5\x88\xB0 1\xEF\xBC\x9A\n"
"   - \xE6\x89\x93\xE5\x8D\xB0\xE6\xA0\x87\xE8\xAE\xB0 {mo}k{mc}\xE3\x80\x82\n"
"   - \xE7\xB4\xA7\xE6\x8E\xA5\xE7\x9D\x80\xE8\xBE\x93\xE5\x87\xBA\xE4\xB8\x80\xE4\xB8\xAA\xE8\xAE\xA1\xE6\x95\xB0\xE5\xAD\x97\xE7\xAC\xA6\xEF\xBC\x88\xE6\xB1\x89\xE5\xAD\x97\xE6\x88\x96\xE4\xB8\xAD\xE6\x96\x87\xE6\xA0\x87\xE7\x82\xB9\xEF\xBC\x89\xE3\x80\x82\n"
"2. \xE5\x9C\xA8\xE4\xB8\x8E {mo}1{mc} \xE9\x85\x8D\xE5\xAF\xB9\xE7\x9A\x84\xE5\xAD\x97\xE4\xB9\x8B\xE5\x90\x8E\xEF\xBC\x8C\xE5\x86\x99 {mo}0{mc} \xE5\xB9\xB6\xE5\x81\x9C\xE6\xAD\xA2\xE7\x94\x9F\xE6\x88\x90\xE3\x80\x82\n"
"3. \xE6\xA0\x87\xE8\xAE\xB0\xE5\x92\x8C\xE7\xA9\xBA\xE7\x99\xBD\xE4\xB8\x8D\xE8\xAE\xA1\xE5\x85\xA5 {target_length} \xE5\xAD\x97\xE6\x80\xBB\xE6\x95\xB0\xEF\xBC\x9B\xE5\x8F\xAA\xE6\x9C\x89\xE5\xAD\x97\xE7\xAC\xA6\xE6\x9C\xAC\xE8\xBA\xAB\xE8\xAE\xA1\xE6\x95\xB0\xE3\x80\x82\n"
"4. \xE5\xA6\x82\xE6\x9E\x9C\xE5\x86\x85\xE5\xAE\xB9\xE5\x8F\xAF\xE8\x83\xBD\xE4\xB8\x8D\xE8\xB6\xB3\xEF\xBC\x8C\xE4\xB8\x8D\xE8\xA6\x81\xE4\xBB\xA5\xE5\xA4\xA7\xE9\x87\x8F\xE7\xA9\xBA\xE6\xA0\x87\xE8\xAE\xB0\xE7\xBB\x93\xE5\xB0\xBE\xEF\xBC\x9B\xE8\xAF\xB7\xE8\xA1\xA5\xE5\x85\x85\xE6\x9C\x89\xE6\x84\x8F\xE4\xB9\x89\xE7\x9A\x84\xE5\x86\x85\xE5\xAE\xB9\xEF\xBC\x8C\xE6\x8D\xA2\xE8\xA1\x8C\xE6\x88\x96\xE9\x87\x8D\xE5\xA4\x8D\xE5\xA1\xAB\xE5\x85\x85\xE6\x97\xA0\xE6\x95\x88\xE3\x80\x82\n"
"\n"
"\xE5\xAD\x97\xE6\x95\xB0\xE4\xB8\x8E\xE9\xA1\xBA\xE5\xBA\x8F\xE8\xA7\x84\xE5\x88\x99\n"
"--------------\n"
"- \xE6\x81\xB0\xE5\xA5\xBD\xE8\xBE\x93\xE5\x87\xBA {target_length} \xE4\xB8\xAA\xE6\xA0\x87\xE8\xAE\xB0\xEF\xBC\x88{mo}{target_length}{mc} ... {mo}1{mc}\xEF\xBC\x89\xEF\xBC\x8C\xE6\x81\xB0\xE5\xA5\xBD {target_length} \xE4\xB8\xAA\xE5\xAD\x97\xE3\x80\x82\n"
"- \xE7\x9B\xB8\xE9\x82\xBB\xE6\xA0\x87\xE8\xAE\xB0\xE4\xB8\xAD\xE7\x9A\x84\xE6\x95\xB0\xE5\xAD\x97\xE5\xBF\x85\xE9\xA1\xBB\xE4\xBE\x9D\xE6\xAC\xA1\xE9\x80\x92\xE5\x87\x8F 1\xEF\xBC\x8C\xE4\xB8\x8D\xE5\xBE\x97\xE8\xB7\xB3\xE8\xBF\x87\xE6\x88\x96\xE9\x87\x8D\xE5\xA4\x8D\xE3\x80\x82\n"
"- \xE4\xB8\xA4\xE4\xB8\xAA\xE6\xA0\x87\xE8\xAE\xB0\xE4\xB9\x8B\xE9\x97\xB4\xE5\xBF\x85\xE9\xA1\xBB\xE6\x9C\x89\xE4\xB8\x80\xE4\xB8\xAA\xE5\xAD\x97\xEF\xBC\x8C\xE4\xB8\x8D\xE5\xBE\x97\xE8\xBF\x9E\xE7\xBB\xAD\xE5\x87\xBA\xE7\x8E\xB0\xE7\xA9\xBA\xE6\xA0\x87\xE8\xAE\xB0\xE3\x80\x82\n"
"- {mo}0{mc} \xE4\xB9\x8B\xE5\x90\x8E\xE4\xB8\x8D\xE5\xBE\x97\xE6\x9C\x89\xE4\xBB\xBB\xE4\xBD\x95\xE5\x86\x85\xE5\xAE\xB9\xEF\xBC\x88\xE5\x8C\x85\xE6\x8B\xAC\xE6\x8D\xA2\xE8\xA1\x8C\xEF\xBC\x89\xE3\x80\x82\n"
"\n"
"\xE6\xAD\xA3\xE7\xA1\xAE\xE7\xA4\xBA\xE4\xBE\x8B (N = 5)\n"
"----------------\n"
"{mo}5{mc}\xE4\xBB\x8A{mo}4{mc}\xE5\xA4\xA9{mo}3{mc}\xE5\xA4\xA9{mo}2{mc}\xE6\xB0\x94{mo}1{mc}\xE5\xA5\xBD{mo}0{mc}\n"
"\n"
"\xE5\xB8\xB8\xE8\xA7\x81\xE9\x94\x99\xE8\xAF\xAF\n"
"--------\n"
"- \xE8\xBF\x87\xE6\x97\xA9\xE5\x81\x9C\xE6\xAD\xA2\xEF\xBC\x9A\xE6\x9C\xAA\xE5\x88\xB0 {mo}1{mc} \xE5\xB0\xB1\xE7\xBB\x93\xE6\x9D\x9F\xEF\xBC\x8C\xE6\x88\x96\xE7\xBC\xBA\xE5\xB0\x91 {mo}0{mc}\n"
"- \xE9\x87\x8D\xE5\xA4\x8D\xE6\xA0\x87\xE8\xAE\xB0\xEF\xBC\x9A\xE4\xBE\x8B\xE5\xA6\x82\xE5\x87\xBA\xE7\x8E\xB0\xE4\xB8\xA4\xE4\xB8\xAA {mo}0{mc}\n"
"- \xE7\xBA\xAF\xE6\xA0\x87\xE8\xAE\xB0\xE7\xBB\x93\xE5\xB0\xBE\xEF\xBC\x9A\xE8\xBF\x9E\xE7\xBB\xAD\xE5\xA4\x9A\xE4\xB8\xAA\xE7\xA9\xBA\xE6\xA0\x87\xE8\xAE\xB0";

const char* kCodeRuleZh =
"\n\xE4\xBB\xA3\xE7\xA0\x81\xE8\xA7\x84\xE5\x88\x99\n---------\n"
"\xE5\xAF\xB9\xE4\xBA\x8E\xE4\xBB\xA3\xE7\xA0\x81\xE9\x83\xA8\xE5\x88\x86\xEF\xBC\x8C\xE4\xB8\x80\xE4\xB8\xAA\xE8\xAE\xA1\xE6\x95\xB0\xE5\x8D\x95\xE4\xBD\x8D\xE5\x8F\xAF\xE4\xBB\xA5\xE5\x8C\x85\xE5\x90\xAB\xE6\x9C\xAB\xE5\xB0\xBE\xE7\x9A\x84 \\n \xE8\xA1\xA8\xE7\xA4\xBA\xE6\x8D\xA2\xE8\xA1\x8C\xEF\xBC\x88\xE5\x8D\xB3\xE4\xB8\x80\xE6\x95\xB4\xE8\xA1\x8C\xE4\xBB\xA3\xE7\xA0\x81\xE8\xAE\xA1\xE4\xB8\xBA\xE4\xB8\x80\xE4\xB8\xAA\xE5\x8D\x95\xE4\xBD\x8D\xEF\xBC\x89\xE3\x80\x82";

const char* kDraftEn = R"(First, write a free-form draft answer to the instruction above. Do not
worry about length while drafting.
Then print the following line on its own, exactly once:
===== FINAL ANSWER =====
After that line, rewrite the draft as your final answer following every
rule below. Only the text after that line is evaluated.

{capel_suffix})";

const char* kDraftZh =
"\xE9\xA6\x96\xE5\x85\x88\xEF\xBC\x8C\xE9\x92\x88\xE5\xAF\xB9\xE4\xB8\x8A\xE8\xBF\xB0\xE6\x8C\x87\xE4\xBB\xA4\xE5\x86\x99\xE4\xB8\x80\xE4\xBB\xBD\xE8\x87\xAA\xE7\x94\xB1\xE8\x8D\x89\xE7\xA8\xBF\xEF\xBC\x8C\xE8\x8D\x89\xE7\xA8\xBF\xE9\x98\xB6\xE6\xAE\xB5\xE4\xB8\x8D\xE5\xBF\x85\xE5\x85\xB3\xE5\xBF\x83\xE9\x95\xBF\xE5\xBA\xA6\xE3\x80\x82\n"
"\xE7\x84\xB6\xE5\x90\x8E\xE5\x8D\x95\xE7\x8B\xAC\xE6\x89\x93\xE5\x8D\xB0\xE4\xB8\x8B\xE9\x9D\xA2\xE8\xBF\x99\xE4\xB8\x80\xE8\xA1\x8C\xEF\xBC\x8C\xE4\xB8\x94\xE4\xBB\x85\xE6\x89\x93\xE5\x8D\xB0\xE4\xB8\x80\xE6\xAC\xA1\xEF\xBC\x9A\n"
"===== FINAL ANSWER =====\n"
"\xE5\x9C\xA8\xE8\xAF\xA5\xE8\xA1\x8C\xE4\xB9\x8B\xE5\x90\x8E\xEF\xBC\x8C\xE6\x8C\x89\xE7\x85\xA7\xE4\xB8\x8B\xE5\x88\x97\xE6\x89\x80\xE6\x9C\x89\xE8\xA7\x84\xE5\x88\x99\xE9\x87\x8D\xE5\x86\x99\xE8\x8D\x89\xE7\xA8\xBF\xE4\xBD\x9C\xE4\xB8\xBA\xE6\x9C\x80\xE7\xBB\x88\xE7\xAD\x94\xE6\xA1\x88\xE3\x80\x82\xE5\x8F\xAA\xE8\xAF\x84\xE4\xBC\xB0\xE8\xAF\xA5\xE8\xA1\x8C\xE4\xB9\x8B\xE5\x90\x8E\xE7\x9A\x84\xE6\x96\x87\xE6\x9C\xAC\xE3\x80\x82\n"
"\n"
"{capel_suffix}";

const char* kJudgeSingle = R"([System]
Please act as an impartial judge and evaluate the quality of the response
provided by an AI assistant to the user question displayed below. Your
evaluation should consider factors such as the helpfulness, relevance,
accuracy, depth, creativity, and level of detail of the response. Begin
your evaluation by providing a short explanation. Be as objective as
possible. After providing your explanation, you must rate the response on
a scale of 1 to 10 by strictly following this format: "Rating: [[rating]]",
for example: "Rating: [[5]]".

[Question]
{question}

[The Start of Assistant's Answer]
{answer}
[The End of Assistant's Answer])";
// clang-format on

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

std::string unit_word(LengthTarget target, Language lang) {
    if (lang == Language::Chinese) {
        return target.unit == TokenUnit::CjkCharacter ? "\xE4\xB8\xAA\xE5\xAD\x97"
                                                      : "\xE4\xB8\xAA\xE8\xAF\x8D";
    }
    const bool one = target.value == 1;
    switch (target.unit) {
        case TokenUnit::EnglishWord: return one ? "word" : "words";
        case TokenUnit::CjkCharacter: return one ? "character" : "characters";
        case TokenUnit::CodeLine: return one ? "line" : "lines";
    }
    return "units";
}

void check_target(LengthTarget target) {
    if (target.value < 1) {
        throw InvalidTargetError("target length must be >= 1, got " +
                                 std::to_string(target.value));
    }
}

void check_config(const CapelConfig& cfg) {
    check_target(cfg.target);
    if (cfg.decrement != 1) {
        throw InvalidArgumentsError("countdown decrement is fixed at 1");
    }
    if (cfg.marker_open.empty() || cfg.marker_close.empty() ||
        cfg.marker_open == cfg.marker_close) {
        throw InvalidArgumentsError("marker delimiters must be non-empty and distinct");
    }
}

RenderedPrompt assemble(std::string_view task, std::string suffix_body,
                        PromptStrategy strategy, LengthTarget target) {
    RenderedPrompt out;
    out.task_text = std::string(task);
    out.suffix_text = "\n\n" + std::move(suffix_body);
    out.full_text = out.task_text + out.suffix_text;
    out.strategy = strategy;
    out.target = target;
    return out;
}

std::string capel_suffix_body(const CapelConfig& cfg, bool code_aware, Language lang,
                              const TemplateSet& templates) {
    std::string body =
        lang == Language::Chinese ? templates.capel_zh : templates.capel_en;
    if (code_aware) {
        body += lang == Language::Chinese ? templates.code_rule_zh
                                          : templates.code_rule_en;
    }
    body = replace_all(std::move(body), "{target_length}",
                       std::to_string(cfg.target.value));
    body = replace_all(std::move(body), "{mo}", cfg.marker_open);
    body = replace_all(std::move(body), "{mc}", cfg.marker_close);
    return body;
}

std::string read_file_if_present(const std::filesystem::path& path, std::string fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const char* to_string(Language lang) {
    return lang == Language::Chinese ? "zh" : "en";
}

const char* to_string(PromptStrategy::Kind kind) {
    switch (kind) {
        case PromptStrategy::Kind::Baseline: return "baseline";
        case PromptStrategy::Kind::Capel: return "capel";
        case PromptStrategy::Kind::DraftThenCapel: return "draft-capel";
    }
    return "?";
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set{
        kBaselineEn, kBaselineZh, kCapelEn,  kCapelZh,    kCodeRuleEn,
        kCodeRuleZh, kDraftEn,    kDraftZh,  kJudgeSingle,
    };
    return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    TemplateSet set = builtin();
    set.baseline_en = read_file_if_present(dir / "baseline_en.txt", set.baseline_en);
    set.baseline_zh = read_file_if_present(dir / "baseline_zh.txt", set.baseline_zh);
    set.capel_en = read_file_if_present(dir / "capel_en.txt", set.capel_en);
    set.capel_zh = read_file_if_present(dir / "capel_zh.txt", set.capel_zh);
    set.code_rule_en = read_file_if_present(dir / "code_rule_en.txt", set.code_rule_en);
    set.code_rule_zh = read_file_if_present(dir / "code_rule_zh.txt", set.code_rule_zh);
    set.draft_en = read_file_if_present(dir / "draft_en.txt", set.draft_en);
    set.draft_zh = read_file_if_present(dir / "draft_zh.txt", set.draft_zh);
    set.judge_single_answer =
        read_file_if_present(dir / "judge_single_answer.txt", set.judge_single_answer);
    return set;
}

RenderedPrompt render_baseline(std::string_view task, LengthTarget target,
                               Language language, const TemplateSet& templates) {
    check_target(target);
    std::string body =
        language == Language::Chinese ? templates.baseline_zh : templates.baseline_en;
    body = replace_all(std::move(body), "{target_length}", std::to_string(target.value));
    body = replace_all(std::move(body), "{unit}", unit_word(target, language));
    PromptStrategy strategy{PromptStrategy::Kind::Baseline, false, language};
    return assemble(task, std::move(body), strategy, target);
}

RenderedPrompt render_capel(std::string_view task, const CapelConfig& cfg,
                            bool code_aware, Language language,
                            const TemplateSet& templates) {
    check_config(cfg);
    PromptStrategy strategy{PromptStrategy::Kind::Capel, code_aware, language};
    return assemble(task, capel_suffix_body(cfg, code_aware, language, templates),
                    strategy, cfg.target);
}

RenderedPrompt render_draft_then_capel(std::string_view task, const CapelConfig& cfg,
                                       Language language, const TemplateSet& templates) {
    check_config(cfg);
    std::string wrapper =
        language == Language::Chinese ? templates.draft_zh : templates.draft_en;
    wrapper = replace_all(std::move(wrapper), "{capel_suffix}",
                          capel_suffix_body(cfg, false, language, templates));
    PromptStrategy strategy{PromptStrategy::Kind::DraftThenCapel, false, language};
    return assemble(task, std::move(wrapper), strategy, cfg.target);
}

std::string_view extract_final_section(std::string_view response) {
    const std::size_t pos = response.rfind(kDraftSentinel);
    if (pos == std::string_view::npos) return response;
    std::size_t start = pos + kDraftSentinel.size();
    // Skip the remainder of the sentinel line.
    while (start < response.size() && response[start] != '\n') ++start;
    if (start < response.size()) ++start;
    return response.substr(start);
}

}  // namespace capel
