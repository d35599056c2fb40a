#pragma once

#include "capel/text_units.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace capel {

enum class Language { English, Chinese };

const char* to_string(Language lang);

struct PromptStrategy {
    enum class Kind { Baseline, Capel, DraftThenCapel };
    Kind kind = Kind::Baseline;
    bool code_aware = false;  // never set for Baseline
    Language language = Language::English;
};

const char* to_string(PromptStrategy::Kind kind);

struct CapelConfig {
    LengthTarget target;
    int decrement = 1;  // fixed at 1; anything else is rejected
    std::string marker_open = "<";
    std::string marker_close = ">";
};

struct RenderedPrompt {
    std::string task_text;
    std::string suffix_text;  // includes the separator; full = task + suffix
    std::string full_text;
    PromptStrategy strategy;
    LengthTarget target;
};

/// The sentinel line separating draft from final answer in the
/// draft-then-revise strategy. Evaluation keeps only text after the last
/// occurrence.
inline constexpr std::string_view kDraftSentinel = "===== FINAL ANSWER =====";

/// Prompt templates, loadable from plain-text files with named
/// placeholders ({target_length}, {unit}, {mo}, {mc}). builtin() returns
/// the compiled-in defaults, which are identical to the files shipped
/// under templates/.
struct TemplateSet {
    std::string baseline_en;
    std::string baseline_zh;
    std::string capel_en;
    std::string capel_zh;
    std::string code_rule_en;
    std::string code_rule_zh;
    std::string draft_en;
    std::string draft_zh;
    std::string judge_single_answer;

    static const TemplateSet& builtin();
    /// Loads any template files present in `dir` on top of the builtins.
    static TemplateSet load_dir(const std::filesystem::path& dir);
};

/// One-sentence exact-length instruction, no counting scaffold.
RenderedPrompt render_baseline(std::string_view task, LengthTarget target,
                               Language language = Language::English,
                               const TemplateSet& templates = TemplateSet::builtin());

/// The countdown suffix: format rules, count/ordering rules, the fixed
/// N = 5 worked example, and the error examples, with the target length
/// substituted. `code_aware` appends the one-line code rule.
RenderedPrompt render_capel(std::string_view task, const CapelConfig& cfg,
                            bool code_aware = false,
                            Language language = Language::English,
                            const TemplateSet& templates = TemplateSet::builtin());

/// Single-response draft-then-revise: free-form draft, sentinel line, then
/// a countdown-formatted revision. Only the revision is evaluated.
RenderedPrompt render_draft_then_capel(std::string_view task, const CapelConfig& cfg,
                                       Language language = Language::English,
                                       const TemplateSet& templates = TemplateSet::builtin());

/// Returns the text after the last draft sentinel; the whole text when no
/// sentinel is present.
std::string_view extract_final_section(std::string_view response);

}  // namespace capel
