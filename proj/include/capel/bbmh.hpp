#pragma once

#include "capel/llm_gateway.hpp"
#include "capel/prompting.hpp"
#include "capel/text_units.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace capel {

/// The three iterative resampling variants: plain accept/reject, full
/// dialogue history without the acceptance test, and both combined.
enum class MhVariant { IterativeAcceptance, IterativeMemory, IterativeAcceptanceMemory };

const char* to_string(MhVariant variant);
std::optional<MhVariant> mh_variant_from_string(std::string_view name);

struct MhExchange {
    std::string prompt;
    std::string reply;
    long achieved = 0;
};

struct MhConfig {
    int max_steps = 15;
    double tau = 1.0;  // length-unit scale of the acceptance potential
    unsigned seed = 42;
    DecodingParams params;
    /// Candidate weight; the acceptance ratio is w(candidate)/w(current).
    /// Injectable so a different kernel can be swapped in.
    std::function<double(long abs_error)> weight;
};

struct MhOutcome {
    std::string final_reply;
    long achieved = 0;
    int iterations_used = 0;
    bool exact = false;
    int acceptance_tests = 0;  // instrumentation; 0 for the memory variant
    std::vector<MhExchange> history;
};

/// Revision prompt for the next proposal. Memory variants restate every
/// prior reply with its measured length; the pure-acceptance variant sees
/// only the task and the length instruction.
RenderedPrompt build_revision_prompt(std::string_view task,
                                     const std::vector<MhExchange>& history,
                                     LengthTarget target, MhVariant variant,
                                     Language language = Language::English);

/// Accept/reject resampling toward the exact target length. Proposals
/// longer than the target are discarded before the acceptance test; the
/// loop stops early on an exact match and is capped at max_steps. If no
/// proposal survives the filter, the first (baseline) reply is returned
/// flagged non-exact.
MhOutcome run_bbmh(ModelBackend& backend, std::string_view task, LengthTarget target,
                   MhVariant variant, const MhConfig& config = {},
                   Language language = Language::English);

/// One row of the iterative-baseline results table
/// (Model / Method / MALD / EM (%) / Avg Iter / Score).
struct BbmhTableRow {
    std::string model;
    std::string method;
    double mald = 0.0;
    double em_pct = 0.0;
    double avg_iter = 0.0;
    std::optional<double> score;
};

std::string format_bbmh_table(const std::vector<BbmhTableRow>& rows);

}  // namespace capel
