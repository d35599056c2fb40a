#include "capel/bbmh.hpp"

#include "capel/errors.hpp"
#include "capel/marker_parser.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace capel {

namespace {

bool uses_memory(MhVariant variant) {
    return variant != MhVariant::IterativeAcceptance;
}

bool uses_acceptance(MhVariant variant) {
    return variant != MhVariant::IterativeMemory;
}

// Replies may arrive either as plain prose or in countdown format; a
// countdown reply is measured with its markers stripped.
long measured_reply_length(std::string_view reply, LengthTarget target) {
    const ParsedOutput parsed = parse(reply, target);
    if (!parsed.pairs.empty()) {
        return static_cast<long>(measure_length(strip_markers(parsed), target.unit));
    }
    return static_cast<long>(measure_length(reply, target.unit));
}

std::string unit_phrase(LengthTarget target) {
    return std::to_string(target.value) + " " +
           (target.unit == TokenUnit::CjkCharacter
                ? (target.value == 1 ? "character" : "characters")
                : (target.value == 1 ? "word" : "words"));
}

}  // namespace

const char* to_string(MhVariant variant) {
    switch (variant) {
        case MhVariant::IterativeAcceptance: return "iterative_acceptance";
        case MhVariant::IterativeMemory: return "iterative_memory";
        case MhVariant::IterativeAcceptanceMemory: return "iterative_acceptance_memory";
    }
    return "?";
}

std::optional<MhVariant> mh_variant_from_string(std::string_view name) {
    if (name == "iterative_acceptance" || name == "acc") {
        return MhVariant::IterativeAcceptance;
    }
    if (name == "iterative_memory" || name == "mem") return MhVariant::IterativeMemory;
    if (name == "iterative_acceptance_memory" || name == "acc-mem" ||
        name == "accmem") {
        return MhVariant::IterativeAcceptanceMemory;
    }
    return std::nullopt;
}

RenderedPrompt build_revision_prompt(std::string_view task,
                                     const std::vector<MhExchange>& history,
                                     LengthTarget target, MhVariant variant,
                                     Language language) {
    if (!uses_memory(variant) || history.empty()) {
        if (uses_memory(variant) && history.empty()) {
            throw InvalidArgumentsError(
                "memory variants require a non-empty history; use the baseline "
                "prompt for the first draw");
        }
        return render_baseline(task, target, language);
    }

    std::ostringstream suffix;
    suffix << "Previous attempts at this instruction:\n";
    int i = 0;
    for (const MhExchange& ex : history) {
        suffix << "\nAttempt " << ++i << " (measured " << ex.achieved << " "
               << (target.unit == TokenUnit::CjkCharacter ? "characters" : "words")
               << "):\n" << ex.reply << "\n";
    }
    suffix << "\nRevise your answer so that it contains exactly " << unit_phrase(target)
           << ".";

    RenderedPrompt out;
    out.task_text = std::string(task);
    out.suffix_text = "\n\n" + suffix.str();
    out.full_text = out.task_text + out.suffix_text;
    out.strategy = PromptStrategy{PromptStrategy::Kind::Baseline, false, language};
    out.target = target;
    return out;
}

MhOutcome run_bbmh(ModelBackend& backend, std::string_view task, LengthTarget target,
                   MhVariant variant, const MhConfig& config, Language language) {
    if (config.max_steps < 1) throw InvalidArgumentsError("max_steps must be >= 1");
    if (target.value < 1) throw InvalidTargetError("target must be >= 1");

    const auto weight =
        config.weight ? config.weight : [tau = config.tau](long abs_error) {
            return std::exp(-static_cast<double>(abs_error) / tau);
        };

    std::mt19937 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MhOutcome out;
    std::optional<std::pair<std::string, long>> current;  // (reply, abs error)
    std::optional<std::pair<std::string, long>> best;
    long best_achieved = 0;
    std::string fallback;  // first draw, used when every proposal is filtered out
    long fallback_achieved = 0;

    for (int step = 1; step <= config.max_steps; ++step) {
        // The first draw has no history yet: every variant starts from the
        // plain exact-length prompt.
        const MhVariant step_variant =
            out.history.empty() ? MhVariant::IterativeAcceptance : variant;
        const RenderedPrompt prompt =
            build_revision_prompt(task, out.history, target, step_variant, language);
        const Completion reply = complete(backend, prompt, config.params);
        const long achieved = measured_reply_length(reply.text, target);
        out.history.push_back({prompt.full_text, reply.text, achieved});
        out.iterations_used = step;

        if (step == 1) {
            fallback = reply.text;
            fallback_achieved = achieved;
        }

        // Upper-bound filter: over-length proposals consume a step but
        // never enter the acceptance ratio.
        if (achieved > target.value) continue;

        const long err = std::labs(achieved - target.value);
        if (!best || err < best->second) {
            best = {reply.text, err};
            best_achieved = achieved;
        }

        if (uses_acceptance(variant) && current) {
            ++out.acceptance_tests;
            const double wc = weight(err);
            const double wx = weight(current->second);
            // Tie keeps the current state, for determinism under a seed.
            const double ratio = wx > 0 ? wc / wx : (wc > 0 ? 2.0 : 1.0);
            if (ratio > 1.0 || unit(rng) < ratio) {
                if (wc != wx || ratio > 1.0) current = {reply.text, err};
            }
        } else {
            current = {reply.text, err};
        }

        if (err == 0) break;
    }

    if (best) {
        out.final_reply = best->first;
        out.achieved = best_achieved;
    } else {
        out.final_reply = fallback;
        out.achieved = fallback_achieved;
    }
    out.exact = out.achieved == target.value && best.has_value();
    return out;
}

std::string format_bbmh_table(const std::vector<BbmhTableRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "Model" << std::setw(28) << "Method"
       << std::right << std::setw(8) << "MALD" << std::setw(9) << "EM (%)"
       << std::setw(10) << "Avg Iter" << std::setw(8) << "Score" << "\n";
    os << std::string(81, '-') << "\n";
    for (const BbmhTableRow& row : rows) {
        os << std::left << std::setw(18) << row.model << std::setw(28) << row.method
           << std::right << std::fixed << std::setprecision(3) << std::setw(8)
           << row.mald << std::setprecision(1) << std::setw(9) << row.em_pct
           << std::setprecision(2) << std::setw(10) << row.avg_iter;
        if (row.score) {
            os << std::setw(8) << std::setprecision(2) << *row.score;
        } else {
            os << std::setw(8) << "-";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace capel
