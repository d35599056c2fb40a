#pragma once

#include "capel/errors.hpp"

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace capel {

class ModelBackend;  // llm_gateway

/// (target, measured) pair; the atom all aggregates consume.
struct LengthRecord {
    long target = 1;    // l, >= 1
    long achieved = 0;  // l-hat, >= 0
    std::map<std::string, std::string> group_keys;  // model, strategy, ...
};

struct ComplianceSummary {
    std::size_t n = 0;
    double em = 0.0;    // fraction in [0,1]
    double mae = 0.0;
    double mald = 0.0;
    double ld = 0.0;    // percentage scale
    double ls = 0.0;    // [0,100]
};

double exact_match(std::span<const LengthRecord> records);
double mae(std::span<const LengthRecord> records);
double mald(std::span<const LengthRecord> records);

/// Piecewise-linear mapping from relative deviation to a [0,100] score.
/// Default: 100 at zero deviation, linearly down to 0 at 100% deviation,
/// clamped outside the knots. The benchmark's official definition can be
/// dropped in by replacing the knot table.
struct LengthScoreMapping {
    std::vector<std::pair<double, double>> knots = {{0.0, 100.0}, {1.0, 0.0}};
    double score(double relative_deviation) const;
};

struct LifebenchOptions {
    bool signed_deviation = false;  // default: absolute deviation
    LengthScoreMapping mapping;
};

/// (LD, LS). LD = 100 x mean relative deviation; LS = mean mapped score.
std::pair<double, double> lifebench_scores(std::span<const LengthRecord> records,
                                           const LifebenchOptions& opts = {});

ComplianceSummary summarize_compliance(std::span<const LengthRecord> records,
                                       const LifebenchOptions& opts = {});

struct RougeVariant {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RougeScores {
    RougeVariant rouge1;
    RougeVariant rouge2;
    RougeVariant rougeL;
};

/// Unigram/bigram overlap and LCS F-measures over English word tokens,
/// lowercased with edge punctuation stripped. Throws UndefinedScoreError
/// when the reference has no tokens.
RougeScores rouge(std::string_view candidate, std::string_view reference);

/// Sends the single-answer grading prompt and parses the "[[rating]]"
/// pattern. Throws JudgeParseError when no rating is found.
double judge_single_answer(std::string_view question, std::string_view answer,
                           ModelBackend& backend);
double judge_single_answer(std::string_view question, std::string_view answer,
                           ModelBackend& backend, std::string_view prompt_template);

}  // namespace capel
