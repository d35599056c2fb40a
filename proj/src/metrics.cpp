#include "capel/metrics.hpp"

#include "capel/llm_gateway.hpp"
#include "capel/prompting.hpp"
#include "capel/text_units.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>

namespace capel {

namespace {

void require_nonempty(std::span<const LengthRecord> records) {
    if (records.empty()) throw EmptyInputError("no length records");
}

double abs_err(const LengthRecord& r) {
    return std::abs(static_cast<double>(r.achieved) - static_cast<double>(r.target));
}

std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (const TokenSpan& span : tokenize_english(text)) {
        std::string tok;
        for (char c : span.surface) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                tok += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else if (static_cast<unsigned char>(c) >= 0x80) {
                tok += c;  // keep non-ASCII bytes as-is for identity
            }
        }
        if (!tok.empty()) out.push_back(std::move(tok));
    }
    return out;
}

RougeVariant f_measure(double matches, double cand_total, double ref_total) {
    RougeVariant v;
    v.precision = cand_total > 0 ? matches / cand_total : 0.0;
    v.recall = ref_total > 0 ? matches / ref_total : 0.0;
    v.f1 = (v.precision + v.recall) > 0
               ? 2.0 * v.precision * v.recall / (v.precision + v.recall)
               : 0.0;
    return v;
}

RougeVariant rouge_n(const std::vector<std::string>& cand,
                     const std::vector<std::string>& ref, std::size_t n) {
    auto ngrams = [n](const std::vector<std::string>& toks) {
        std::map<std::string, long> counts;
        if (toks.size() >= n) {
            for (std::size_t i = 0; i + n <= toks.size(); ++i) {
                std::string key;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j) key += '\x1f';
                    key += toks[i + j];
                }
                ++counts[key];
            }
        }
        return counts;
    };
    const auto c = ngrams(cand);
    const auto r = ngrams(ref);
    double matches = 0, cand_total = 0, ref_total = 0;
    for (const auto& [k, v] : c) cand_total += v;
    for (const auto& [k, v] : r) ref_total += v;
    for (const auto& [k, v] : c) {
        auto it = r.find(k);
        if (it != r.end()) matches += std::min(v, it->second);
    }
    return f_measure(matches, cand_total, ref_total);
}

RougeVariant rouge_lcs(const std::vector<std::string>& cand,
                       const std::vector<std::string>& ref) {
    const std::size_t n = cand.size(), m = ref.size();
    std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j] = (cand[i - 1] == ref[j - 1]) ? prev[j - 1] + 1
                                                 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return f_measure(static_cast<double>(prev[m]), static_cast<double>(n),
                     static_cast<double>(m));
}

}  // namespace

double exact_match(std::span<const LengthRecord> records) {
    require_nonempty(records);
    const auto hits = std::count_if(records.begin(), records.end(),
                                    [](const LengthRecord& r) {
                                        return r.achieved == r.target;
                                    });
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

double mae(std::span<const LengthRecord> records) {
    require_nonempty(records);
    double sum = 0.0;
    for (const auto& r : records) sum += abs_err(r);
    return sum / static_cast<double>(records.size());
}

double mald(std::span<const LengthRecord> records) {
    require_nonempty(records);
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.target < 1) throw InvalidArgumentsError("record target must be >= 1");
        sum += abs_err(r) / static_cast<double>(r.target);
    }
    return sum / static_cast<double>(records.size());
}

double LengthScoreMapping::score(double relative_deviation) const {
    if (knots.empty()) return 0.0;
    if (relative_deviation <= knots.front().first) return knots.front().second;
    if (relative_deviation >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const auto& [x0, y0] = knots[i - 1];
        const auto& [x1, y1] = knots[i];
        if (relative_deviation <= x1) {
            const double t = (relative_deviation - x0) / (x1 - x0);
            return y0 + t * (y1 - y0);
        }
    }
    return knots.back().second;
}

std::pair<double, double> lifebench_scores(std::span<const LengthRecord> records,
                                           const LifebenchOptions& opts) {
    require_nonempty(records);
    double dev_sum = 0.0, score_sum = 0.0;
    for (const auto& r : records) {
        if (r.target < 1) throw InvalidArgumentsError("record target must be >= 1");
        const double signed_dev =
            (static_cast<double>(r.achieved) - static_cast<double>(r.target)) /
            static_cast<double>(r.target);
        dev_sum += opts.signed_deviation ? signed_dev : std::abs(signed_dev);
        score_sum += opts.mapping.score(std::abs(signed_dev));
    }
    const double n = static_cast<double>(records.size());
    return {100.0 * dev_sum / n, score_sum / n};
}

ComplianceSummary summarize_compliance(std::span<const LengthRecord> records,
                                       const LifebenchOptions& opts) {
    ComplianceSummary s;
    s.n = records.size();
    s.em = exact_match(records);
    s.mae = mae(records);
    s.mald = mald(records);
    std::tie(s.ld, s.ls) = lifebench_scores(records, opts);
    return s;
}

RougeScores rouge(std::string_view candidate, std::string_view reference) {
    const auto cand = rouge_tokens(candidate);
    const auto ref = rouge_tokens(reference);
    if (ref.empty()) throw UndefinedScoreError("reference has no tokens");
    RougeScores s;
    s.rouge1 = rouge_n(cand, ref, 1);
    s.rouge2 = rouge_n(cand, ref, 2);
    s.rougeL = rouge_lcs(cand, ref);
    return s;
}

double judge_single_answer(std::string_view question, std::string_view answer,
                           ModelBackend& backend) {
    return judge_single_answer(question, answer, backend,
                               TemplateSet::builtin().judge_single_answer);
}

double judge_single_answer(std::string_view question, std::string_view answer,
                           ModelBackend& backend, std::string_view prompt_template) {
    std::string prompt(prompt_template);
    auto sub = [&prompt](std::string_view key, std::string_view value) {
        const std::size_t pos = prompt.find(key);
        if (pos != std::string::npos) prompt.replace(pos, key.size(), value);
    };
    sub("{question}", question);
    sub("{answer}", answer);

    ChatRequest req;
    req.user = prompt;
    const Completion reply = backend.complete(req, DecodingParams{.temperature = 0.0});

    static const std::regex rating_re(R"(\[\[([0-9]+(?:\.[0-9]+)?)\]\])");
    std::smatch m;
    if (!std::regex_search(reply.text, m, rating_re)) {
        throw JudgeParseError("no [[rating]] pattern in judge reply: " + reply.text);
    }
    const double score = std::stod(m[1].str());
    if (score < 1.0 || score > 10.0) {
        throw JudgeParseError("rating " + m[1].str() + " outside [1,10]");
    }
    return score;
}

}  // namespace capel
