#include "capel/marker_parser.hpp"

#include "capel/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace capel {

namespace {

struct RawMarker {
    int value;
    std::size_t pos;   // byte offset of '<'
    std::size_t end;   // one past '>'
};

// Collects every well-formed `<integer>` marker. Anything else, including
// `<k>` or unclosed brackets, stays token text.
std::vector<RawMarker> scan_markers(std::string_view raw) {
    std::vector<RawMarker> markers;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        if (raw[pos] != '<') {
            ++pos;
            continue;
        }
        std::size_t i = pos + 1;
        while (i < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i]))) ++i;
        if (i > pos + 1 && i < raw.size() && raw[i] == '>' && i - pos - 1 <= 9) {
            markers.push_back({std::stoi(std::string(raw.substr(pos + 1, i - pos - 1))),
                               pos, i + 1});
            pos = i + 1;
        } else {
            ++pos;
        }
    }
    return markers;
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool all_whitespace(std::string_view s) { return trim(s).empty(); }

// A digit run glued to a stray angle bracket is the footprint of a marker
// that lost one delimiter to truncation or fusion.
bool has_fusion_remnant(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '<' && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            return true;
        }
        if (s[i] == '>' && i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) {
            return true;
        }
    }
    return false;
}

void add_filler_warnings(const ParsedOutput& parsed, std::vector<std::string>& warnings) {
    // Advisory n-gram heuristic; "repeated filler" is not decidable in general.
    std::vector<std::string_view> toks;
    for (const auto& p : parsed.pairs) {
        if (p.k >= 1 && p.has_token()) toks.push_back(*p.token);
    }
    std::size_t run = 1;
    for (std::size_t i = 1; i < toks.size(); ++i) {
        run = (toks[i] == toks[i - 1]) ? run + 1 : 1;
        if (run == 5) {
            warnings.push_back("possible repeated filler: token '" +
                               std::string(toks[i]) + "' repeated 5+ times");
            return;
        }
    }
    // Period-2 repetition (ab ab ab ab ...).
    run = 0;
    for (std::size_t i = 2; i < toks.size(); ++i) {
        run = (toks[i] == toks[i - 2]) ? run + 1 : 0;
        if (run >= 8) {
            warnings.push_back("possible repeated filler: alternating bigram loop");
            return;
        }
    }
}

}  // namespace

const char* to_string(ErrorClass cls) {
    switch (cls) {
        case ErrorClass::EarlyStop: return "EarlyStop";
        case ErrorClass::MissingTerminal: return "MissingTerminal";
        case ErrorClass::DuplicateMarker: return "DuplicateMarker";
        case ErrorClass::SkippedMarker: return "SkippedMarker";
        case ErrorClass::BackToBackMarkers: return "BackToBackMarkers";
        case ErrorClass::MarkersOnlyTail: return "MarkersOnlyTail";
        case ErrorClass::TrailingContent: return "TrailingContent";
        case ErrorClass::WrongStartValue: return "WrongStartValue";
        case ErrorClass::OffByOneFusion: return "OffByOneFusion";
    }
    return "?";
}

std::optional<ErrorClass> error_class_from_string(std::string_view name) {
    static const ErrorClass all[] = {
        ErrorClass::EarlyStop,      ErrorClass::MissingTerminal,
        ErrorClass::DuplicateMarker, ErrorClass::SkippedMarker,
        ErrorClass::BackToBackMarkers, ErrorClass::MarkersOnlyTail,
        ErrorClass::TrailingContent, ErrorClass::WrongStartValue,
        ErrorClass::OffByOneFusion,
    };
    for (ErrorClass cls : all) {
        if (name == to_string(cls)) return cls;
    }
    return std::nullopt;
}

std::size_t ParsedOutput::token_count() const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(),
                      [](const MarkerPair& p) { return p.k >= 1 && p.has_token(); }));
}

bool ValidationReport::has(ErrorClass cls) const {
    return std::any_of(errors.begin(), errors.end(),
                       [cls](const ValidationError& e) { return e.cls == cls; });
}

std::optional<ErrorClass> ValidationReport::primary_error() const {
    if (errors.empty()) return std::nullopt;
    if (has(ErrorClass::OffByOneFusion)) return ErrorClass::OffByOneFusion;
    if (has(ErrorClass::MarkersOnlyTail)) return ErrorClass::MarkersOnlyTail;
    if (has(ErrorClass::EarlyStop)) return ErrorClass::EarlyStop;
    return errors.front().cls;
}

ParsedOutput parse(std::string_view raw, LengthTarget target, bool code_mode) {
    ParsedOutput out;
    out.source_target = target;
    out.code_mode = code_mode;

    const std::vector<RawMarker> markers = scan_markers(raw);
    if (markers.empty()) {
        out.leading_text = std::string(raw);
        return out;
    }
    out.leading_text = std::string(raw.substr(0, markers.front().pos));

    for (std::size_t i = 0; i < markers.size(); ++i) {
        const RawMarker& m = markers[i];
        const std::size_t seg_end =
            (i + 1 < markers.size()) ? markers[i + 1].pos : raw.size();
        std::string_view segment = raw.substr(m.end, seg_end - m.end);

        MarkerPair pair;
        pair.k = m.value;
        pair.marker_pos = m.pos;

        const bool is_last = i + 1 == markers.size();
        if (m.value == 0 && is_last) {
            // Everything after the terminal marker is trailing text.
            out.trailing_text = std::string(segment);
        } else if (!all_whitespace(segment)) {
            pair.token = code_mode ? std::string(segment) : std::string(trim(segment));
            if (!code_mode && !segment.empty() &&
                std::isspace(static_cast<unsigned char>(segment.front()))) {
                pair.leading_gap = true;
            }
        }
        if (m.value == 0) out.has_terminal_zero = true;
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

ValidationReport validate(const ParsedOutput& parsed) {
    ValidationReport report;
    const int target = parsed.source_target.value;
    auto add = [&](ErrorClass cls, std::size_t pos, std::string detail) {
        report.errors.push_back({cls, pos, std::move(detail)});
    };

    const auto& pairs = parsed.pairs;

    if (!pairs.empty() && pairs.front().k != target) {
        std::ostringstream os;
        os << "first marker is <" << pairs.front().k << ">, expected <" << target << ">";
        add(ErrorClass::WrongStartValue, pairs.front().marker_pos, os.str());
    }

    // Strict decrement-by-1 over the whole sequence, terminal included.
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        const int prev = pairs[i - 1].k;
        const int cur = pairs[i].k;
        if (cur == prev - 1) continue;
        std::ostringstream os;
        os << "<" << prev << "> followed by <" << cur << ">";
        add(cur == prev ? ErrorClass::DuplicateMarker : ErrorClass::SkippedMarker,
            pairs[i].marker_pos, os.str());
    }

    // Bare markers; a run of kMarkersOnlyTailRun or more is the degenerate
    // tail pattern, reported once at its start.
    int bare_run = 0;
    std::size_t run_start = 0;
    bool tail_reported = false;
    for (const auto& p : pairs) {
        if (p.k < 1) continue;
        if (!p.has_token()) {
            if (bare_run == 0) run_start = p.marker_pos;
            ++bare_run;
            add(ErrorClass::BackToBackMarkers, p.marker_pos,
                "marker <" + std::to_string(p.k) + "> has no token");
            if (bare_run >= kMarkersOnlyTailRun && !tail_reported) {
                add(ErrorClass::MarkersOnlyTail, run_start,
                    std::to_string(bare_run) + "+ consecutive bare markers");
                tail_reported = true;
            }
        } else {
            bare_run = 0;
        }
    }

    if (!parsed.has_terminal_zero) {
        add(ErrorClass::MissingTerminal, 0, "no terminal <0> marker");
    }

    int min_k = 0;
    bool any_positive = false;
    for (const auto& p : pairs) {
        if (p.k >= 1) {
            min_k = any_positive ? std::min(min_k, p.k) : p.k;
            any_positive = true;
        }
    }
    if (!any_positive || min_k > 1) {
        add(ErrorClass::EarlyStop, 0,
            any_positive ? "stopped at <" + std::to_string(min_k) + ">"
                         : "no countdown markers emitted");
    }

    if (parsed.has_terminal_zero && !all_whitespace(parsed.trailing_text)) {
        add(ErrorClass::TrailingContent, 0, "non-whitespace content after <0>");
    }

    std::size_t achieved = parsed.token_count();
    if (!pairs.empty() && pairs.front().k >= 0) {
        achieved = std::min<std::size_t>(achieved,
                                         static_cast<std::size_t>(pairs.front().k));
    }
    report.achieved_length = achieved;

    // Off-by-one fusion: one token short and a marker footprint buried in
    // the surviving text.
    if (target >= 1 && achieved + 1 == static_cast<std::size_t>(target)) {
        bool remnant = has_fusion_remnant(parsed.leading_text) ||
                       has_fusion_remnant(parsed.trailing_text);
        for (const auto& p : pairs) {
            if (p.has_token() && has_fusion_remnant(*p.token)) remnant = true;
        }
        if (remnant) {
            add(ErrorClass::OffByOneFusion, 0,
                "one token short with a fused marker remnant");
        }
    }

    for (const auto& p : pairs) {
        if (p.leading_gap) {
            report.warnings.push_back("whitespace between <" + std::to_string(p.k) +
                                      "> and its token");
        }
    }
    add_filler_warnings(parsed, report.warnings);

    report.valid = report.errors.empty();
    return report;
}

std::string strip_markers(const ParsedOutput& parsed) {
    std::string out;
    const bool cjk = parsed.source_target.unit == TokenUnit::CjkCharacter;
    bool need_space = false;
    for (const auto& p : parsed.pairs) {
        if (p.k < 1 || !p.has_token()) continue;
        if (need_space) out += ' ';
        out += *p.token;
        if (parsed.code_mode) {
            need_space = out.empty() ? false : out.back() != '\n';
        } else {
            need_space = !cjk;
        }
    }
    return out;
}

std::string synthesize(const std::vector<std::string>& tokens, LengthTarget target,
                       bool code_mode) {
    if (static_cast<int>(tokens.size()) != target.value) {
        throw InvalidArgumentsError("token count " + std::to_string(tokens.size()) +
                                    " does not match target " +
                                    std::to_string(target.value));
    }
    const bool english = target.unit == TokenUnit::EnglishWord;
    for (const auto& tok : tokens) {
        if (tok.empty()) throw InvalidArgumentsError("empty token");
        if (english && !code_mode) {
            for (char c : tok) {
                if (std::isspace(static_cast<unsigned char>(c))) {
                    throw InvalidArgumentsError("whitespace inside token '" + tok + "'");
                }
            }
        }
    }
    std::string out;
    int k = target.value;
    for (const auto& tok : tokens) {
        out += '<';
        out += std::to_string(k--);
        out += '>';
        out += tok;
    }
    out += "<0>";
    return out;
}

}  // namespace capel
