#pragma once

#include "capel/text_units.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capel {

/// One `<k>token` unit of a countdown response. `token` is absent only for
/// the terminal `<0>` marker (or a bare marker captured for validation).
struct MarkerPair {
    int k = 0;
    std::optional<std::string> token;
    std::size_t marker_pos = 0;  // byte offset of '<'
    bool leading_gap = false;    // whitespace between marker and token (warned, tolerated)

    bool has_token() const { return token.has_value() && !token->empty(); }
};

/// Decoded countdown response. Structural problems are preserved here and
/// surfaced by validate(); parse() itself never fails.
struct ParsedOutput {
    std::vector<MarkerPair> pairs;  // source order, terminal zero included
    bool has_terminal_zero = false;
    std::string leading_text;   // non-marker text before the first marker
    std::string trailing_text;  // text after the terminal marker
    LengthTarget source_target;
    bool code_mode = false;

    std::size_t token_count() const;  // pairs with k >= 1 and a token
};

enum class ErrorClass {
    EarlyStop,
    MissingTerminal,
    DuplicateMarker,
    SkippedMarker,
    BackToBackMarkers,
    MarkersOnlyTail,
    TrailingContent,
    WrongStartValue,
    OffByOneFusion,
};

const char* to_string(ErrorClass cls);
std::optional<ErrorClass> error_class_from_string(std::string_view name);

struct ValidationError {
    ErrorClass cls;
    std::size_t byte_pos = 0;
    std::string detail;
};

struct ValidationReport {
    bool valid = false;
    std::vector<ValidationError> errors;
    std::vector<std::string> warnings;  // advisory only, never affect `valid`
    std::size_t achieved_length = 0;

    bool has(ErrorClass cls) const;
    /// The error class a report is filed under when one must be chosen.
    /// Fusion, markers-only-tail, and early stop take precedence over the
    /// generic ordering violations they co-occur with.
    std::optional<ErrorClass> primary_error() const;
};

/// Number of consecutive bare markers that turns a slip into a
/// markers-only tail.
inline constexpr int kMarkersOnlyTailRun = 3;

/// Decodes a raw model reply against a target; total, never throws.
ParsedOutput parse(std::string_view raw, LengthTarget target, bool code_mode = false);

ValidationReport validate(const ParsedOutput& parsed);

/// Concatenates tokens in order: single spaces between English words,
/// nothing between Chinese characters. In code mode a token keeps its
/// trailing newline and no space is inserted after it.
std::string strip_markers(const ParsedOutput& parsed);

/// Emits the canonical `<N>tok...<1>tok<0>` string for a token list.
/// Throws InvalidArgumentsError on a length mismatch or a malformed token.
std::string synthesize(const std::vector<std::string>& tokens, LengthTarget target,
                       bool code_mode = false);

}  // namespace capel
