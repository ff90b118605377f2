#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "oppbench/dataset.hpp"
#include "oppbench/detail/strings.hpp"

// Extraction of "Rating: <1-5>; Explanation: <text>" from raw model output.
//
// The tolerant mode accepts a closed list of relaxations and nothing else:
//   * a newline instead of the semicolon between rating and explanation;
//   * the "Rating"/"Explanation" tokens decorated with markdown emphasis or
//     heading characters (e.g. "**Rating:** 4"), matched case-insensitively,
//     or followed by unusual punctuation instead of the colon;
//   * the rating appearing as the first standalone integer after the token
//     (e.g. "Rating: level 4"), as long as it comes before any
//     "Explanation" token;
//   * reasoning text before the rating (step-by-step transcripts restate
//     candidates before concluding): the LAST line that starts with a
//     "Rating" token wins. Tokens in the middle of a line never count as
//     markers, so explanations that merely mention "Rating: 3" stay inert.
// Everything else is a failure, reported as data rather than thrown.

namespace oppbench {

enum class ParseStatus { exact, tolerant, failed };

inline std::string_view parse_status_name(ParseStatus s) {
    switch (s) {
        case ParseStatus::exact: return "exact";
        case ParseStatus::tolerant: return "tolerant";
        case ParseStatus::failed: return "failed";
    }
    return "failed";
}

inline ParseStatus parse_status_from_name(std::string_view name) {
    for (ParseStatus s : {ParseStatus::exact, ParseStatus::tolerant, ParseStatus::failed})
        if (name == parse_status_name(s)) return s;
    throw Error("unknown parse status \"" + std::string(name) + "\"");
}

struct ParsedJudgment {
    std::optional<OppressionLevel> rating;
    std::string explanation;
    ParseStatus parse_status = ParseStatus::failed;
    std::string failure_reason; // set iff parse_status == failed
};

namespace detail {

inline bool is_ascii_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Case-insensitive token match at `pos` with word boundaries on both sides.
inline bool token_at(std::string_view s, std::size_t pos, std::string_view token) {
    if (pos + token.size() > s.size()) return false;
    if (!starts_with_icase(s.substr(pos), token)) return false;
    if (pos > 0 && is_ascii_alnum(s[pos - 1])) return false;
    std::size_t after = pos + token.size();
    if (after < s.size() && is_ascii_alnum(s[after])) return false;
    return true;
}

/// Characters tolerated before a marker token at the start of a line.
inline bool is_line_decoration(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '*' || c == '_' || c == '#' || c == '>' ||
           c == '-';
}

/// Start offsets of every line that opens with a "Rating" token.
inline std::optional<std::size_t> last_rating_marker(std::string_view s) {
    std::optional<std::size_t> found;
    std::size_t line_start = 0;
    while (line_start <= s.size()) {
        std::size_t p = line_start;
        while (p < s.size() && is_line_decoration(s[p])) ++p;
        if (token_at(s, p, "Rating")) found = p;
        auto nl = s.find('\n', line_start);
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }
    return found;
}

/// First "Explanation" token at or after `from`, or npos.
inline std::size_t find_explanation_token(std::string_view s, std::size_t from) {
    for (std::size_t i = from; i + 11 <= s.size(); ++i) {
        if (token_at(s, i, "Explanation")) return i;
    }
    return std::string_view::npos;
}

/// Text following an "Explanation" token: skips decoration and one separator.
inline std::string explanation_after_token(std::string_view s, std::size_t token_pos) {
    std::size_t p = token_pos + 11; // strlen("Explanation")
    auto skip_decor = [&] {
        while (p < s.size() && (s[p] == '*' || s[p] == '_' || s[p] == ' ' || s[p] == '\t')) ++p;
    };
    skip_decor();
    if (p < s.size() && (s[p] == ':' || s[p] == '-' || s[p] == '=')) ++p;
    skip_decor();
    return std::string(trim(s.substr(p)));
}

struct ExactParts {
    int rating;
    std::string explanation;
};

/// Canonical "Rating: <d>; Explanation: <text>" modulo surrounding
/// whitespace (inner spacing around the punctuation may stretch).
inline std::optional<ExactParts> match_exact(std::string_view raw) {
    std::string_view s = trim(raw);
    std::size_t p = 0;
    auto skip_spaces = [&] {
        while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
    };
    if (s.substr(p, 6) != "Rating") return std::nullopt;
    p += 6;
    skip_spaces();
    if (p >= s.size() || s[p] != ':') return std::nullopt;
    ++p;
    skip_spaces();
    if (p >= s.size() || !is_digit(s[p])) return std::nullopt;
    if (s[p] < '1' || s[p] > '5') return std::nullopt;
    int rating = s[p] - '0';
    ++p;
    if (p < s.size() && is_digit(s[p])) return std::nullopt; // multi-digit
    skip_spaces();
    if (p >= s.size() || s[p] != ';') return std::nullopt;
    ++p;
    skip_spaces();
    if (s.substr(p, 11) != "Explanation") return std::nullopt;
    p += 11;
    skip_spaces();
    if (p >= s.size() || s[p] != ':') return std::nullopt;
    ++p;
    return ExactParts{rating, std::string(trim(s.substr(p)))};
}

} // namespace detail

/// Canonical rendering of a judgment; round-trips through parse_judgment
/// with status `exact`.
inline std::string format_judgment(OppressionLevel rating, std::string_view explanation) {
    std::string out = "Rating: ";
    out += static_cast<char>('0' + rating.value());
    out += "; Explanation: ";
    out += explanation;
    return out;
}

namespace detail {

/// The tolerant rules alone (no exact short-circuit). Every exact string must
/// also succeed here with the same rating — the monotone-strictness property.
inline ParsedJudgment parse_tolerant(std::string_view raw) {
    ParsedJudgment result;
    auto fail = [&](std::string reason) {
        result.parse_status = ParseStatus::failed;
        result.failure_reason = std::move(reason);
        return result;
    };

    auto marker = last_rating_marker(raw);
    if (!marker) return fail("no rating marker");

    // First standalone integer after the token, stopping at any
    // "Explanation" token.
    std::size_t scan = *marker + 6; // strlen("Rating")
    std::size_t limit = find_explanation_token(raw, scan);
    if (limit == std::string_view::npos) limit = raw.size();

    std::size_t digits_begin = std::string_view::npos;
    for (std::size_t i = scan; i < limit; ++i) {
        if (is_digit(raw[i])) {
            digits_begin = i;
            break;
        }
    }
    if (digits_begin == std::string_view::npos) return fail("no rating value");

    std::size_t digits_end = digits_begin;
    while (digits_end < raw.size() && is_digit(raw[digits_end])) ++digits_end;
    if (digits_end < raw.size() && raw[digits_end] == '.' && digits_end + 1 < raw.size() &&
        is_digit(raw[digits_end + 1])) {
        return fail("non-integer rating");
    }
    if (digits_end - digits_begin > 1) return fail("rating out of range");
    int value = raw[digits_begin] - '0';
    if (value < OppressionLevel::kMin || value > OppressionLevel::kMax) {
        return fail("rating out of range");
    }

    result.rating = OppressionLevel::from_value(value);
    auto expl_pos = find_explanation_token(raw, digits_end);
    result.explanation =
        expl_pos == std::string_view::npos ? std::string() : explanation_after_token(raw, expl_pos);
    result.parse_status = ParseStatus::tolerant;
    return result;
}

} // namespace detail

/// Never throws; malformed output comes back as parse_status == failed.
inline ParsedJudgment parse_judgment(std::string_view raw) {
    if (auto exact = detail::match_exact(raw)) {
        ParsedJudgment result;
        result.rating = OppressionLevel::from_value(exact->rating);
        result.explanation = std::move(exact->explanation);
        result.parse_status = ParseStatus::exact;
        return result;
    }
    return detail::parse_tolerant(raw);
}

} // namespace oppbench
