#pragma once

// Minimal RFC 4180 reader/writer: quoted fields, embedded commas, quotes and
// newlines, CRLF line endings. Nothing more.

#include <string>
#include <string_view>
#include <vector>

namespace oppbench::detail {

struct CsvParseResult {
    std::vector<std::vector<std::string>> rows;
    bool ok = true;
    std::string error;
    std::size_t error_row = 0; // 0-based physical record index
};

inline CsvParseResult parse_csv(std::string_view text) {
    CsvParseResult result;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    std::size_t i = 0;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        result.rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    result.ok = false;
                    result.error = "unexpected quote inside unquoted field";
                    result.error_row = result.rows.size();
                    return result;
                }
                in_quotes = true;
                row_started = true;
                ++i;
                break;
            case ',':
                end_field();
                row_started = true;
                ++i;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                [[fallthrough]];
            case '\n':
                end_row();
                ++i;
                break;
            default:
                field.push_back(c);
                row_started = true;
                ++i;
                break;
        }
    }
    if (in_quotes) {
        result.ok = false;
        result.error = "unterminated quoted field";
        result.error_row = result.rows.size();
        return result;
    }
    if (row_started || !field.empty() || !row.empty()) end_row();
    return result;
}

inline std::string csv_escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace oppbench::detail
