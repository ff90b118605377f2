#pragma once

#include <array>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "oppbench/detail/csv.hpp"
#include "oppbench/detail/io.hpp"
#include "oppbench/detail/strings.hpp"
#include "oppbench/errors.hpp"

namespace oppbench {

/// One step on the five-point ordinal scale. Construction enforces 1..5 and
/// the label is always the canonical name for the value.
class OppressionLevel {
public:
    static constexpr int kMin = 1;
    static constexpr int kMax = 5;

    static const std::array<std::string_view, 5>& canonical_labels() {
        static const std::array<std::string_view, 5> labels = {
            "Little to No Oppression", "Low Oppression", "Moderate Oppression",
            "High Oppression", "Severe Oppression"};
        return labels;
    }

    static OppressionLevel from_value(int value) {
        if (value < kMin || value > kMax) {
            throw InvalidScoreError(value);
        }
        return OppressionLevel(value);
    }

    int value() const { return value_; }
    std::string_view label() const { return canonical_labels()[static_cast<std::size_t>(value_ - 1)]; }

    friend bool operator==(OppressionLevel a, OppressionLevel b) { return a.value_ == b.value_; }
    friend bool operator!=(OppressionLevel a, OppressionLevel b) { return a.value_ != b.value_; }
    friend bool operator<(OppressionLevel a, OppressionLevel b) { return a.value_ < b.value_; }

private:
    explicit OppressionLevel(int value) : value_(value) {}
    int value_;
};

/// One survey response with its human ground-truth annotation.
struct IdentityRecord {
    std::string id;
    std::string country;
    std::string identity_text; // respondent's verbatim utterance, any language
    OppressionLevel human_score = OppressionLevel::from_value(1);
    std::string rationale;       // optional
    std::string source_language; // optional

    friend bool operator==(const IdentityRecord& a, const IdentityRecord& b) {
        return a.id == b.id && a.country == b.country && a.identity_text == b.identity_text &&
               a.human_score == b.human_score && a.rationale == b.rationale &&
               a.source_language == b.source_language;
    }
};

enum class DatasetFormat { csv, jsonl };

struct DatasetSummary {
    std::size_t total = 0;
    std::map<std::string, std::size_t> per_country;
    std::map<int, std::size_t> level_distribution;
    std::vector<std::string> warnings; // small-sample countries etc.
};

namespace detail {

inline constexpr std::size_t kSmallCountryThreshold = 12;

inline const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> header = {"id",          "country",
                                                    "identity_text", "human_score",
                                                    "rationale",   "source_language"};
    return header;
}

inline int parse_score_field(std::string_view raw, std::size_t row) {
    auto trimmed = trim(raw);
    if (trimmed.empty()) throw MalformedRowError(row, "empty human_score");
    long long value = 0;
    auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
    if (ec != std::errc() || ptr != trimmed.data() + trimmed.size()) {
        throw MalformedRowError(row, "human_score is not an integer: \"" + std::string(trimmed) + "\"");
    }
    if (value < OppressionLevel::kMin || value > OppressionLevel::kMax) {
        throw InvalidScoreError(row, value);
    }
    return static_cast<int>(value);
}

inline IdentityRecord make_record(std::string id, std::string country, std::string identity_text,
                                  int score, std::string rationale, std::string source_language,
                                  std::size_t row) {
    if (trim(id).empty()) throw MalformedRowError(row, "empty id");
    if (trim(identity_text).empty()) throw MalformedRowError(row, "empty identity_text");
    if (trim(country).empty()) throw MalformedRowError(row, "empty country");
    IdentityRecord rec;
    rec.id = std::move(id);
    rec.country = std::move(country);
    rec.identity_text = std::move(identity_text);
    rec.human_score = OppressionLevel::from_value(score);
    rec.rationale = std::move(rationale);
    rec.source_language = std::move(source_language);
    return rec;
}

inline std::vector<IdentityRecord> load_csv_text(std::string_view text) {
    text = strip_bom(text);
    if (trim(text).empty()) return {};
    auto parsed = parse_csv(text);
    if (!parsed.ok) throw MalformedRowError(parsed.error_row, parsed.error);
    if (parsed.rows.empty()) return {};

    const auto& header = parsed.rows.front();
    const auto& canonical = csv_header();
    // The four leading columns are required; rationale/source_language may be
    // absent entirely.
    if (header.size() < 4 || header.size() > canonical.size()) {
        throw MalformedRowError(0, "unexpected CSV header");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) != canonical[i]) {
            throw MalformedRowError(0, "unexpected CSV column \"" + header[i] + "\" (want \"" +
                                           canonical[i] + "\")");
        }
    }

    std::vector<IdentityRecord> records;
    records.reserve(parsed.rows.size() - 1);
    std::unordered_set<std::string> seen;
    for (std::size_t r = 1; r < parsed.rows.size(); ++r) {
        const auto& row = parsed.rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue; // stray blank line
        if (row.size() < 4 || row.size() > canonical.size()) {
            throw MalformedRowError(r, "expected " + std::to_string(header.size()) + " fields, got " +
                                           std::to_string(row.size()));
        }
        auto field = [&](std::size_t i) { return i < row.size() ? row[i] : std::string(); };
        int score = parse_score_field(field(3), r);
        auto rec = make_record(field(0), field(1), field(2), score, field(4), field(5), r);
        if (!seen.insert(rec.id).second) throw DuplicateIdError(rec.id);
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<IdentityRecord> load_jsonl_text(std::string_view text) {
    text = strip_bom(text);
    std::vector<IdentityRecord> records;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        if (trim(line).empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw MalformedRowError(row, "invalid JSON object");
        }
        auto str = [&](const char* key) -> std::string {
            if (!obj.contains(key) || obj[key].is_null()) return {};
            if (!obj[key].is_string()) throw MalformedRowError(row, std::string(key) + " must be a string");
            return obj[key].get<std::string>();
        };
        if (!obj.contains("human_score") || !obj["human_score"].is_number_integer()) {
            throw MalformedRowError(row, "human_score must be an integer");
        }
        long long score = obj["human_score"].get<long long>();
        if (score < OppressionLevel::kMin || score > OppressionLevel::kMax) {
            throw InvalidScoreError(row, score);
        }
        auto rec = make_record(str("id"), str("country"), str("identity_text"),
                               static_cast<int>(score), str("rationale"), str("source_language"), row);
        if (!seen.insert(rec.id).second) throw DuplicateIdError(rec.id);
        records.push_back(std::move(rec));
        ++row;
    }
    return records;
}

} // namespace detail

/// Loads all records in file order. Any malformed row aborts the load.
inline std::vector<IdentityRecord> load_dataset(const std::filesystem::path& path,
                                                DatasetFormat format) {
    if (!std::filesystem::exists(path)) throw DatasetError("dataset not found: " + path.string());
    std::string text = detail::read_file(path);
    return format == DatasetFormat::csv ? detail::load_csv_text(text) : detail::load_jsonl_text(text);
}

inline std::string to_csv(const std::vector<IdentityRecord>& records) {
    std::string out;
    const auto& header = detail::csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out.push_back(',');
        out += header[i];
    }
    out.push_back('\n');
    for (const auto& rec : records) {
        out += detail::csv_escape(rec.id);
        out.push_back(',');
        out += detail::csv_escape(rec.country);
        out.push_back(',');
        out += detail::csv_escape(rec.identity_text);
        out.push_back(',');
        out += std::to_string(rec.human_score.value());
        out.push_back(',');
        out += detail::csv_escape(rec.rationale);
        out.push_back(',');
        out += detail::csv_escape(rec.source_language);
        out.push_back('\n');
    }
    return out;
}

inline std::string to_jsonl(const std::vector<IdentityRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        nlohmann::ordered_json obj;
        obj["id"] = rec.id;
        obj["country"] = rec.country;
        obj["identity_text"] = rec.identity_text;
        obj["human_score"] = rec.human_score.value();
        if (!rec.rationale.empty()) obj["rationale"] = rec.rationale;
        if (!rec.source_language.empty()) obj["source_language"] = rec.source_language;
        out += obj.dump();
        out.push_back('\n');
    }
    return out;
}

inline void save_dataset(const std::vector<IdentityRecord>& records,
                         const std::filesystem::path& path, DatasetFormat format) {
    detail::write_file(path, format == DatasetFormat::csv ? to_csv(records) : to_jsonl(records));
}

/// Counts totals per country and per level; warns (does not fail) about
/// countries too small for a stable per-country correlation.
inline DatasetSummary validate_dataset(const std::vector<IdentityRecord>& records) {
    DatasetSummary summary;
    std::unordered_set<std::string> seen;
    for (const auto& rec : records) {
        if (!seen.insert(rec.id).second) throw DuplicateIdError(rec.id);
        ++summary.total;
        ++summary.per_country[rec.country];
        ++summary.level_distribution[rec.human_score.value()];
    }
    for (const auto& [country, n] : summary.per_country) {
        if (n < detail::kSmallCountryThreshold) {
            summary.warnings.push_back("country \"" + country + "\" has only " + std::to_string(n) +
                                       (n == 1 ? " record" : " records") +
                                       "; per-country correlation will be unstable");
        }
    }
    return summary;
}

inline DatasetFormat format_from_name(std::string_view name) {
    auto lower = std::string(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "csv") return DatasetFormat::csv;
    if (lower == "jsonl") return DatasetFormat::jsonl;
    throw ConfigError("unknown dataset format \"" + std::string(name) + "\" (want csv or jsonl)");
}

/// Picks a format from the file extension; defaults to CSV.
inline DatasetFormat guess_format(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".jsonl" || ext == ".ndjson" ? DatasetFormat::jsonl : DatasetFormat::csv;
}

} // namespace oppbench
