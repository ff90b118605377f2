#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oppbench/analysis.hpp"
#include "oppbench/detail/csv.hpp"
#include "oppbench/detail/strings.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/gateway.hpp"
#include "oppbench/metrics.hpp"
#include "oppbench/parsing.hpp"
#include "oppbench/version.hpp"

namespace oppbench {

enum class ReportFormat { markdown, csv, json };

inline ReportFormat parse_report_format(std::string_view name) {
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    throw ConfigError("unknown report format \"" + std::string(name) +
                      "\" (want markdown, csv, or json)");
}

namespace detail {

/// "undef" for correlations that do not exist (zero variance).
inline std::string render_metric(const std::optional<double>& value) {
    return value ? fixed3(*value) : std::string("undef");
}

inline std::string signed_int(int value) {
    if (value > 0) return "+" + std::to_string(value);
    return std::to_string(value);
}

/// Which metrics in a summary are the best within its model group.
struct BestFlags {
    bool mae = false;
    bool accuracy = false;
    bool kappa = false;
    bool pearson = false;
    bool spearman = false;
};

/// Orders cells for display (model, then strategy rank) and rejects duplicate
/// cells. Per model: lowest MAE and highest everything-else win; ties flag
/// every winner; undefined correlations never win.
inline std::pair<std::vector<MetricsSummary>, std::vector<BestFlags>>
order_and_flag(std::vector<MetricsSummary> summaries) {
    std::sort(summaries.begin(), summaries.end(),
              [](const MetricsSummary& a, const MetricsSummary& b) {
                  if (a.model_name != b.model_name) return a.model_name < b.model_name;
                  return strategy_rank(a.strategy) < strategy_rank(b.strategy);
              });
    std::set<std::pair<std::string, Strategy>> seen;
    for (const auto& s : summaries)
        if (!seen.emplace(s.model_name, s.strategy).second)
            throw DuplicateCellError(s.model_name, std::string(strategy_display_name(s.strategy)));

    std::vector<BestFlags> flags(summaries.size());
    std::size_t group_start = 0;
    while (group_start < summaries.size()) {
        std::size_t group_end = group_start;
        while (group_end < summaries.size() &&
               summaries[group_end].model_name == summaries[group_start].model_name)
            ++group_end;

        auto flag_best = [&](auto getter, auto better, auto setter) {
            std::optional<double> best;
            for (std::size_t i = group_start; i < group_end; ++i) {
                if (summaries[i].is_empty_cell()) continue;
                auto v = getter(summaries[i]);
                if (!v) continue;
                if (!best || better(*v, *best)) best = *v;
            }
            if (!best) return;
            for (std::size_t i = group_start; i < group_end; ++i) {
                if (summaries[i].is_empty_cell()) continue;
                auto v = getter(summaries[i]);
                if (v && *v == *best) setter(flags[i]);
            }
        };
        auto lower = [](double a, double b) { return a < b; };
        auto higher = [](double a, double b) { return a > b; };
        flag_best([](const MetricsSummary& s) { return std::optional<double>(s.mae); }, lower,
                  [](BestFlags& f) { f.mae = true; });
        flag_best([](const MetricsSummary& s) { return std::optional<double>(s.accuracy); }, higher,
                  [](BestFlags& f) { f.accuracy = true; });
        flag_best([](const MetricsSummary& s) { return std::optional<double>(s.kappa); }, higher,
                  [](BestFlags& f) { f.kappa = true; });
        flag_best([](const MetricsSummary& s) { return s.pearson; }, higher,
                  [](BestFlags& f) { f.pearson = true; });
        flag_best([](const MetricsSummary& s) { return s.spearman; }, higher,
                  [](BestFlags& f) { f.spearman = true; });
        group_start = group_end;
    }
    return {std::move(summaries), std::move(flags)};
}

inline std::string bold_if(const std::string& text, bool flag) {
    return flag ? "**" + text + "**" : text;
}

} // namespace detail

/// Table-1-shaped metrics grid. Markdown bolds the best value per model per
/// column; CSV carries plain numbers; JSON adds full-precision values and
/// explicit best flags. Cells where every attempt failed render as "n/a".
inline std::string emit_metrics_table(const std::vector<MetricsSummary>& input,
                                      ReportFormat format) {
    auto [summaries, flags] = detail::order_and_flag(input);

    if (format == ReportFormat::markdown) {
        std::string out = "| Model | Strategy | MAE | Acc | κ | r | ρ | n | excluded |\n"
                          "|---|---|---|---|---|---|---|---|---|\n";
        for (std::size_t i = 0; i < summaries.size(); ++i) {
            const auto& s = summaries[i];
            const auto& f = flags[i];
            out += "| " + s.model_name + " | " + std::string(strategy_display_name(s.strategy));
            if (s.is_empty_cell()) {
                out += " | n/a | n/a | n/a | n/a | n/a";
            } else {
                out += " | " + detail::bold_if(detail::fixed3(s.mae), f.mae);
                out += " | " + detail::bold_if(detail::fixed3(s.accuracy), f.accuracy);
                out += " | " + detail::bold_if(detail::fixed3(s.kappa), f.kappa) +
                       (s.kappa_degenerate ? "†" : "");
                out += " | " + detail::bold_if(detail::render_metric(s.pearson), f.pearson);
                out += " | " + detail::bold_if(detail::render_metric(s.spearman), f.spearman);
            }
            out += " | " + std::to_string(s.n) + " | " + std::to_string(s.n_excluded) + " |\n";
        }
        bool any_degenerate = std::any_of(summaries.begin(), summaries.end(),
                                          [](const MetricsSummary& s) { return s.kappa_degenerate; });
        if (any_degenerate)
            out += "\n† expected agreement is 1 (both sides constant); κ reported as 1.\n";
        return out;
    }

    if (format == ReportFormat::csv) {
        std::string out = "model,strategy,mae,accuracy,kappa,pearson,spearman,n,n_excluded\n";
        for (const auto& s : summaries) {
            out += detail::csv_escape(s.model_name) + ',' +
                   std::string(strategy_display_name(s.strategy)) + ',';
            if (s.is_empty_cell()) {
                out += "n/a,n/a,n/a,n/a,n/a";
            } else {
                out += detail::fixed3(s.mae) + ',' + detail::fixed3(s.accuracy) + ',' +
                       detail::fixed3(s.kappa) + ',' + detail::render_metric(s.pearson) + ',' +
                       detail::render_metric(s.spearman);
            }
            out += ',' + std::to_string(s.n) + ',' + std::to_string(s.n_excluded) + '\n';
        }
        return out;
    }

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& s = summaries[i];
        const auto& f = flags[i];
        nlohmann::ordered_json cell;
        cell["model_name"] = s.model_name;
        cell["strategy"] = std::string(strategy_id(s.strategy));
        if (s.is_empty_cell()) {
            cell["mae"] = nullptr;
            cell["accuracy"] = nullptr;
            cell["kappa"] = nullptr;
            cell["kappa_degenerate"] = false;
            cell["pearson"] = nullptr;
            cell["spearman"] = nullptr;
        } else {
            cell["mae"] = s.mae;
            cell["accuracy"] = s.accuracy;
            cell["kappa"] = s.kappa;
            cell["kappa_degenerate"] = s.kappa_degenerate;
            if (s.pearson)
                cell["pearson"] = *s.pearson;
            else
                cell["pearson"] = nullptr;
            if (s.spearman)
                cell["spearman"] = *s.spearman;
            else
                cell["spearman"] = nullptr;
        }
        cell["n"] = s.n;
        cell["n_excluded"] = s.n_excluded;
        cell["best"] = {{"mae", f.mae},
                        {"accuracy", f.accuracy},
                        {"kappa", f.kappa},
                        {"pearson", f.pearson},
                        {"spearman", f.spearman}};
        cells.push_back(std::move(cell));
    }
    nlohmann::ordered_json doc;
    doc["cells"] = std::move(cells);
    return doc.dump(2) + "\n";
}

/// Country alignment, already sorted by the analysis step.
inline std::string emit_alignment_table(const std::vector<CountryAlignment>& alignments,
                                        ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "country,pearson,n\n";
        for (const auto& a : alignments)
            out += detail::csv_escape(a.country) + ',' + detail::render_metric(a.pearson) + ',' +
                   std::to_string(a.n) + '\n';
        return out;
    }
    std::string out = "| Country | r | n |\n|---|---|---|\n";
    for (const auto& a : alignments)
        out += "| " + a.country + " | " + detail::render_metric(a.pearson) + " | " +
               std::to_string(a.n) + " |\n";
    return out;
}

/// Signed-error histograms; CSV yields one row per (group, diff) including
/// explicit zero buckets so plots need no fill-in step.
inline std::string emit_histograms(const std::vector<DiffHistogram>& histograms,
                                   ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "group,diff,count\n";
        for (const auto& h : histograms)
            for (const auto& [diff, count] : h.counts)
                out += detail::csv_escape(h.group_key) + ',' + std::to_string(diff) + ',' +
                       std::to_string(count) + '\n';
        return out;
    }
    std::string out = "| Group |";
    for (int d = kMinDiff; d <= kMaxDiff; ++d) out += " " + detail::signed_int(d) + " |";
    out += "\n|---|";
    for (int d = kMinDiff; d <= kMaxDiff; ++d) out += "---|";
    out += "\n";
    for (const auto& h : histograms) {
        out += "| " + h.group_key + " |";
        for (const auto& [_, count] : h.counts) out += " " + std::to_string(count) + " |";
        out += "\n";
    }
    return out;
}

/// Divergence dossier: one section per case with the model's explanation
/// quoted verbatim for qualitative audit.
inline std::string emit_divergences(const std::vector<DivergenceCase>& cases,
                                    ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "record_id,country,identity_text,human,predicted,abs_diff,model,strategy,"
                          "explanation\n";
        for (const auto& c : cases)
            out += detail::csv_escape(c.record_id) + ',' + detail::csv_escape(c.country) + ',' +
                   detail::csv_escape(c.identity_text) + ',' + std::to_string(c.human) + ',' +
                   std::to_string(c.predicted) + ',' + std::to_string(c.abs_diff) + ',' +
                   detail::csv_escape(c.model_name) + ',' +
                   std::string(strategy_display_name(c.strategy)) + ',' +
                   detail::csv_escape(c.explanation) + '\n';
        return out;
    }

    std::string out = "# Highest-divergence cases\n";
    if (cases.empty()) {
        out += "\nNo cases at threshold.\n";
        return out;
    }
    std::size_t index = 1;
    for (const auto& c : cases) {
        out += "\n## " + std::to_string(index++) + ". " + c.record_id + " — " + c.country + " (" +
               detail::signed_int(c.predicted - c.human) + ")\n\n";
        out += "- identity: " + c.identity_text + "\n";
        out += "- human: " + std::to_string(c.human) + " (" +
               std::string(OppressionLevel::from_value(c.human).label()) + ")\n";
        out += "- predicted: " + std::to_string(c.predicted) + " (" +
               std::string(OppressionLevel::from_value(c.predicted).label()) + ")\n";
        out += "- model: " + c.model_name + ", strategy: " +
               std::string(strategy_display_name(c.strategy)) + "\n";
        if (!c.explanation.empty()) {
            out += "\n> ";
            for (char ch : c.explanation) {
                out += ch;
                if (ch == '\n') out += "> ";
            }
            out += "\n";
        }
    }
    return out;
}

// ---- per-record results (rows.jsonl) ----

/// One attempted completion, resolved: scored, parse_failed, or
/// provider_failed. This is the self-contained per-record record — `score`
/// can rebuild every report from these lines alone.
struct RowOutcome {
    std::string record_id;
    std::string country;
    std::string identity_text;
    std::string model_name;
    Strategy strategy = Strategy::vanilla;
    std::string status; // scored | parse_failed | provider_failed
    ParseStatus parse_status = ParseStatus::failed;
    int human = 0;
    std::optional<int> predicted;
    std::optional<int> diff;
    std::string explanation;    // scored rows
    std::string failure_reason; // non-scored rows

    bool scored() const { return status == "scored"; }
};

inline std::string to_jsonl_line(const RowOutcome& row) {
    nlohmann::ordered_json obj;
    obj["record_id"] = row.record_id;
    obj["country"] = row.country;
    obj["identity_text"] = row.identity_text;
    obj["model_name"] = row.model_name;
    obj["strategy"] = std::string(strategy_id(row.strategy));
    obj["status"] = row.status;
    obj["parse_status"] = std::string(parse_status_name(row.parse_status));
    obj["human"] = row.human;
    if (row.predicted) obj["predicted"] = *row.predicted;
    if (row.diff) obj["diff"] = *row.diff;
    if (row.scored())
        obj["explanation"] = row.explanation;
    else
        obj["failure_reason"] = row.failure_reason;
    return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::string emit_rows_jsonl(const std::vector<RowOutcome>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += to_jsonl_line(row);
        out += '\n';
    }
    return out;
}

inline RowOutcome parse_row_outcome(const std::string& line, std::size_t line_no) {
    auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
        throw DatasetError("rows file line " + std::to_string(line_no) + ": not a JSON object");
    auto need_string = [&](const char* key) {
        if (!obj.contains(key) || !obj[key].is_string())
            throw DatasetError("rows file line " + std::to_string(line_no) + ": missing field \"" +
                        key + "\"");
        return obj[key].template get<std::string>();
    };
    RowOutcome row;
    row.record_id = need_string("record_id");
    row.country = need_string("country");
    row.identity_text = need_string("identity_text");
    row.model_name = need_string("model_name");
    row.strategy = parse_strategy(need_string("strategy"));
    row.status = need_string("status");
    if (row.status != "scored" && row.status != "parse_failed" && row.status != "provider_failed")
        throw DatasetError("rows file line " + std::to_string(line_no) + ": unknown status \"" +
                    row.status + "\"");
    row.parse_status = parse_status_from_name(need_string("parse_status"));
    if (!obj.contains("human") || !obj["human"].is_number_integer())
        throw DatasetError("rows file line " + std::to_string(line_no) + ": missing integer \"human\"");
    row.human = obj["human"].get<int>();
    OppressionLevel::from_value(row.human);
    if (obj.contains("predicted")) {
        row.predicted = obj["predicted"].get<int>();
        OppressionLevel::from_value(*row.predicted);
    }
    if (obj.contains("diff")) row.diff = obj["diff"].get<int>();
    if (row.scored()) {
        if (!row.predicted || !row.diff)
            throw DatasetError("rows file line " + std::to_string(line_no) +
                        ": scored row lacks predicted/diff");
        row.explanation = obj.value("explanation", std::string{});
    } else {
        row.failure_reason = obj.value("failure_reason", std::string{});
    }
    return row;
}

inline std::vector<RowOutcome> parse_rows_jsonl(const std::string& text) {
    std::vector<RowOutcome> rows;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::size_t end = nl == std::string::npos ? text.size() : nl;
        ++line_no;
        std::string_view line(text.data() + pos, end - pos);
        if (!detail::trim(line).empty()) rows.push_back(parse_row_outcome(std::string(line), line_no));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return rows;
}

// ---- run manifest ----

/// Reproducibility record: everything needed to re-create the prompts plus
/// run statistics. Timestamps live here and nowhere else, so every other
/// report stays byte-diffable.
struct RunManifest {
    std::string tool_version = kVersion;
    std::string dataset_path;
    std::string dataset_sha256;
    std::string dataset_format;
    std::size_t n_records = 0;
    std::vector<ModelSpec> models;
    std::vector<Strategy> strategies;
    std::string cot_position;
    std::map<std::string, std::string> template_digests;
    std::size_t max_in_flight = 0;
    int max_retries = 0;
    int divergence_min_diff = 0;
    std::size_t divergence_limit = 0;
    std::optional<std::string> alignment_model;
    std::optional<std::string> alignment_strategy;
    std::string cache_path; // empty = in-memory
    std::size_t attempted = 0;
    std::size_t scored = 0;
    std::size_t parse_failed = 0;
    std::size_t provider_failed = 0;
    std::size_t cache_hits = 0;
    std::size_t cache_coalesced = 0;
    std::size_t cache_fetches = 0;
    std::string started_at;
    std::string finished_at;
};

inline std::string emit_manifest(const RunManifest& m) {
    nlohmann::ordered_json doc;
    doc["tool"] = "oppbench";
    doc["tool_version"] = m.tool_version;
    doc["started_at"] = m.started_at;
    doc["finished_at"] = m.finished_at;
    doc["dataset"] = {{"path", m.dataset_path},
                      {"format", m.dataset_format},
                      {"sha256", m.dataset_sha256},
                      {"records", m.n_records}};
    nlohmann::ordered_json strategies = nlohmann::ordered_json::array();
    for (Strategy s : m.strategies) strategies.push_back(std::string(strategy_id(s)));
    doc["strategies"] = std::move(strategies);
    doc["cot_position"] = m.cot_position;
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& spec : m.models)
        models.push_back({{"provider_id", spec.provider_id},
                          {"model_name", spec.model_name},
                          {"temperature", spec.temperature},
                          {"max_output_tokens", spec.max_output_tokens}});
    doc["models"] = std::move(models);
    doc["templates"] = m.template_digests;
    doc["settings"] = {{"max_in_flight", m.max_in_flight},
                       {"max_retries", m.max_retries},
                       {"divergence_min_diff", m.divergence_min_diff},
                       {"divergence_limit", m.divergence_limit},
                       {"alignment_model",
                        m.alignment_model ? nlohmann::ordered_json(*m.alignment_model)
                                          : nlohmann::ordered_json(nullptr)},
                       {"alignment_strategy",
                        m.alignment_strategy ? nlohmann::ordered_json(*m.alignment_strategy)
                                             : nlohmann::ordered_json(nullptr)}};
    doc["counts"] = {{"attempted", m.attempted},
                     {"scored", m.scored},
                     {"parse_failed", m.parse_failed},
                     {"provider_failed", m.provider_failed}};
    doc["cache"] = {{"path", m.cache_path},
                    {"hits", m.cache_hits},
                    {"coalesced", m.cache_coalesced},
                    {"fetches", m.cache_fetches}};
    return doc.dump(2) + "\n";
}

} // namespace oppbench
