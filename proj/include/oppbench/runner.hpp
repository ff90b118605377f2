#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oppbench/analysis.hpp"
#include "oppbench/cache.hpp"
#include "oppbench/dataset.hpp"
#include "oppbench/detail/digest.hpp"
#include "oppbench/detail/io.hpp"
#include "oppbench/detail/strings.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/gateway.hpp"
#include "oppbench/metrics.hpp"
#include "oppbench/parsing.hpp"
#include "oppbench/prompting.hpp"
#include "oppbench/provider.hpp"
#include "oppbench/reporting.hpp"

namespace oppbench {

/// Explanations are stored verbatim up to this many bytes (clipped at a
/// UTF-8 boundary); parsing itself never truncates.
inline constexpr std::size_t kExplanationStorageLimit = 4000;

/// Everything a `run` needs. The CLI fills this from flags/config; tests fill
/// it directly.
struct RunConfig {
    std::filesystem::path dataset_path;
    std::optional<DatasetFormat> format; // default: by file extension
    std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    std::vector<ModelSpec> models;
    std::size_t max_in_flight = 8;
    int max_retries = 3;
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::filesystem::path cache_dir; // empty = in-memory cache only
    std::filesystem::path out_dir;
    std::filesystem::path templates_dir;
    CotPosition cot_position = CotPosition::post_schema;
    int divergence_min_diff = 3;
    std::size_t divergence_limit = 50;
    std::optional<std::string> alignment_model;    // restrict Fig-2-style table
    std::optional<Strategy> alignment_strategy;    // to one cell when set
};

struct RunResult {
    RunManifest manifest;
    std::vector<RowOutcome> rows;
    std::vector<MetricsSummary> summaries;
    std::vector<std::string> warnings; // dataset + cache warnings, CLI prints them

    bool all_failed() const { return manifest.attempted > 0 && manifest.scored == 0; }
};

namespace detail {

inline std::vector<Strategy> normalize_strategies(std::vector<Strategy> strategies) {
    std::sort(strategies.begin(), strategies.end(),
              [](Strategy a, Strategy b) { return strategy_rank(a) < strategy_rank(b); });
    strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());
    if (strategies.empty()) throw ConfigError("no strategies selected");
    return strategies;
}

inline std::vector<ModelSpec> normalize_models(std::vector<ModelSpec> models,
                                               double temperature, int max_output_tokens) {
    if (models.empty()) throw ConfigError("no models selected");
    for (auto& model : models) {
        model.temperature = temperature;
        model.max_output_tokens = max_output_tokens;
        model.validate();
    }
    std::sort(models.begin(), models.end(), [](const ModelSpec& a, const ModelSpec& b) {
        return std::tie(a.model_name, a.provider_id) < std::tie(b.model_name, b.provider_id);
    });
    models.erase(std::unique(models.begin(), models.end(),
                             [](const ModelSpec& a, const ModelSpec& b) {
                                 return a.provider_id == b.provider_id &&
                                        a.model_name == b.model_name;
                             }),
                 models.end());
    // Metrics cells key on model_name alone, so a name shared across
    // providers would silently merge two models into one cell.
    for (std::size_t i = 1; i < models.size(); ++i)
        if (models[i].model_name == models[i - 1].model_name)
            throw ConfigError("model name \"" + models[i].model_name +
                              "\" selected under two providers; names must be unique");
    return models;
}

/// Turns one completion into its row outcome (scored / parse_failed /
/// provider_failed), applying the storage cap to explanations.
inline RowOutcome resolve_row(const CompletionResponse& response, const IdentityRecord& record) {
    RowOutcome row;
    row.record_id = record.id;
    row.country = record.country;
    row.identity_text = record.identity_text;
    row.model_name = response.model_name;
    row.strategy = response.strategy;
    row.human = record.human_score.value();

    if (response.failed) {
        row.status = "provider_failed";
        row.parse_status = ParseStatus::failed;
        row.failure_reason = response.error;
        return row;
    }

    ParsedJudgment judgment = parse_judgment(response.raw_text);
    row.parse_status = judgment.parse_status;
    if (judgment.parse_status == ParseStatus::failed) {
        row.status = "parse_failed";
        row.failure_reason = judgment.failure_reason;
        return row;
    }
    row.status = "scored";
    row.predicted = judgment.rating->value();
    row.diff = *row.predicted - row.human;
    row.explanation = truncate_utf8(judgment.explanation, kExplanationStorageLimit);
    return row;
}

inline std::vector<EvaluationRow> evaluation_rows(const std::vector<RowOutcome>& rows) {
    std::vector<EvaluationRow> out;
    for (const auto& row : rows) {
        if (!row.scored()) continue;
        out.push_back(EvaluationRow::make(row.record_id, row.model_name, row.strategy,
                                          OppressionLevel::from_value(*row.predicted),
                                          OppressionLevel::from_value(row.human),
                                          row.explanation));
    }
    return out;
}

/// One summary per (model, strategy) cell present in the outcomes, in
/// (model_name, strategy rank) order. Cells with zero scored rows become
/// explicit empty-cell summaries rather than crashes or omissions.
inline std::vector<MetricsSummary> summarize_cells(const std::vector<RowOutcome>& rows) {
    struct CellKey {
        std::string model_name;
        Strategy strategy;
        bool operator<(const CellKey& other) const {
            if (model_name != other.model_name) return model_name < other.model_name;
            return strategy_rank(strategy) < strategy_rank(other.strategy);
        }
    };
    std::map<CellKey, std::pair<std::vector<EvaluationRow>, std::size_t>> cells;
    for (const auto& row : rows) {
        auto& cell = cells[{row.model_name, row.strategy}];
        ++cell.second;
        if (row.scored())
            cell.first.push_back(EvaluationRow::make(
                row.record_id, row.model_name, row.strategy,
                OppressionLevel::from_value(*row.predicted), OppressionLevel::from_value(row.human),
                row.explanation));
    }

    std::vector<MetricsSummary> out;
    out.reserve(cells.size());
    for (const auto& [key, cell] : cells) {
        if (cell.first.empty())
            out.push_back(MetricsSummary::empty_cell(key.model_name, key.strategy, cell.second));
        else
            out.push_back(summarize(cell.first, cell.second));
    }
    return out;
}

inline std::vector<EvaluationRow> alignment_rows(const std::vector<EvaluationRow>& rows,
                                                 const std::optional<std::string>& model,
                                                 const std::optional<Strategy>& strategy) {
    std::vector<EvaluationRow> out;
    for (const auto& row : rows) {
        if (model && row.model_name != *model) continue;
        if (strategy && row.strategy != *strategy) continue;
        out.push_back(row);
    }
    return out;
}

/// Writes every report that is a pure function of the row outcomes. Shared
/// verbatim by `run` and `score`, which is what makes the two byte-identical.
inline void write_row_reports(const std::filesystem::path& out_dir,
                              const std::vector<RowOutcome>& rows,
                              const std::vector<IdentityRecord>& records,
                              const std::vector<MetricsSummary>& summaries,
                              int divergence_min_diff, std::size_t divergence_limit,
                              const std::optional<std::string>& alignment_model,
                              const std::optional<Strategy>& alignment_strategy) {
    auto eval_rows = evaluation_rows(rows);

    write_file(out_dir / "metrics.md", emit_metrics_table(summaries, ReportFormat::markdown));
    write_file(out_dir / "metrics.csv", emit_metrics_table(summaries, ReportFormat::csv));
    write_file(out_dir / "metrics.json", emit_metrics_table(summaries, ReportFormat::json));

    auto aligned = alignment_rows(eval_rows, alignment_model, alignment_strategy);
    write_file(out_dir / "country_alignment.csv",
               emit_alignment_table(country_alignment(aligned, records), ReportFormat::csv));

    write_file(out_dir / "diff_histogram_by_model.csv",
               emit_histograms(diff_histogram(eval_rows, HistogramGroupBy::model),
                               ReportFormat::csv));
    write_file(out_dir / "diff_histogram_by_strategy.csv",
               emit_histograms(diff_histogram(eval_rows, HistogramGroupBy::strategy),
                               ReportFormat::csv));

    write_file(out_dir / "divergences.md",
               emit_divergences(
                   top_divergences(eval_rows, records, divergence_min_diff, divergence_limit),
                   ReportFormat::markdown));
}

} // namespace detail

/// Loads, dispatches, parses, scores, and writes the full report directory.
/// The registry decides which providers exist; tests pass a mock-only one.
inline RunResult run_pipeline(const RunConfig& config, ProviderRegistry registry,
                              Gateway::SleepFn sleep_fn = nullptr) {
    RunResult result;
    result.manifest.started_at = detail::now_iso8601_utc();

    DatasetFormat format = config.format.value_or(guess_format(config.dataset_path));
    auto records = load_dataset(config.dataset_path, format);
    if (records.empty()) throw DatasetError("dataset has no records: " + config.dataset_path.string());
    DatasetSummary summary = validate_dataset(records);
    result.warnings = summary.warnings;

    TemplateSet templates = TemplateSet::load(config.templates_dir);
    auto strategies = detail::normalize_strategies(config.strategies);
    auto models =
        detail::normalize_models(config.models, config.temperature, config.max_output_tokens);

    ResponseCache cache = config.cache_dir.empty()
                              ? ResponseCache()
                              : ResponseCache(config.cache_dir / "responses.jsonl");
    for (const auto& warning : cache.warnings()) result.warnings.push_back(warning);

    RetryPolicy policy;
    policy.max_retries = config.max_retries;
    Gateway gateway(std::move(registry), cache, policy, std::move(sleep_fn));

    auto responses = gateway.run_batch(records, strategies, models, config.max_in_flight,
                                       templates, config.cot_position);
    std::size_t expected = records.size() * strategies.size() * models.size();
    if (responses.size() != expected)
        throw AccountingError("batch produced " + std::to_string(responses.size()) +
                              " responses, expected " + std::to_string(expected));

    auto index = detail::index_records(records);
    result.rows.reserve(responses.size());
    for (const auto& response : responses)
        result.rows.push_back(
            detail::resolve_row(response, detail::resolve_record(index, response.record_id)));

    auto& manifest = result.manifest;
    manifest.dataset_path = config.dataset_path.string();
    manifest.dataset_sha256 = detail::sha256_file_hex(config.dataset_path.string());
    manifest.dataset_format = format == DatasetFormat::csv ? "csv" : "jsonl";
    manifest.n_records = records.size();
    manifest.models = models;
    manifest.strategies = strategies;
    manifest.cot_position = std::string(cot_position_name(config.cot_position));
    manifest.template_digests = templates.asset_digests;
    manifest.max_in_flight = config.max_in_flight;
    manifest.max_retries = config.max_retries;
    manifest.divergence_min_diff = config.divergence_min_diff;
    manifest.divergence_limit = config.divergence_limit;
    manifest.alignment_model = config.alignment_model;
    if (config.alignment_strategy)
        manifest.alignment_strategy = std::string(strategy_id(*config.alignment_strategy));
    manifest.cache_path =
        config.cache_dir.empty() ? "" : (config.cache_dir / "responses.jsonl").string();
    manifest.attempted = result.rows.size();
    for (const auto& row : result.rows) {
        if (row.status == "scored") ++manifest.scored;
        else if (row.status == "parse_failed") ++manifest.parse_failed;
        else ++manifest.provider_failed;
    }
    if (manifest.scored + manifest.parse_failed + manifest.provider_failed != manifest.attempted)
        throw AccountingError("row status counts do not sum to attempted");
    manifest.cache_hits = cache.hits();
    manifest.cache_coalesced = cache.coalesced();
    manifest.cache_fetches = cache.fetches();

    result.summaries = detail::summarize_cells(result.rows);

    detail::write_file(config.out_dir / "rows.jsonl", emit_rows_jsonl(result.rows));
    detail::write_row_reports(config.out_dir, result.rows, records, result.summaries,
                              config.divergence_min_diff, config.divergence_limit,
                              config.alignment_model, config.alignment_strategy);

    manifest.finished_at = detail::now_iso8601_utc();
    detail::write_file(config.out_dir / "manifest.json", emit_manifest(manifest));
    return result;
}

struct ScoreConfig {
    std::filesystem::path rows_path; // a rows.jsonl from a previous run
    std::filesystem::path out_dir;
    int divergence_min_diff = 3;
    std::size_t divergence_limit = 50;
    std::optional<std::string> alignment_model;
    std::optional<Strategy> alignment_strategy;
};

/// Rebuilds every metric/analysis report from a rows.jsonl alone — no dataset
/// file, no providers, no manifest. Output bytes match the originating run.
inline std::vector<MetricsSummary> score_pipeline(const ScoreConfig& config) {
    if (!std::filesystem::exists(config.rows_path))
        throw DatasetError("rows file not found: " + config.rows_path.string());
    auto rows = parse_rows_jsonl(detail::read_file(config.rows_path));
    if (rows.empty()) throw DatasetError("rows file has no rows: " + config.rows_path.string());

    // Reconstruct the record set (and sanity-check that repeated ids agree).
    std::map<std::string, IdentityRecord> by_id;
    for (const auto& row : rows) {
        auto it = by_id.find(row.record_id);
        if (it == by_id.end()) {
            by_id.emplace(row.record_id,
                          detail::make_record(row.record_id, row.country, row.identity_text,
                                              row.human, "", "", 0));
        } else if (it->second.country != row.country ||
                   it->second.identity_text != row.identity_text ||
                   it->second.human_score.value() != row.human) {
            throw DatasetError("rows file disagrees with itself about record \"" + row.record_id +
                               "\"");
        }
    }
    std::vector<IdentityRecord> records;
    records.reserve(by_id.size());
    for (auto& [_, record] : by_id) records.push_back(std::move(record));

    auto summaries = detail::summarize_cells(rows);
    detail::write_row_reports(config.out_dir, rows, records, summaries,
                              config.divergence_min_diff, config.divergence_limit,
                              config.alignment_model, config.alignment_strategy);
    return summaries;
}

} // namespace oppbench
