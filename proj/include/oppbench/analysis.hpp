#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oppbench/dataset.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/metrics.hpp"
#include "oppbench/strategy.hpp"

namespace oppbench {

/// Pearson alignment between predictions and human labels for one country.
/// pearson is empty when undefined (zero variance or fewer than two rows).
struct CountryAlignment {
    std::string country;
    std::optional<double> pearson;
    std::size_t n = 0;
};

inline constexpr int kMinDiff = 1 - OppressionLevel::kMax; // -4
inline constexpr int kMaxDiff = OppressionLevel::kMax - 1; // +4

/// Signed-error histogram for one group (a model or a strategy). Every bucket
/// in -4..4 is present, zeros included, so emitters never invent rows.
struct DiffHistogram {
    std::string group_key;
    std::map<int, std::size_t> counts;

    static DiffHistogram empty(std::string group_key) {
        DiffHistogram h;
        h.group_key = std::move(group_key);
        for (int d = kMinDiff; d <= kMaxDiff; ++d) h.counts[d] = 0;
        return h;
    }

    std::size_t total() const {
        std::size_t sum = 0;
        for (const auto& [_, c] : counts) sum += c;
        return sum;
    }
};

enum class HistogramGroupBy { model, strategy };

/// One high-divergence judgment, carrying the model's explanation so the
/// qualitative audit can read why the model strayed.
struct DivergenceCase {
    std::string record_id;
    std::string country;
    std::string identity_text;
    int human = 0;
    int predicted = 0;
    int abs_diff = 0;
    std::string model_name;
    Strategy strategy = Strategy::vanilla;
    std::string explanation;
};

namespace detail {

inline std::unordered_map<std::string, const IdentityRecord*>
index_records(const std::vector<IdentityRecord>& records) {
    std::unordered_map<std::string, const IdentityRecord*> index;
    index.reserve(records.size());
    for (const auto& record : records) index.emplace(record.id, &record);
    return index;
}

inline const IdentityRecord& resolve_record(
    const std::unordered_map<std::string, const IdentityRecord*>& index,
    const std::string& record_id) {
    auto it = index.find(record_id);
    if (it == index.end()) throw UnknownRecordIdError(record_id);
    return *it->second;
}

} // namespace detail

/// Per-country Pearson alignment, pooled over whatever rows are passed in
/// (restrict to one model/strategy upstream if desired). Sorted by pearson
/// descending, undefined entries last, ties and undefineds by country name.
inline std::vector<CountryAlignment> country_alignment(const std::vector<EvaluationRow>& rows,
                                                       const std::vector<IdentityRecord>& records) {
    auto index = detail::index_records(records);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_country;
    for (const auto& row : rows) {
        const auto& record = detail::resolve_record(index, row.record_id);
        auto& [predicted, human] = by_country[record.country];
        predicted.push_back(static_cast<double>(row.predicted.value()));
        human.push_back(static_cast<double>(row.human.value()));
    }

    std::vector<CountryAlignment> out;
    out.reserve(by_country.size());
    for (const auto& [country, pairs] : by_country)
        out.push_back({country, pearson(pairs.first, pairs.second), pairs.first.size()});

    std::sort(out.begin(), out.end(), [](const CountryAlignment& a, const CountryAlignment& b) {
        if (a.pearson.has_value() != b.pearson.has_value()) return a.pearson.has_value();
        if (a.pearson && b.pearson && *a.pearson != *b.pearson) return *a.pearson > *b.pearson;
        return a.country < b.country;
    });
    return out;
}

/// Histograms of (predicted - human), one per group, groups sorted by key.
/// Grouping by model uses model_name; by strategy uses the display name.
inline std::vector<DiffHistogram> diff_histogram(const std::vector<EvaluationRow>& rows,
                                                 HistogramGroupBy group_by) {
    std::map<std::string, DiffHistogram> groups;
    auto group_of = [&](const EvaluationRow& row) {
        return group_by == HistogramGroupBy::model ? row.model_name
                                                   : std::string(strategy_display_name(row.strategy));
    };
    for (const auto& row : rows) {
        std::string key = group_of(row);
        auto it = groups.find(key);
        if (it == groups.end()) it = groups.emplace(key, DiffHistogram::empty(key)).first;
        it->second.counts.at(row.diff) += 1;
    }

    std::vector<DiffHistogram> out;
    out.reserve(groups.size());
    for (auto& [_, histogram] : groups) out.push_back(std::move(histogram));
    return out;
}

/// (rows overestimating severity, rows underestimating it).
inline std::pair<std::size_t, std::size_t> overestimation_balance(const DiffHistogram& histogram) {
    std::size_t over = 0;
    std::size_t under = 0;
    for (const auto& [diff, count] : histogram.counts) {
        if (diff > 0) over += count;
        if (diff < 0) under += count;
    }
    return {over, under};
}

/// All rows with |predicted - human| >= min_abs_diff, sorted by abs_diff
/// descending then (country, record_id, model_name, strategy) so the dossier
/// is stable across runs, truncated to limit.
inline std::vector<DivergenceCase> top_divergences(const std::vector<EvaluationRow>& rows,
                                                   const std::vector<IdentityRecord>& records,
                                                   int min_abs_diff = 3,
                                                   std::size_t limit = 50) {
    if (min_abs_diff < 1) throw ConfigError("divergence threshold must be >= 1");
    auto index = detail::index_records(records);

    std::vector<DivergenceCase> cases;
    for (const auto& row : rows) {
        int abs_diff = std::abs(row.diff);
        if (abs_diff < min_abs_diff) continue;
        const auto& record = detail::resolve_record(index, row.record_id);
        cases.push_back({row.record_id, record.country, record.identity_text, row.human.value(),
                         row.predicted.value(), abs_diff, row.model_name, row.strategy,
                         row.explanation});
    }

    std::sort(cases.begin(), cases.end(), [](const DivergenceCase& a, const DivergenceCase& b) {
        if (a.abs_diff != b.abs_diff) return a.abs_diff > b.abs_diff;
        if (a.country != b.country) return a.country < b.country;
        if (a.record_id != b.record_id) return a.record_id < b.record_id;
        if (a.model_name != b.model_name) return a.model_name < b.model_name;
        return strategy_rank(a.strategy) < strategy_rank(b.strategy);
    });
    if (cases.size() > limit) cases.resize(limit);
    return cases;
}

} // namespace oppbench
