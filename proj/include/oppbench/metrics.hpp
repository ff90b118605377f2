#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oppbench/dataset.hpp"
#include "oppbench/detail/compensated.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/strategy.hpp"

namespace oppbench {

/// One scored (record, model, strategy) outcome.
struct EvaluationRow {
    std::string record_id;
    std::string model_name;
    Strategy strategy = Strategy::vanilla;
    OppressionLevel predicted = OppressionLevel::from_value(1);
    OppressionLevel human = OppressionLevel::from_value(1);
    int diff = 0; // predicted - human; positive means overestimated severity
    std::string explanation;

    static EvaluationRow make(std::string record_id, std::string model_name, Strategy strategy,
                              OppressionLevel predicted, OppressionLevel human,
                              std::string explanation) {
        EvaluationRow row;
        row.record_id = std::move(record_id);
        row.model_name = std::move(model_name);
        row.strategy = strategy;
        row.predicted = predicted;
        row.human = human;
        row.diff = predicted.value() - human.value();
        row.explanation = std::move(explanation);
        return row;
    }
};

/// The five metrics for one (model, strategy) cell.
struct MetricsSummary {
    std::string model_name;
    Strategy strategy = Strategy::vanilla;
    double mae = 0.0;
    double accuracy = 0.0;
    double kappa = 0.0;
    bool kappa_degenerate = false;           // expected agreement was 1
    std::optional<double> pearson;           // empty = undefined (zero variance or n < 2)
    std::optional<double> spearman;          // likewise
    std::size_t n = 0;                       // scored rows
    std::size_t n_excluded = 0;              // parse/provider failures for the cell

    bool is_empty_cell() const { return n == 0; }

    /// Placeholder summary for a cell where every attempt failed.
    static MetricsSummary empty_cell(std::string model_name, Strategy strategy,
                                     std::size_t attempted) {
        MetricsSummary s;
        s.model_name = std::move(model_name);
        s.strategy = strategy;
        s.n = 0;
        s.n_excluded = attempted;
        return s;
    }
};

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b, bool allow_empty = false) {
    if (a != b) throw LengthMismatchError(a, b);
    if (!allow_empty && a == 0) throw EmptyInputError();
}

inline double compensated_mean(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

/// Average ranks, ties get the mean of the positions they occupy.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

/// Mean absolute error between two equally long score vectors.
inline double mae(std::span<const double> pred, std::span<const double> truth) {
    detail::check_lengths(pred.size(), truth.size());
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < pred.size(); ++i) s.add(std::abs(pred[i] - truth[i]));
    return s.value() / static_cast<double>(pred.size());
}

/// Fraction of exact matches.
inline double accuracy(std::span<const double> pred, std::span<const double> truth) {
    detail::check_lengths(pred.size(), truth.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Unweighted Cohen's kappa over the categories 1..5.
/// Expected agreement comes from the marginal category frequencies. Perfect
/// observed agreement returns exactly 1; if expected agreement is also 1 the
/// statistic is degenerate and *degenerate is set.
inline double cohen_kappa(std::span<const double> pred, std::span<const double> truth,
                          bool* degenerate = nullptr) {
    detail::check_lengths(pred.size(), truth.size());
    if (degenerate) *degenerate = false;

    constexpr int kCats = 5;
    std::array<std::size_t, kCats> margin_pred{};
    std::array<std::size_t, kCats> margin_truth{};
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        int p = static_cast<int>(pred[i]);
        int t = static_cast<int>(truth[i]);
        if (p < 1 || p > kCats || static_cast<double>(p) != pred[i]) {
            throw MetricError("kappa requires integer categories 1..5");
        }
        if (t < 1 || t > kCats || static_cast<double>(t) != truth[i]) {
            throw MetricError("kappa requires integer categories 1..5");
        }
        ++margin_pred[static_cast<std::size_t>(p - 1)];
        ++margin_truth[static_cast<std::size_t>(t - 1)];
        if (p == t) ++agree;
    }
    const double n = static_cast<double>(pred.size());
    const double p_o = static_cast<double>(agree) / n;

    // Integer cross products keep p_e exact and order independent.
    std::size_t cross = 0;
    for (int k = 0; k < kCats; ++k) {
        cross += margin_pred[static_cast<std::size_t>(k)] * margin_truth[static_cast<std::size_t>(k)];
    }
    const double p_e = static_cast<double>(cross) / (n * n);

    if (p_e >= 1.0) {
        if (degenerate) *degenerate = true;
        return 1.0; // both raters constant on the same category, so p_o = 1 too
    }
    if (agree == pred.size()) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

/// Sample Pearson correlation; empty when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> pred, std::span<const double> truth) {
    detail::check_lengths(pred.size(), truth.size());
    if (pred.size() < 2) return std::nullopt;

    const double mx = detail::compensated_mean(pred);
    const double my = detail::compensated_mean(truth);
    detail::CompensatedSum sxy, sxx, syy;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred[i] - mx;
        const double dy = truth[i] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    const double vx = sxx.value();
    const double vy = syy.value();
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    return sxy.value() / std::sqrt(vx * vy);
}

/// Spearman rank correlation with average ranks for ties; empty when either
/// rank vector has zero variance.
inline std::optional<double> spearman(std::span<const double> pred, std::span<const double> truth) {
    detail::check_lengths(pred.size(), truth.size());
    if (pred.size() < 2) return std::nullopt;
    auto rx = detail::average_ranks(pred);
    auto ry = detail::average_ranks(truth);
    return pearson(rx, ry);
}

namespace detail {

inline std::vector<double> predicted_vector(const std::vector<EvaluationRow>& rows) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(static_cast<double>(r.predicted.value()));
    return v;
}

inline std::vector<double> human_vector(const std::vector<EvaluationRow>& rows) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(static_cast<double>(r.human.value()));
    return v;
}

} // namespace detail

/// All five metrics for one cell. `attempted` is the number of completions
/// attempted for the cell; the difference from |rows| is reported as excluded.
inline MetricsSummary summarize(const std::vector<EvaluationRow>& rows, std::size_t attempted) {
    if (rows.empty()) {
        throw EmptyCellError("?", "?", attempted);
    }
    const std::string& model = rows.front().model_name;
    const Strategy strategy = rows.front().strategy;
    for (const auto& r : rows) {
        if (r.model_name != model || r.strategy != strategy) {
            throw MixedCellError("summarize() rows span more than one (model, strategy) cell");
        }
    }
    if (attempted < rows.size()) {
        throw AccountingError("attempted count below scored row count for cell");
    }

    auto pred = detail::predicted_vector(rows);
    auto truth = detail::human_vector(rows);

    MetricsSummary s;
    s.model_name = model;
    s.strategy = strategy;
    s.mae = mae(pred, truth);
    s.accuracy = accuracy(pred, truth);
    s.kappa = cohen_kappa(pred, truth, &s.kappa_degenerate);
    s.pearson = pearson(pred, truth);
    s.spearman = spearman(pred, truth);
    s.n = rows.size();
    s.n_excluded = attempted - rows.size();
    return s;
}

} // namespace oppbench
