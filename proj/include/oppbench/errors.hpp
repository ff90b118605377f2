#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace oppbench {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad CLI flags, config files, or provider wiring. Exit code 1 territory.
class ConfigError : public Error {
public:
    using Error::Error;
};

// ---- dataset ----

class DatasetError : public Error {
public:
    using Error::Error;
};

/// A row that cannot be interpreted at all (missing columns, bad JSON, ...).
class MalformedRowError : public DatasetError {
public:
    MalformedRowError(std::size_t row, const std::string& reason)
        : DatasetError("row " + std::to_string(row) + ": " + reason), row_(row), reason_(reason) {}
    std::size_t row() const { return row_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t row_;
    std::string reason_;
};

/// Score outside 1..5.
class InvalidScoreError : public DatasetError {
public:
    explicit InvalidScoreError(long long score)
        : DatasetError("score " + std::to_string(score) + " is outside 1..5"), score_(score) {}
    InvalidScoreError(std::size_t row, long long score)
        : DatasetError("row " + std::to_string(row) + ": human_score " + std::to_string(score) +
                       " is outside 1..5"),
          row_(row), score_(score) {}
    std::optional<std::size_t> row() const { return row_; }
    long long score() const { return score_; }

private:
    std::optional<std::size_t> row_;
    long long score_;
};

class DuplicateIdError : public DatasetError {
public:
    explicit DuplicateIdError(const std::string& id)
        : DatasetError("duplicate record id \"" + id + "\""), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

// ---- prompting ----

/// A template slot ({country} or {identity}) was left unfilled.
class UnresolvedPlaceholderError : public Error {
public:
    explicit UnresolvedPlaceholderError(const std::string& placeholder)
        : Error("unresolved placeholder {" + placeholder + "} in template"), placeholder_(placeholder) {}
    const std::string& placeholder() const { return placeholder_; }

private:
    std::string placeholder_;
};

// ---- metrics ----

class MetricError : public Error {
public:
    using Error::Error;
};

class LengthMismatchError : public MetricError {
public:
    LengthMismatchError(std::size_t lhs, std::size_t rhs)
        : MetricError("vector length mismatch: " + std::to_string(lhs) + " vs " + std::to_string(rhs)) {}
};

class EmptyInputError : public MetricError {
public:
    EmptyInputError() : MetricError("empty input vectors") {}
};

/// summarize() called on zero scored rows; carries the excluded count for reporting.
class EmptyCellError : public MetricError {
public:
    EmptyCellError(const std::string& model, const std::string& strategy, std::size_t n_excluded)
        : MetricError("no scored rows for cell (" + model + ", " + strategy + "); " +
                      std::to_string(n_excluded) + " excluded"),
          n_excluded_(n_excluded) {}
    std::size_t n_excluded() const { return n_excluded_; }

private:
    std::size_t n_excluded_;
};

class MixedCellError : public MetricError {
public:
    using MetricError::MetricError;
};

// ---- analysis ----

class UnknownRecordIdError : public Error {
public:
    explicit UnknownRecordIdError(const std::string& id)
        : Error("evaluation row references unknown record id \"" + id + "\"") {}
};

// ---- reporting ----

class DuplicateCellError : public Error {
public:
    DuplicateCellError(const std::string& model, const std::string& strategy)
        : Error("duplicate summary for cell (" + model + ", " + strategy + ")") {}
};

/// Post-run bookkeeping check failed (counts do not add up). Always a bug.
class AccountingError : public Error {
public:
    using Error::Error;
};

// ---- llm gateway ----

class DuplicateProviderError : public ConfigError {
public:
    explicit DuplicateProviderError(const std::string& id)
        : ConfigError("provider id \"" + id + "\" already registered") {}
};

/// Transport or HTTP failure from a provider. Transient failures (timeouts,
/// 408, 429, 5xx) are retryable; anything else fails the request immediately.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what, bool retryable = true)
        : Error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

class RateLimitedError : public ProviderError {
public:
    explicit RateLimitedError(std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
        : ProviderError("rate limited by provider"), retry_after_(retry_after) {}
    std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }

private:
    std::optional<std::chrono::milliseconds> retry_after_;
};

class TimeoutError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

/// Terminal per-request failure after all retries; becomes a failure marker.
class ExhaustedRetriesError : public ProviderError {
public:
    ExhaustedRetriesError(int attempts, const std::string& last_error)
        : ProviderError("exhausted retries after " + std::to_string(attempts) +
                            " attempts; last error: " + last_error,
                        /*retryable=*/false),
          attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

} // namespace oppbench
