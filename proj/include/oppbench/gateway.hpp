#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "oppbench/cache.hpp"
#include "oppbench/dataset.hpp"
#include "oppbench/detail/digest.hpp"
#include "oppbench/detail/strings.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/prompting.hpp"
#include "oppbench/provider.hpp"
#include "oppbench/strategy.hpp"

namespace oppbench {

/// One model under evaluation and its pinned generation settings. Only
/// temperature and max_output_tokens are pinned (and cache-keyed); everything
/// else stays at provider defaults.
struct ModelSpec {
    std::string provider_id;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::chrono::milliseconds request_timeout{60000};

    void validate() const {
        if (provider_id.empty()) throw ConfigError("model spec has empty provider id");
        if (model_name.empty()) throw ConfigError("model spec has empty model name");
        if (!(temperature >= 0.0))
            throw ConfigError("temperature must be >= 0 for " + provider_id + ":" + model_name);
        if (max_output_tokens < 1)
            throw ConfigError("max_output_tokens must be >= 1 for " + provider_id + ":" + model_name);
    }
};

/// Parses a CLI model selector of the form "provider:model_name",
/// e.g. "openai:gpt-4o", "gemini:gemini-1.5-pro", "mock:demo".
inline ModelSpec parse_model_selector(const std::string& selector) {
    auto colon = selector.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == selector.size())
        throw ConfigError("model selector must look like provider:model_name, got \"" + selector +
                          "\"");
    ModelSpec spec;
    spec.provider_id = selector.substr(0, colon);
    spec.model_name = selector.substr(colon + 1);
    return spec;
}

/// Cache key for one (model, prompt, settings) triple. The temperature is
/// rendered via shortest round-trip formatting so equal doubles always key
/// identically.
inline std::string cache_key(const std::string& provider_id, const std::string& model_name,
                             const std::string& prompt_hash, double temperature,
                             int max_output_tokens) {
    std::string material = provider_id;
    material += '\n';
    material += model_name;
    material += '\n';
    material += prompt_hash;
    material += '\n';
    material += detail::double_repr(temperature);
    material += '\n';
    material += std::to_string(max_output_tokens);
    return detail::sha256_hex(material);
}

struct CompletionRequest {
    PromptBundle bundle;
    ModelSpec model;
    int attempt = 1;
};

/// Outcome of one attempted completion. Terminal failures are data (failed +
/// error), never omissions, so batch output cardinality is always the full
/// records × strategies × models product.
struct CompletionResponse {
    std::string record_id;
    std::string provider_id;
    std::string model_name;
    Strategy strategy = Strategy::vanilla;
    std::string raw_text;
    bool failed = false;
    std::string error;
    bool from_cache = false;
    int attempt = 1;
    std::chrono::milliseconds latency{0};
    std::string timestamp;
    std::string prompt_hash;
};

/// Exponential backoff with deterministic jitter: the jitter fraction comes
/// from a digest of (seed, attempt), so identical runs sleep identically.
struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;

    std::chrono::milliseconds delay(int failed_attempt, const std::string& jitter_seed) const {
        double step =
            static_cast<double>(base_delay.count()) * std::pow(multiplier, failed_attempt - 1);
        std::uint64_t h =
            detail::sha256_prefix64(jitter_seed + "#" + std::to_string(failed_attempt));
        double jitter = static_cast<double>(h % 1000) / 1000.0 * 0.25;
        return std::chrono::milliseconds(std::llround(step * (1.0 + jitter)));
    }
};

namespace detail {

/// Splits an assembled bundle into the provider's system/user texts: the
/// system_role component becomes the system message, everything else joins
/// into the user message with the standard component separator.
inline std::pair<std::string, std::string> split_system_user(const PromptBundle& bundle) {
    std::string system_text;
    std::string user_text;
    for (const auto& component : bundle.components) {
        if (component.kind == ComponentKind::system_role) {
            system_text = component.text;
            continue;
        }
        if (!user_text.empty()) user_text += kComponentSeparator;
        user_text += component.text;
    }
    return {std::move(system_text), std::move(user_text)};
}

} // namespace detail

/// Front door for all model traffic: cache-first completion with bounded
/// retries, plus a bounded-parallelism batch runner with deterministic output
/// order. Thread-safe once constructed.
class Gateway {
public:
    using SleepFn = std::function<void(std::chrono::milliseconds)>;

    Gateway(ProviderRegistry registry, ResponseCache& cache, RetryPolicy policy = {},
            SleepFn sleep_fn = nullptr)
        : registry_(std::move(registry)), cache_(cache), policy_(policy),
          sleep_(sleep_fn ? std::move(sleep_fn) : [](std::chrono::milliseconds d) {
              std::this_thread::sleep_for(d);
          }) {}

    const ProviderRegistry& registry() const { return registry_; }
    const RetryPolicy& policy() const { return policy_; }

    /// One completion: cache hit, coalesced wait, or provider fetch with
    /// retries. Throws ProviderError (terminally ExhaustedRetriesError) on
    /// failure; ConfigError on unresolved provider.
    CompletionResponse complete(const CompletionRequest& request) {
        if (request.attempt < 1) throw ConfigError("completion attempt must be >= 1");
        request.model.validate();
        auto provider = registry_.get(request.model.provider_id);

        const std::string key =
            cache_key(request.model.provider_id, request.model.model_name,
                      request.bundle.prompt_hash, request.model.temperature,
                      request.model.max_output_tokens);

        CompletionResponse response;
        response.record_id = request.bundle.record_id;
        response.provider_id = request.model.provider_id;
        response.model_name = request.model.model_name;
        response.strategy = request.bundle.strategy;
        response.prompt_hash = request.bundle.prompt_hash;
        response.attempt = request.attempt;

        auto started = std::chrono::steady_clock::now();
        CacheEntry meta{key, request.model.provider_id, request.model.model_name,
                        request.bundle.prompt_hash, "", ""};

        int attempts_used = request.attempt;
        auto fetched = cache_.get_or_fetch(meta, [&] {
            auto [system_text, user_text] = detail::split_system_user(request.bundle);
            ProviderRequest provider_request{request.model.model_name,
                                             std::move(system_text),
                                             std::move(user_text),
                                             request.model.temperature,
                                             request.model.max_output_tokens,
                                             request.model.request_timeout,
                                             request.bundle.record_id,
                                             request.bundle.identity_text};
            int attempt = request.attempt;
            for (;;) {
                try {
                    attempts_used = attempt;
                    return provider->complete(provider_request);
                } catch (const ProviderError& e) {
                    if (!e.retryable()) throw;
                    if (attempt > policy_.max_retries)
                        throw ExhaustedRetriesError(attempt, e.what());
                    auto wait = policy_.delay(attempt, key);
                    if (const auto* limited = dynamic_cast<const RateLimitedError*>(&e);
                        limited && limited->retry_after())
                        wait = *limited->retry_after();
                    sleep_(wait);
                    ++attempt;
                }
            }
        });

        response.raw_text = fetched.raw_text;
        response.from_cache = fetched.outcome != CacheOutcome::fetched;
        response.attempt = attempts_used;
        response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        response.timestamp = detail::now_iso8601_utc();
        return response;
    }

    /// Attempts one completion per (record × strategy × model) with at most
    /// max_in_flight outstanding at any instant. The result order is fixed
    /// up front — model_name (then provider), strategy rank, record id — so
    /// output bytes never depend on completion timing. Per-request failures
    /// become failure markers; only configuration errors throw.
    std::vector<CompletionResponse> run_batch(const std::vector<IdentityRecord>& records,
                                              std::vector<Strategy> strategies,
                                              std::vector<ModelSpec> models,
                                              std::size_t max_in_flight,
                                              const TemplateSet& templates,
                                              CotPosition cot_position = CotPosition::post_schema) {
        if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");

        std::sort(strategies.begin(), strategies.end(),
                  [](Strategy a, Strategy b) { return strategy_rank(a) < strategy_rank(b); });
        strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());

        std::sort(models.begin(), models.end(), [](const ModelSpec& a, const ModelSpec& b) {
            return std::tie(a.model_name, a.provider_id) < std::tie(b.model_name, b.provider_id);
        });
        models.erase(std::unique(models.begin(), models.end(),
                                 [](const ModelSpec& a, const ModelSpec& b) {
                                     return a.provider_id == b.provider_id &&
                                            a.model_name == b.model_name;
                                 }),
                     models.end());
        for (const auto& model : models) {
            model.validate();
            registry_.get(model.provider_id); // unresolved ids fail before dispatch
        }

        std::vector<const IdentityRecord*> ordered;
        ordered.reserve(records.size());
        for (const auto& record : records) ordered.push_back(&record);
        std::sort(ordered.begin(), ordered.end(),
                  [](const IdentityRecord* a, const IdentityRecord* b) { return a->id < b->id; });

        std::vector<CompletionRequest> jobs;
        jobs.reserve(ordered.size() * strategies.size() * models.size());
        for (const auto& model : models)
            for (Strategy strategy : strategies)
                for (const IdentityRecord* record : ordered)
                    jobs.push_back(
                        {build_prompt(*record, strategy, templates, cot_position), model, 1});

        std::vector<CompletionResponse> results(jobs.size());
        if (jobs.empty()) return results;

        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= jobs.size()) return;
                try {
                    results[i] = complete(jobs[i]);
                } catch (const std::exception& e) {
                    CompletionResponse marker;
                    marker.record_id = jobs[i].bundle.record_id;
                    marker.provider_id = jobs[i].model.provider_id;
                    marker.model_name = jobs[i].model.model_name;
                    marker.strategy = jobs[i].bundle.strategy;
                    marker.prompt_hash = jobs[i].bundle.prompt_hash;
                    marker.failed = true;
                    marker.error = e.what();
                    marker.timestamp = detail::now_iso8601_utc();
                    results[i] = std::move(marker);
                }
            }
        };

        std::size_t n_workers = std::min(max_in_flight, jobs.size());
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        return results;
    }

private:
    ProviderRegistry registry_;
    ResponseCache& cache_;
    RetryPolicy policy_;
    SleepFn sleep_;
};

} // namespace oppbench
