#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oppbench/detail/digest.hpp"
#include "oppbench/detail/io.hpp"
#include "oppbench/errors.hpp"

namespace oppbench {

/// What a provider adapter needs to issue one completion. record_id and
/// identity_text are metadata for the mock provider; HTTP adapters ignore them.
struct ProviderRequest {
    std::string model_name;
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::chrono::milliseconds timeout{60000};
    std::string record_id;
    std::string identity_text;
};

/// A model backend. Adapters must be safely shareable across concurrent
/// requests; complete() either returns the raw completion text or throws a
/// ProviderError (RateLimitedError / TimeoutError for the transient cases).
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const ProviderRequest& request) = 0;
};

class ProviderRegistry {
public:
    void add(std::shared_ptr<Provider> provider) {
        if (!provider) throw ConfigError("cannot register a null provider");
        std::string id = provider->id();
        auto [it, inserted] = providers_.emplace(std::move(id), std::move(provider));
        if (!inserted) throw DuplicateProviderError(it->first);
    }

    std::shared_ptr<Provider> get(const std::string& id) const {
        auto it = providers_.find(id);
        if (it == providers_.end()) throw ConfigError("unknown provider id \"" + id + "\"");
        return it->second;
    }

    bool contains(const std::string& id) const { return providers_.count(id) != 0; }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(providers_.size());
        for (const auto& [id, _] : providers_) out.push_back(id);
        return out;
    }

private:
    std::map<std::string, std::shared_ptr<Provider>> providers_;
};

/// Offline provider for tests and dry runs. Responses come from an optional
/// fixture table (record id -> verbatim reply); records not in the table get a
/// canonical reply whose level is a stable digest of the identity text, so any
/// dataset yields parseable, bit-reproducible output.
class MockProvider : public Provider {
public:
    MockProvider() = default;

    explicit MockProvider(const nlohmann::json& fixture) { load_table(fixture, "<inline fixture>"); }

    explicit MockProvider(const std::filesystem::path& fixture_file) {
        auto parsed = nlohmann::json::parse(detail::read_file(fixture_file), nullptr, false);
        if (parsed.is_discarded())
            throw ConfigError("mock fixture is not valid JSON: " + fixture_file.string());
        load_table(parsed, fixture_file.string());
    }

    std::string id() const override { return "mock"; }

    std::string complete(const ProviderRequest& request) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        auto it = table_.find(request.record_id);
        if (it != table_.end()) return it->second;
        return fallback_reply(request.identity_text);
    }

    /// Number of complete() calls served; lets tests assert cache behaviour.
    std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

    static std::string fallback_reply(const std::string& identity_text) {
        int level = 1 + static_cast<int>(detail::sha256_prefix64(identity_text) % 5);
        return "Rating: " + std::to_string(level) +
               "; Explanation: deterministic mock judgment derived from the identity text.";
    }

private:
    void load_table(const nlohmann::json& fixture, const std::string& origin) {
        if (!fixture.is_object())
            throw ConfigError("mock fixture must be a JSON object of record id -> reply: " + origin);
        for (const auto& [record_id, reply] : fixture.items()) {
            if (!reply.is_string())
                throw ConfigError("mock fixture reply for \"" + record_id +
                                  "\" must be a string: " + origin);
            table_.emplace(record_id, reply.get<std::string>());
        }
    }

    std::map<std::string, std::string> table_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace oppbench
