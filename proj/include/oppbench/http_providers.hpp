#pragma once

// HTTP adapters for the hosted model APIs. Kept out of provider.hpp so that
// translation units which only need the mock do not pull in httplib. The build
// defines CPPHTTPLIB_OPENSSL_SUPPORT, so https endpoints work out of the box.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "oppbench/errors.hpp"
#include "oppbench/provider.hpp"

namespace oppbench {
namespace detail {

inline std::optional<std::string> env_value(const char* name) {
    const char* value = std::getenv(name);
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
}

inline std::optional<std::chrono::milliseconds> parse_retry_after(const std::string& header) {
    if (header.empty()) return std::nullopt;
    long long seconds = 0;
    auto [ptr, ec] = std::from_chars(header.data(), header.data() + header.size(), seconds);
    if (ec != std::errc{} || ptr != header.data() + header.size() || seconds < 0) return std::nullopt;
    return std::chrono::milliseconds(seconds * 1000);
}

inline void apply_timeout(httplib::Client& client, std::chrono::milliseconds timeout) {
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
}

[[noreturn]] inline void throw_transport_error(const std::string& provider_id, httplib::Error err) {
    if (err == httplib::Error::ConnectionTimeout)
        throw TimeoutError("provider " + provider_id + ": connection timed out");
    throw ProviderError("provider " + provider_id + ": " + httplib::to_string(err),
                        /*retryable=*/true);
}

[[noreturn]] inline void throw_status_error(const std::string& provider_id,
                                            const httplib::Response& res) {
    if (res.status == 429) throw RateLimitedError(parse_retry_after(res.get_header_value("Retry-After")));
    std::string detail = "provider " + provider_id + ": HTTP " + std::to_string(res.status);
    if (!res.body.empty()) detail += " — " + res.body.substr(0, 200);
    if (res.status == 408) throw TimeoutError(detail);
    throw ProviderError(detail, /*retryable=*/res.status >= 500);
}

} // namespace detail

/// OpenAI chat-completions adapter. Reads OPENAI_API_KEY; the endpoint can be
/// redirected (local stub server, compatible gateway) via OPPBENCH_OPENAI_BASE_URL.
class OpenAiProvider : public Provider {
public:
    static constexpr const char* kKeyEnv = "OPENAI_API_KEY";
    static constexpr const char* kBaseUrlEnv = "OPPBENCH_OPENAI_BASE_URL";
    static constexpr const char* kDefaultBaseUrl = "https://api.openai.com";

    explicit OpenAiProvider(std::string api_key, std::string base_url = kDefaultBaseUrl)
        : api_key_(std::move(api_key)), base_url_(std::move(base_url)) {}

    static std::shared_ptr<OpenAiProvider> from_env() {
        auto key = detail::env_value(kKeyEnv);
        if (!key) throw ConfigError(std::string("provider \"openai\" requires ") + kKeyEnv);
        auto base = detail::env_value(kBaseUrlEnv);
        return std::make_shared<OpenAiProvider>(*key, base.value_or(kDefaultBaseUrl));
    }

    std::string id() const override { return "openai"; }

    std::string complete(const ProviderRequest& request) override {
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_text.empty())
            messages.push_back({{"role", "system"}, {"content", request.system_text}});
        messages.push_back({{"role", "user"}, {"content", request.user_text}});
        nlohmann::json body = {
            {"model", request.model_name},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens},
        };

        httplib::Client client(base_url_);
        detail::apply_timeout(client, request.timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
        auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res) detail::throw_transport_error(id(), res.error());
        if (res->status != 200) detail::throw_status_error(id(), *res);

        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (!parsed.is_discarded()) {
            const auto* content = parsed.is_object() && parsed.contains("choices") &&
                                          parsed["choices"].is_array() && !parsed["choices"].empty()
                                      ? &parsed["choices"][0]
                                      : nullptr;
            if (content != nullptr && content->contains("message") &&
                (*content)["message"].contains("content") &&
                (*content)["message"]["content"].is_string())
                return (*content)["message"]["content"].get<std::string>();
        }
        throw ProviderError("provider openai: malformed completion response", /*retryable=*/false);
    }

private:
    std::string api_key_;
    std::string base_url_;
};

/// Gemini generateContent adapter. Reads GEMINI_API_KEY; endpoint redirectable
/// via OPPBENCH_GEMINI_BASE_URL. The key travels in the x-goog-api-key header.
class GeminiProvider : public Provider {
public:
    static constexpr const char* kKeyEnv = "GEMINI_API_KEY";
    static constexpr const char* kBaseUrlEnv = "OPPBENCH_GEMINI_BASE_URL";
    static constexpr const char* kDefaultBaseUrl = "https://generativelanguage.googleapis.com";

    explicit GeminiProvider(std::string api_key, std::string base_url = kDefaultBaseUrl)
        : api_key_(std::move(api_key)), base_url_(std::move(base_url)) {}

    static std::shared_ptr<GeminiProvider> from_env() {
        auto key = detail::env_value(kKeyEnv);
        if (!key) throw ConfigError(std::string("provider \"gemini\" requires ") + kKeyEnv);
        auto base = detail::env_value(kBaseUrlEnv);
        return std::make_shared<GeminiProvider>(*key, base.value_or(kDefaultBaseUrl));
    }

    std::string id() const override { return "gemini"; }

    std::string complete(const ProviderRequest& request) override {
        nlohmann::json body = {
            {"contents",
             nlohmann::json::array(
                 {{{"role", "user"},
                   {"parts", nlohmann::json::array({{{"text", request.user_text}}})}}})},
            {"generationConfig",
             {{"temperature", request.temperature}, {"maxOutputTokens", request.max_output_tokens}}},
        };
        if (!request.system_text.empty())
            body["systemInstruction"] = {
                {"parts", nlohmann::json::array({{{"text", request.system_text}}})}};

        httplib::Client client(base_url_);
        detail::apply_timeout(client, request.timeout);
        httplib::Headers headers{{"x-goog-api-key", api_key_}};
        std::string path = "/v1beta/models/" + request.model_name + ":generateContent";
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) detail::throw_transport_error(id(), res.error());
        if (res->status != 200) detail::throw_status_error(id(), *res);

        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("candidates") &&
            parsed["candidates"].is_array() && !parsed["candidates"].empty()) {
            const auto& candidate = parsed["candidates"][0];
            if (candidate.contains("content") && candidate["content"].contains("parts") &&
                candidate["content"]["parts"].is_array()) {
                std::string text;
                for (const auto& part : candidate["content"]["parts"])
                    if (part.contains("text") && part["text"].is_string())
                        text += part["text"].get<std::string>();
                if (!text.empty()) return text;
            }
        }
        throw ProviderError("provider gemini: malformed completion response", /*retryable=*/false);
    }

private:
    std::string api_key_;
    std::string base_url_;
};

} // namespace oppbench
