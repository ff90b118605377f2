#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "oppbench/detail/io.hpp"
#include "oppbench/errors.hpp"

namespace oppbench {

/// One cached completion, keyed by (provider, model, prompt, settings).
struct CacheEntry {
    std::string key;
    std::string provider_id;
    std::string model_name;
    std::string prompt_hash;
    std::string raw_text;
    std::string timestamp; // ISO-8601 UTC
};

enum class CacheOutcome {
    hit,       // served from a persisted entry
    coalesced, // joined an identical request already in flight
    fetched,   // this call performed the provider fetch
};

/// Append-only JSONL response cache, safe for concurrent use by the batch
/// workers. Entries are immutable once written. Identical in-flight requests
/// are coalesced, so one key never triggers two provider calls within a
/// process lifetime.
class ResponseCache {
public:
    /// In-memory cache with no persistence (tests, throwaway runs).
    ResponseCache() = default;

    /// Opens or creates a JSONL-backed cache. A corrupt tail (torn write from
    /// a crash) is truncated away; dropped lines are reported via warnings().
    explicit ResponseCache(const std::filesystem::path& file) : file_(file) {
        if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
        if (std::filesystem::exists(*file_)) load_existing();
        out_.open(*file_, std::ios::binary | std::ios::app);
        if (!out_) throw Error("cannot open cache file for append: " + file_->string());
    }

    std::optional<std::string> lookup(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    struct FetchResult {
        std::string raw_text;
        CacheOutcome outcome;
    };

    /// Returns the cached text for meta.key, or runs `fetch` exactly once per
    /// key (across all threads) and persists the result before returning.
    /// Fetch failures are not cached; every caller coalesced onto the same
    /// failed fetch sees the same exception.
    FetchResult get_or_fetch(const CacheEntry& meta, const std::function<std::string()>& fetch) {
        std::shared_ptr<Flight> flight;
        bool owner = false;
        {
            std::lock_guard lock(mutex_);
            auto hit = entries_.find(meta.key);
            if (hit != entries_.end()) {
                ++hits_;
                return {hit->second, CacheOutcome::hit};
            }
            auto in = inflight_.find(meta.key);
            if (in != inflight_.end()) {
                flight = in->second;
            } else {
                flight = std::make_shared<Flight>();
                inflight_.emplace(meta.key, flight);
                owner = true;
            }
        }

        if (!owner) {
            ++coalesced_;
            return {flight->future.get(), CacheOutcome::coalesced}; // rethrows on fetch failure
        }

        std::string raw;
        try {
            raw = fetch();
        } catch (...) {
            auto error = std::current_exception();
            {
                std::lock_guard lock(mutex_);
                inflight_.erase(meta.key);
            }
            flight->promise.set_exception(error);
            std::rethrow_exception(error);
        }

        {
            std::lock_guard lock(mutex_);
            entries_[meta.key] = raw;
            append_line(meta, raw);
            inflight_.erase(meta.key);
            ++fetches_;
        }
        flight->promise.set_value(raw);
        return {raw, CacheOutcome::fetched};
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

    std::size_t hits() const { return hits_.load(); }
    std::size_t coalesced() const { return coalesced_.load(); }
    std::size_t fetches() const { return fetches_.load(); }

    /// Messages produced while opening the file (corrupt tail, etc.).
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct Flight {
        std::promise<std::string> promise;
        std::shared_future<std::string> future;
        Flight() : future(promise.get_future().share()) {}
    };

    void append_line(const CacheEntry& meta, const std::string& raw) {
        if (!out_.is_open()) return;
        nlohmann::ordered_json obj;
        obj["key"] = meta.key;
        obj["provider_id"] = meta.provider_id;
        obj["model_name"] = meta.model_name;
        obj["prompt_hash"] = meta.prompt_hash;
        obj["raw_text"] = raw;
        obj["timestamp"] = meta.timestamp.empty() ? detail::now_iso8601_utc() : meta.timestamp;
        out_ << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        out_.flush();
    }

    void load_existing() {
        std::string text = detail::read_file(*file_);
        std::size_t pos = 0;
        std::size_t line_no = 0;
        while (pos < text.size()) {
            auto nl = text.find('\n', pos);
            std::size_t line_end = nl == std::string::npos ? text.size() : nl;
            std::string_view line(text.data() + pos, line_end - pos);
            if (!line.empty()) {
                auto obj = nlohmann::json::parse(line, nullptr, false);
                bool valid = !obj.is_discarded() && obj.is_object() && obj.contains("key") &&
                             obj["key"].is_string() && obj.contains("raw_text") &&
                             obj["raw_text"].is_string();
                if (!valid) {
                    // Append-only file: anything after the first bad line is a
                    // torn write. Drop it and reclaim the space.
                    warnings_.push_back("cache " + file_->string() + ": dropping corrupt tail at line " +
                                        std::to_string(line_no + 1));
                    std::filesystem::resize_file(*file_, pos);
                    return;
                }
                entries_.emplace(obj["key"].get<std::string>(), obj["raw_text"].get<std::string>());
            }
            if (nl == std::string::npos) break;
            pos = nl + 1;
            ++line_no;
        }
    }

    std::optional<std::filesystem::path> file_;
    std::ofstream out_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
    std::unordered_map<std::string, std::shared_ptr<Flight>> inflight_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> coalesced_{0};
    std::atomic<std::size_t> fetches_{0};
    std::vector<std::string> warnings_;
};

} // namespace oppbench
