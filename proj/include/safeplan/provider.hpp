#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <httplib.h>

#include "safeplan/jsonl.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Requests
// ---------------------------------------------------------------------------

struct ChatMessage {
    std::string role;
    std::string content;
};

using ChatRequest = std::vector<ChatMessage>;

inline std::uint64_t request_fingerprint(const ChatRequest& messages) {
    // FNV-1a over role/content pairs.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& m : messages) {
        mix(m.role);
        mix(m.content);
    }
    return h;
}

inline std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

struct ProviderConfig {
    enum class Kind { mock, http };
    Kind kind = Kind::mock;
    std::string endpoint;    // http kind only
    std::string model_name = "mock-model";
    double timeout_s = 30.0;
    int max_in_flight = 4;
    std::string mock_script; // mock kind: optional JSONL script path

    void validate() const {
        if (timeout_s <= 0) throw Error("provider timeout must be positive");
        if (max_in_flight < 1) throw Error("max_in_flight must be at least 1");
        if (kind == Kind::http && endpoint.empty()) throw Error("http provider needs an endpoint");
    }
};

/// Environment variable holding the bearer credential for the http provider.
inline constexpr const char* kApiKeyEnvVar = "SAFEPLAN_API_KEY";

// ---------------------------------------------------------------------------
// Provider interface
// ---------------------------------------------------------------------------

/// Completion backend. complete() bounds concurrent calls by max_in_flight
/// and counts every request; subclasses implement do_complete.
class Provider {
public:
    explicit Provider(int max_in_flight = 1024)
        : slots_(std::max(1, max_in_flight)) {}
    virtual ~Provider() = default;

    std::string complete(const ChatRequest& messages) {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_complete(messages);
    }

    long calls() const { return calls_.load(std::memory_order_relaxed); }

protected:
    virtual std::string do_complete(const ChatRequest& messages) = 0;

private:
    std::counting_semaphore<> slots_;
    std::atomic<long> calls_{0};
};

// ---------------------------------------------------------------------------
// Scripted mock provider
// ---------------------------------------------------------------------------

/// Deterministic offline backend. Three matching modes, tried in order:
///   1. exact request fingerprint (hex of request_fingerprint), replayable;
///   2. "contains" entries: every listed substring occurs in the request
///      text, first match wins, replayable;
///   3. wildcard entries with neither key form a queue consumed in order.
class MockProvider : public Provider {
public:
    struct Entry {
        std::string fingerprint; // hex, empty = unset
        std::vector<std::string> contains;
        std::string response;
    };

    MockProvider() : Provider(1024) {}

    explicit MockProvider(std::vector<std::string> sequence) : Provider(1024) {
        for (auto& r : sequence) wildcard_.push_back(std::move(r));
    }

    void load_script(const std::string& path) {
        std::lock_guard lock(mutex_);
        for_each_jsonl(path, [&](int line_no, const json& j) {
            require_only_keys(j, line_no, {"fingerprint", "contains", "response"});
            Entry e;
            e.response = require_string(j, line_no, "response");
            if (auto it = j.find("fingerprint"); it != j.end()) e.fingerprint = it->get<std::string>();
            if (auto it = j.find("contains"); it != j.end()) {
                if (it->is_string())
                    e.contains.push_back(it->get<std::string>());
                else
                    for (const auto& s : *it) e.contains.push_back(s.get<std::string>());
            }
            if (e.fingerprint.empty() && e.contains.empty())
                wildcard_.push_back(e.response);
            else
                entries_.push_back(std::move(e));
        });
    }

    void add_response(std::string response) {
        std::lock_guard lock(mutex_);
        wildcard_.push_back(std::move(response));
    }

    void add_entry(Entry e) {
        std::lock_guard lock(mutex_);
        entries_.push_back(std::move(e));
    }

protected:
    std::string do_complete(const ChatRequest& messages) override {
        std::lock_guard lock(mutex_);
        const std::string fp = fingerprint_hex(request_fingerprint(messages));
        for (const auto& e : entries_)
            if (!e.fingerprint.empty() && e.fingerprint == fp) return e.response;
        std::string text;
        for (const auto& m : messages) text += m.content + "\n";
        for (const auto& e : entries_) {
            if (e.contains.empty()) continue;
            bool all = true;
            for (const auto& needle : e.contains)
                if (!contains_ci(text, needle)) { all = false; break; }
            if (all) return e.response;
        }
        if (!wildcard_.empty()) {
            std::string r = wildcard_.front();
            wildcard_.pop_front();
            return r;
        }
        throw Error("mock script has no response for request " + fp);
    }

private:
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::deque<std::string> wildcard_;
};

// ---------------------------------------------------------------------------
// Generic chat-completion HTTP provider
// ---------------------------------------------------------------------------

/// Speaks a plain chat-completion wire shape: POST {model, messages,
/// temperature: 0} and read choices[0].message.content. The bearer token
/// comes from SAFEPLAN_API_KEY when set.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(ProviderConfig config)
        : Provider(config.max_in_flight), config_(std::move(config)) {
        config_.validate();
        split_endpoint(config_.endpoint, base_, path_);
    }

protected:
    std::string do_complete(const ChatRequest& messages) override {
        httplib::Client client(base_);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long>(config_.timeout_s * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(
            static_cast<long>(config_.timeout_s * 1000)));

        json body;
        body["model"] = config_.model_name;
        json msgs = json::array();
        for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
        body["messages"] = msgs;
        body["temperature"] = 0;

        httplib::Headers headers;
        if (const char* key = std::getenv(kApiKeyEnvVar); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write || err == httplib::Error::Connection)
                throw ProviderTimeout("provider unreachable: " + httplib::to_string(err));
            throw ProviderMalformedOutput(0, "transport error: " + httplib::to_string(err));
        }
        if (res->status != 200)
            throw ProviderMalformedOutput(0, "HTTP status " + std::to_string(res->status));
        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ProviderMalformedOutput(0, std::string("response is not JSON: ") + e.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
            !parsed["choices"][0]["message"].contains("content") ||
            !parsed["choices"][0]["message"]["content"].is_string())
            throw ProviderMalformedOutput(0, "response lacks choices[0].message.content");
        return parsed["choices"][0]["message"]["content"].get<std::string>();
    }

private:
    static void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
        if (!starts_with(endpoint, "http://"))
            throw Error("http provider endpoint must start with http://");
        auto slash = endpoint.find('/', 7);
        if (slash == std::string::npos) {
            base = endpoint;
            path = "/";
        } else {
            base = endpoint.substr(0, slash);
            path = endpoint.substr(slash);
        }
    }

    ProviderConfig config_;
    std::string base_;
    std::string path_;
};

inline std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
    config.validate();
    if (config.kind == ProviderConfig::Kind::http)
        return std::make_unique<HttpProvider>(config);
    auto mock = std::make_unique<MockProvider>();
    if (!config.mock_script.empty()) mock->load_script(config.mock_script);
    return mock;
}

} // namespace safeplan
