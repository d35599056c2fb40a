#include "capel/llm_gateway.hpp"

#include "capel/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace capel {

using nlohmann::json;

struct HttpChatBackend::Impl {
    HttpBackendConfig cfg;

    std::mutex mutex;
    std::condition_variable slot_free;
    int in_flight = 0;

    // Token bucket; refilled lazily on acquire.
    double bucket_tokens;
    std::chrono::steady_clock::time_point last_refill =
        std::chrono::steady_clock::now();

    explicit Impl(HttpBackendConfig c)
        : cfg(std::move(c)), bucket_tokens(static_cast<double>(cfg.bucket_burst)) {}

    void acquire_slot() {
        std::unique_lock lock(mutex);
        slot_free.wait(lock, [this] { return in_flight < cfg.max_in_flight; });
        ++in_flight;
    }

    void release_slot() {
        {
            std::lock_guard lock(mutex);
            --in_flight;
        }
        slot_free.notify_one();
    }

    void pace() {
        if (cfg.rate_per_sec <= 0.0) return;
        std::unique_lock lock(mutex);
        for (;;) {
            const auto now = std::chrono::steady_clock::now();
            const double elapsed =
                std::chrono::duration<double>(now - last_refill).count();
            bucket_tokens = std::min(static_cast<double>(cfg.bucket_burst),
                                     bucket_tokens + elapsed * cfg.rate_per_sec);
            last_refill = now;
            if (bucket_tokens >= 1.0) {
                bucket_tokens -= 1.0;
                return;
            }
            const double wait_s = (1.0 - bucket_tokens) / cfg.rate_per_sec;
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
            lock.lock();
        }
    }

    double backoff_ms(int attempt) const {
        return std::min(cfg.backoff_max_ms,
                        cfg.backoff_base_ms * std::pow(cfg.backoff_factor, attempt - 1));
    }
};

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {
    if (impl_->cfg.host.empty()) {
        throw InvalidArgumentsError("http backend requires an endpoint host");
    }
}

HttpChatBackend::~HttpChatBackend() = default;

const std::string& HttpChatBackend::id() const { return impl_->cfg.id; }

const ParamCaps& HttpChatBackend::caps() const { return impl_->cfg.caps; }

Completion HttpChatBackend::complete(const ChatRequest& request,
                                     const DecodingParams& params) {
    const HttpBackendConfig& cfg = impl_->cfg;

    json body;
    body["model"] = cfg.model.empty() ? cfg.id : cfg.model;
    json messages = json::array();
    if (!request.system.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    body["messages"] = messages;
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_completion_tokens;
    if (params.seed) body["seed"] = *params.seed;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg.api_key_env.empty()) {
        const char* key = std::getenv(cfg.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("env var " + cfg.api_key_env + " is unset for backend " +
                            cfg.id);
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    impl_->acquire_slot();
    struct SlotGuard {
        Impl* impl;
        ~SlotGuard() { impl->release_slot(); }
    } guard{impl_.get()};

    const auto t0 = std::chrono::steady_clock::now();
    bool saw_rate_limit = false;
    std::string last_error;

    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        impl_->pace();

        httplib::Client client(cfg.host);
        client.set_connection_timeout(cfg.timeout_sec);
        client.set_read_timeout(cfg.timeout_sec);
        client.set_write_timeout(cfg.timeout_sec);

        httplib::Result res =
            client.Post(cfg.path, headers, payload, "application/json");

        auto finish = [&](Completion c) {
            c.usage.attempts = attempt;
            c.usage.latency_ms = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();
            return c;
        };

        if (!res) {
            last_error = httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("backend " + cfg.id + " rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        } else if (res->status == 429) {
            saw_rate_limit = true;
            last_error = "HTTP 429";
        } else if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw BackendError("backend " + cfg.id + " returned HTTP " +
                               std::to_string(res->status) + ": " + res->body);
        } else {
            json doc;
            try {
                doc = json::parse(res->body);
            } catch (const json::exception& e) {
                throw BackendError("backend " + cfg.id +
                                   " sent unparseable JSON: " + e.what());
            }
            Completion c;
            try {
                const json& choice = doc.at("choices").at(0);
                c.text = choice.at("message").at("content").get<std::string>();
                // Truncation is never silent: the cap shows up in usage.
                c.usage.truncated = choice.value("finish_reason", "") == "length";
            } catch (const json::exception& e) {
                throw BackendError("backend " + cfg.id +
                                   " reply missing choices/message: " + e.what());
            }
            if (doc.contains("usage")) {
                c.usage.prompt_tokens = doc["usage"].value("prompt_tokens", -1);
                c.usage.completion_tokens = doc["usage"].value("completion_tokens", -1);
            }
            return finish(std::move(c));
        }

        if (attempt < cfg.max_attempts) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
                impl_->backoff_ms(attempt)));
        }
    }

    if (saw_rate_limit) {
        throw RateLimitError("backend " + cfg.id + " rate limit not cleared after " +
                             std::to_string(cfg.max_attempts) + " attempts");
    }
    throw TimeoutError("backend " + cfg.id + " unreachable after " +
                       std::to_string(cfg.max_attempts) + " attempts: " + last_error);
}

}  // namespace capel
