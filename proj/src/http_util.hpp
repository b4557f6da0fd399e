#pragma once

// Internal HTTP plumbing shared by the remote embedding and generation
// clients: URL splitting, bounded in-flight slots, retry with backoff.

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mrag/error.hpp"

namespace mrag::detail {

struct UrlParts {
    std::string base; // scheme://host:port
    std::string path; // leading-slash path, "/" if absent
};

inline UrlParts split_url(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw Error("invalid endpoint URL (missing scheme): " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

// Bounds concurrent requests per endpoint. Guards are RAII; the gate lives
// for the process lifetime.
class InFlightGate {
public:
    class Guard {
    public:
        Guard(InFlightGate& gate, int limit) : gate_(gate) { gate_.acquire(limit); }
        ~Guard() { gate_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InFlightGate& gate_;
    };

    static InFlightGate& for_endpoint(const std::string& endpoint) {
        static std::mutex registry_mutex;
        static std::map<std::string, std::unique_ptr<InFlightGate>> registry;
        std::lock_guard<std::mutex> lock(registry_mutex);
        auto& slot = registry[endpoint];
        if (!slot) slot = std::make_unique<InFlightGate>();
        return *slot;
    }

private:
    void acquire(int limit) {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < limit; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
};

struct HttpAttempt {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string transport_error;
};

inline bool retryable(const HttpAttempt& a) {
    if (!a.transport_ok) return true;
    return a.status >= 500 || a.status == 429 || a.status == 408;
}

// Runs attempt() up to 1 + retries times with exponential backoff, returning
// the first non-retryable or last result.
inline HttpAttempt with_retries(int retries, int backoff_ms,
                                const std::function<HttpAttempt()>& attempt) {
    HttpAttempt last;
    for (int i = 0; i <= retries; ++i) {
        last = attempt();
        if (!retryable(last)) return last;
        if (i < retries)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << i));
    }
    return last;
}

inline std::string body_excerpt(const std::string& body, size_t max_len = 200) {
    if (body.size() <= max_len) return body;
    return body.substr(0, max_len) + "...";
}

} // namespace mrag::detail
